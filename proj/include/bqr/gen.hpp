#pragma once

#include "bqr/blocks.hpp"
#include "bqr/socp.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace bqr {

// Philox4x32-10 counter-based generator. A stream is identified by
// (master seed, label, index); draws depend only on the stream and the
// position within it, never on scheduling.
class Rng {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Rng(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

  static Counter philox(Counter counter, Key key);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  double normal();

 private:
  void refill();

  Key key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  Counter buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// 64-bit stream seed derived from (master seed, label, index); recorded in trial rows.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view label, std::uint64_t index);

// m x N with i.i.d. N(0, 1) entries drawn row by row; optionally unit-norm columns.
Matrix gaussian_matrix(int m, int n, Rng& rng, bool normalize_columns = false);

// Sylvester Hadamard matrix; order must be a power of two.
Matrix hadamard(int order);

// (m/d) x (n/d) factor P(r, i) = sqrt(d/m) cos(2 pi w_r i / F), w uniform on [0, 1]^{m/d}.
Matrix oversampled_dct(int m, int n, int d, double oversampling, Rng& rng);

Matrix kronecker(const Matrix& left, const Matrix& right);

// oversampled_dct(m, n, d, F) kron (H / sqrt(d)).
Matrix block_coherent_dct(int m, int n, int d, double oversampling, Rng& rng);

// Exactly k blocks chosen uniformly without replacement, N(0, 1) entries.
Vector block_sparse_signal(const BlockPartition& p, int k, Rng& rng);

// Gaussian direction scaled so that ||e||_2 = level (L2) or
// ||A^T e||_{2,inf} = level (L2Inf).
Vector bounded_noise(NoiseKind kind, double level, const Matrix& A, const BlockPartition& p,
                     Rng& rng);

// Row-major CSV, full precision scientific notation. Vectors are one column.
void write_matrix_csv(const std::string& path, const Matrix& M);
Matrix read_matrix_csv(const std::string& path);

}  // namespace bqr
