#include "bqr/gen.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace bqr {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ fnv1a(label)) + index);
}

Rng::Rng(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  const std::uint64_t k = splitmix64(seed ^ fnv1a(label));
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  stream_ = index;
}

Rng::Counter Rng::philox(Counter c, Key k) {
  constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += w0;
    k[1] += w1;
  }
  return c;
}

void Rng::refill() {
  const Counter counter{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                        static_cast<std::uint32_t>(stream_),
                        static_cast<std::uint32_t>(stream_ >> 32)};
  buffer_ = philox(counter, key_);
  ++block_;
  used_ = 0;
}

std::uint32_t Rng::next_u32() {
  if (used_ == 4) refill();
  return buffer_[used_++];
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_int needs n > 0");
  const std::uint64_t limit = -n % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= limit) return r % n;
  }
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Matrix gaussian_matrix(int m, int n, Rng& rng, bool normalize_columns) {
  if (m < 1 || n < 1) throw std::invalid_argument("matrix dimensions must be positive");
  Matrix A(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.normal();
  if (normalize_columns) {
    for (int j = 0; j < n; ++j) {
      const double nj = A.col(j).norm();
      if (nj > 0.0) A.col(j) /= nj;
    }
  }
  return A;
}

Matrix hadamard(int order) {
  if (order < 1 || (order & (order - 1)) != 0) {
    throw std::invalid_argument("Hadamard order " + std::to_string(order) +
                                " unavailable (powers of two only)");
  }
  Matrix H = Matrix::Ones(1, 1);
  while (H.rows() < order) {
    const Eigen::Index n = H.rows();
    Matrix next(2 * n, 2 * n);
    next << H, H, H, -H;
    H = std::move(next);
  }
  return H;
}

Matrix oversampled_dct(int m, int n, int d, double oversampling, Rng& rng) {
  if (d < 1 || m < 1 || n < 1 || m % d != 0 || n % d != 0) {
    throw std::invalid_argument("block length must divide both matrix dimensions");
  }
  if (!(oversampling >= 1.0)) throw std::invalid_argument("oversampling factor must be >= 1");
  const int rows = m / d;
  const int cols = n / d;
  Vector freq(rows);
  for (int r = 0; r < rows; ++r) freq[r] = rng.uniform();
  const double amp = std::sqrt(static_cast<double>(d) / m);
  Matrix P(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int i = 0; i < cols; ++i)
      P(r, i) = amp * std::cos(2.0 * std::numbers::pi * freq[r] * i / oversampling);
  return P;
}

Matrix kronecker(const Matrix& left, const Matrix& right) {
  const Eigen::Index br = right.rows(), bc = right.cols();
  Matrix out(left.rows() * br, left.cols() * bc);
  for (Eigen::Index r = 0; r < left.rows(); ++r)
    for (Eigen::Index c = 0; c < left.cols(); ++c) out.block(r * br, c * bc, br, bc) = left(r, c) * right;
  return out;
}

Matrix block_coherent_dct(int m, int n, int d, double oversampling, Rng& rng) {
  const Matrix D = hadamard(d) / std::sqrt(static_cast<double>(d));
  return kronecker(oversampled_dct(m, n, d, oversampling, rng), D);
}

Vector block_sparse_signal(const BlockPartition& p, int k, Rng& rng) {
  const int M = p.num_blocks();
  if (k < 0 || k > M) throw std::invalid_argument("sparsity k out of range [0, M]");
  std::vector<int> order(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) order[j] = j;
  Vector x = Vector::Zero(p.size());
  for (int i = 0; i < k; ++i) {
    const auto pick = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(M - i)));
    std::swap(order[i], order[pick]);
    const int j = order[i];
    auto xj = x.segment(p.offset(j), p.dim(j));
    do {
      for (Eigen::Index e = 0; e < xj.size(); ++e) xj[e] = rng.normal();
    } while (xj.squaredNorm() == 0.0);
  }
  return x;
}

Vector bounded_noise(NoiseKind kind, double level, const Matrix& A, const BlockPartition& p,
                     Rng& rng) {
  if (!(level > 0.0)) throw std::invalid_argument("noise level must be positive");
  if (kind == NoiseKind::None) throw std::invalid_argument("bounded noise needs l2 or l2inf");
  const Eigen::Index m = A.rows();
  for (;;) {
    Vector u(m);
    for (Eigen::Index i = 0; i < m; ++i) u[i] = rng.normal();
    const double scale = kind == NoiseKind::L2
                             ? u.norm()
                             : p.block_norms(A.transpose() * u).maxCoeff();
    if (scale > 0.0) return (level / scale) * u;
  }
}

void write_matrix_csv(const std::string& path, const Matrix& M) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::scientific << std::setprecision(17);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j > 0) out << ',';
      out << M(i, j);
    }
    out << '\n';
  }
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      row.push_back(std::stod(cell));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(path + ": ragged CSV row " + std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": empty matrix");
  Matrix M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
  return M;
}

}  // namespace bqr
