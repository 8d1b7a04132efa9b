#pragma once

#include "bqr/analysis.hpp"
#include "bqr/blocks.hpp"
#include "bqr/socp.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bqr {

enum class MethodKind { Ccp, BlockBp, GroupLasso, L2Lp, L1m2 };

struct MethodSpec {
  MethodKind kind = MethodKind::Ccp;
  // q for CCP (infinity allowed), p for l2/lp, lambda / ||A^T y||_{2,inf} for group lasso.
  Order param = 2.0;

  std::string name() const;
  // Parameter column of the trial CSV; empty for parameter-free methods.
  std::string param_field() const;
  std::string label() const;  // name plus parameter, e.g. "ccp:1.5"
};

MethodSpec parse_method(const nlohmann::json& spec);
MethodSpec parse_method(const std::string& label);

// Gate for `sweep --check`: at every grid point,
// rate(better) >= rate(worse) - margin.
struct OrderingCheck {
  std::string better;  // method label, e.g. "ccp:1.5"
  std::string worse;
  double margin = 0.05;
};

struct ExperimentConfig {
  std::vector<MethodSpec> methods;
  std::string matrix = "gaussian";  // gaussian | dct
  double oversampling = 5.0;        // F for dct
  bool normalize_columns = false;
  std::vector<int> m_values;
  int n = 0;
  std::vector<int> dims;  // explicit block lengths; empty means uniform d
  int d = 1;
  std::vector<int> k_values;
  NoiseModel noise;
  int trials = 1;
  double threshold = 1e-3;
  std::uint64_t seed = 1;
  int trial = 0;  // instance index used by `recover`
  std::vector<OrderingCheck> checks;

  BlockPartition partition() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

struct Instance {
  Matrix A;
  Vector x;
  Vector y;
  BlockPartition partition;
  NoiseModel noise;
  std::uint64_t seed = 0;  // stream seed recorded in the trial row
};

// Draws (A, x, e) for grid point (m, k) and trial index from the config seed.
Instance make_instance(const ExperimentConfig& cfg, int m, int k, int trial);

struct MethodOutcome {
  Vector x;
  int iterations = 0;
  std::string status;
  double violation = 0.0;  // measurement violation (group lasso: KKT residual)
};

MethodOutcome run_method(const MethodSpec& method, const Problem& problem);

struct TrialRecord {
  std::string method;
  std::string param;
  int m = 0, n = 0, d = 0, k = 0, trial = 0;
  std::uint64_t seed = 0;
  double rel_err = 0.0;
  bool success = false;
  int iterations = 0;
  double wall_ms = 0.0;
  std::string status;
};

struct SummaryRow {
  std::string method;
  std::string param;
  int m = 0, n = 0, d = 0, k = 0;
  int trials = 0;
  int successes = 0;
  double rate = 0.0;
};

struct SweepResult {
  std::vector<TrialRecord> trials;
  std::vector<SummaryRow> summary;
};

double relative_error(const ConstVectorRef& estimate, const ConstVectorRef& truth);

// Runs every (m, k, trial) instance with every method on `jobs` workers.
// Rows come out ordered by (m, k, method, trial) whatever the schedule.
SweepResult run_sweep(const ExperimentConfig& cfg, int jobs, bool timing = true);

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& trials);

struct CheckOutcome {
  bool passed = true;
  std::vector<std::string> lines;  // one per (check, grid point)
};
CheckOutcome evaluate_checks(const std::vector<OrderingCheck>& checks,
                             const std::vector<SummaryRow>& summary);

extern const char* const kTrialHeader;
extern const char* const kSummaryHeader;
void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& rows);
void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows);

// Shortest round-trip decimal form; "inf"/"nan" for non-finite values.
std::string format_number(double value);

// The five-measurement example with a one-dimensional solution line.
struct ToyProblem {
  Matrix A;
  Vector y;
  BlockPartition partition;
  Vector line_point(double t) const;  // (t, t, t, 20-2t, 40-4t, 2(t-9))
  Vector kernel() const;              // (1, 1, 1, -2, -4, 2)
};
ToyProblem toy_problem();

struct ToyCurves {
  std::vector<double> t;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;  // values[column][i]
};

// t_i = (i - 100) / 100 for i = 0..1200.
ToyCurves toy_curves();
void write_toy_curves(const std::string& path, const ToyCurves& curves);

// Interior strict discrete local minima of a sampled curve.
std::vector<double> local_minima(const std::vector<double>& t, const std::vector<double>& f);

struct LevelsetGrid {
  double half_width = 1.0;
  int steps = 21;
};

// Rows (x1, x2, x3, k_q) over a cube grid, partition (2, 1); the origin is skipped.
struct LevelsetResult {
  std::vector<std::array<double, 4>> rows;
  int skipped = 0;
};
LevelsetResult levelset(Order q, const LevelsetGrid& grid);
void write_levelset_csv(const std::string& path, const LevelsetResult& result);

Order parse_order(const std::string& text);
Order parse_order(const nlohmann::json& value);
nlohmann::json order_json(Order q);

nlohmann::json to_json(const BcmsvEstimate& est);
nlohmann::json to_json(const NspVerdict& verdict);
nlohmann::json to_json(const BoundReport& report);

}  // namespace bqr
