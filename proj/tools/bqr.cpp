#include "bqr/analysis.hpp"
#include "bqr/ccp.hpp"
#include "bqr/gen.hpp"
#include "bqr/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kRuntimeError = 1;
constexpr int kConfigError = 2;
constexpr int kCheckFailed = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int jobs = 1;
  bool normalize_columns = false;
  bool check = false;
  bool no_timing = false;
};

struct MatrixSource {
  std::string matrix_path;
  bool toy = false;
  int d = 1;
  std::vector<int> dims;
};

std::string path_in(const Globals& g, const std::string& name) {
  fs::create_directories(g.out);
  return (fs::path(g.out) / name).string();
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

bqr::ExperimentConfig config_from(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  bqr::ExperimentConfig cfg;
  try {
    cfg = bqr::load_config(g.config);
  } catch (const std::exception& e) {
    throw ConfigError(g.config + ": " + e.what());
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.normalize_columns) cfg.normalize_columns = true;
  return cfg;
}

std::pair<bqr::Matrix, bqr::BlockPartition> load_matrix(const Globals& g, const MatrixSource& src) {
  if (src.toy) {
    const bqr::ToyProblem toy = bqr::toy_problem();
    return {toy.A, toy.partition};
  }
  if (!src.matrix_path.empty()) {
    bqr::Matrix A = bqr::read_matrix_csv(src.matrix_path);
    bqr::BlockPartition p = src.dims.empty()
                                ? bqr::BlockPartition::uniform(static_cast<int>(A.cols()), src.d)
                                : bqr::BlockPartition(src.dims);
    return {std::move(A), std::move(p)};
  }
  if (!g.config.empty()) {
    const bqr::ExperimentConfig cfg = config_from(g);
    bqr::Instance inst = bqr::make_instance(cfg, cfg.m_values.front(), cfg.k_values.front(), cfg.trial);
    return {std::move(inst.A), inst.partition};
  }
  throw ConfigError("give a matrix with --matrix, --toy or --config");
}

void add_matrix_source(CLI::App* cmd, MatrixSource& src) {
  cmd->add_option("--matrix", src.matrix_path, "Matrix CSV (row-major)");
  cmd->add_flag("--toy", src.toy, "Use the 5x6 toy matrix");
  cmd->add_option("--d", src.d, "Uniform block length for --matrix");
  cmd->add_option("--dims", src.dims, "Explicit block lengths for --matrix");
}

int cmd_recover(const Globals& g) {
  const bqr::ExperimentConfig cfg = config_from(g);
  const int m = cfg.m_values.front();
  const int k = cfg.k_values.front();
  const bqr::Instance inst = bqr::make_instance(cfg, m, k, cfg.trial);
  const bqr::Problem problem{inst.A, inst.y, inst.partition, inst.noise};

  bqr::write_matrix_csv(path_in(g, "A.csv"), inst.A);
  bqr::write_matrix_csv(path_in(g, "x_true.csv"), inst.x);
  bqr::write_matrix_csv(path_in(g, "y.csv"), inst.y);

  json report = {{"m", m},
                 {"N", cfg.n},
                 {"k", k},
                 {"trial", cfg.trial},
                 {"seed", inst.seed},
                 {"matrix", cfg.matrix},
                 {"normalize_columns", cfg.normalize_columns},
                 {"noise", {{"kind", bqr::to_string(inst.noise.kind)}, {"level", inst.noise.level}}},
                 {"threshold", cfg.threshold},
                 {"runs", json::array()}};
  if (cfg.matrix == "dct") {
    report["oversampling"] = cfg.oversampling;
    report["hadamard"] = "sylvester";
  }
  bool all_ok = true;
  for (const bqr::MethodSpec& method : cfg.methods) {
    json run = {{"method", method.name()}, {"param", method.param_field()}};
    try {
      const bqr::MethodOutcome out = bqr::run_method(method, problem);
      const double err = bqr::relative_error(out.x, inst.x);
      const bool success = std::isfinite(err) && err <= cfg.threshold;
      all_ok = all_ok && success;
      const std::string file = "xhat_" + method.name() +
                               (method.param_field().empty() ? "" : "_" + method.param_field()) +
                               ".csv";
      bqr::write_matrix_csv(path_in(g, file), out.x);
      run["rel_err"] = err;
      run["success"] = success;
      run["iters"] = out.iterations;
      run["status"] = out.status;
      run["violation"] = out.violation;
      run["signal"] = file;
    } catch (const std::exception& e) {
      all_ok = false;
      run["status"] = std::string("error: ") + e.what();
      run["success"] = false;
    }
    report["runs"].push_back(run);
  }
  write_json(path_in(g, "recover.json"), report);
  std::cout << report.dump(2) << '\n';
  return g.check && !all_ok ? kCheckFailed : 0;
}

int cmd_sweep(const Globals& g) {
  const bqr::ExperimentConfig cfg = config_from(g);
  const bqr::SweepResult res = bqr::run_sweep(cfg, g.jobs, !g.no_timing);
  bqr::write_trials_csv(path_in(g, "trials.csv"), res.trials);
  bqr::write_summary_csv(path_in(g, "summary.csv"), res.summary);
  for (const auto& row : res.summary) {
    std::cout << row.method << (row.param.empty() ? "" : ":" + row.param) << " m=" << row.m
              << " k=" << row.k << " rate=" << bqr::format_number(row.rate) << " (" << row.successes
              << "/" << row.trials << ")\n";
  }
  if (!g.check) return 0;
  const bqr::CheckOutcome outcome = bqr::evaluate_checks(cfg.checks, res.summary);
  for (const auto& line : outcome.lines) std::cout << line << '\n';
  return outcome.passed ? 0 : kCheckFailed;
}

int cmd_toy(const Globals& g) {
  const bqr::ToyCurves curves = bqr::toy_curves();
  bqr::write_toy_curves(path_in(g, "toy_curves.csv"), curves);

  json minima;
  for (std::size_t c = 0; c < curves.columns.size(); ++c) {
    minima[curves.columns[c]] = bqr::local_minima(curves.t, curves.values[c]);
  }

  const bqr::ToyProblem toy = bqr::toy_problem();
  bqr::CcpOptions opts;
  opts.q = 2.0;
  const bqr::RecoveryResult r =
      bqr::ccp_recover({toy.A, toy.y, toy.partition, bqr::NoiseModel::none()}, opts);
  const bqr::Vector target = toy.line_point(0.0);
  const double err = bqr::relative_error(r.x, target);
  auto as_list = [](const bqr::Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

  json report = {{"ccp",
                  {{"q", 2},
                   {"x", as_list(r.x)},
                   {"initial", as_list(r.initial)},
                   {"status", bqr::to_string(r.status)},
                   {"outer_iterations", r.iterations},
                   {"trace", r.trace},
                   {"rel_err_to_t0", err}}},
                 {"local_minima", minima}};
  write_json(path_in(g, "toy.json"), report);
  std::cout << report.dump(2) << '\n';
  if (!g.check) return 0;

  auto near = [](const json& found, std::vector<double> expected) {
    std::vector<double> got = found.get<std::vector<double>>();
    if (got.size() != expected.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (std::abs(got[i] - expected[i]) > 0.005) return false;
    }
    return true;
  };
  bool ok = true;
  auto report_check = [&](bool passed, const std::string& what) {
    std::cout << (passed ? "PASS " : "FAIL ") << what << '\n';
    ok = ok && passed;
  };
  report_check(err <= 1e-3, "ccp q=2 rel_err=" + bqr::format_number(err) + " <= 0.001");
  for (const char* col : {"kq_1.5", "kq_2", "kq_inf"}) {
    report_check(near(minima[col], {0.0, 10.0}), std::string(col) + " minima " + minima[col].dump() + " near [0,10]");
  }
  report_check(near(minima["kq_0.5"], {0.0, 9.0, 10.0}),
               "kq_0.5 minima " + minima["kq_0.5"].dump() + " near [0,9,10]");
  return ok ? 0 : kCheckFailed;
}

int cmd_levelset(const Globals& g, const std::string& q_text, const bqr::LevelsetGrid& grid) {
  const bqr::Order q = bqr::parse_order(q_text);
  const bqr::LevelsetResult res = bqr::levelset(q, grid);
  const std::string file = "levelset_q" + q_text + ".csv";
  bqr::write_levelset_csv(path_in(g, file), res);
  std::cout << res.rows.size() << " points written to " << file;
  if (res.skipped > 0) std::cout << " (origin skipped)";
  std::cout << '\n';
  return 0;
}

int cmd_bcmsv(const Globals& g, const MatrixSource& src, const std::string& q_text, double s,
              int starts, const std::string& method, int samples) {
  const auto [A, p] = load_matrix(g, src);
  const bqr::Order q = bqr::parse_order(q_text);
  const std::uint64_t seed = g.seed.value_or(1);
  bqr::BcmsvEstimate est;
  if (method == "brute") {
    est = bqr::bcmsv_brute_force(A, p, q, s, samples, seed);
  } else {
    bqr::BcmsvOptions opts;
    opts.threads = g.jobs;
    est = bqr::estimate_bcmsv(A, p, q, s, starts, seed, opts);
  }
  const json j = bqr::to_json(est);
  write_json(path_in(g, "bcmsv.json"), j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_nsp(const Globals& g, const MatrixSource& src, const std::string& q_text, double k,
            int samples) {
  const auto [A, p] = load_matrix(g, src);
  const bqr::NspVerdict v =
      bqr::check_nsp_sufficient(A, p, bqr::parse_order(q_text), k, samples, g.seed.value_or(1));
  json j = bqr::to_json(v);
  j["k"] = k;
  j["q"] = bqr::order_json(bqr::parse_order(q_text));
  write_json(path_in(g, "nsp.json"), j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_bounds(const Globals& g, const std::string& theorem, const std::string& q_text,
               const std::string& noise, bqr::BoundInputs in, double beta_threshold) {
  in.q = bqr::parse_order(q_text);
  in.noise = bqr::noise_kind_from_string(noise);
  if (beta_threshold > 0.0) in.beta_threshold = beta_threshold;
  const bqr::BoundReport r = bqr::theorem_bounds(bqr::theorem_from_string(theorem), in);
  const json j = bqr::to_json(r);
  write_json(path_in(g, "bounds.json"), j);
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-sparse recovery by q-ratio sparsity minimization"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--normalize-columns", g.normalize_columns, "Unit-norm Gaussian columns");
  app.add_flag("--check", g.check, "Exit nonzero when gated checks fail");
  app.add_flag("--no-timing", g.no_timing, "Write wall_ms as 0 for reproducible trial files");

  auto* recover = app.add_subcommand("recover", "Recover one generated instance");
  auto* sweep = app.add_subcommand("sweep", "Success-rate sweep over m/k grids");
  auto* toy = app.add_subcommand("toy", "Toy-example curves and CCP run");

  auto* levelset_cmd = app.add_subcommand("levelset", "k_q over a grid in R^3, blocks (2, 1)");
  std::string level_q = "2";
  bqr::LevelsetGrid grid;
  levelset_cmd->add_option("--q", level_q, "Order q (number or inf)");
  levelset_cmd->add_option("--half-width", grid.half_width, "Grid spans [-w, w]^3");
  levelset_cmd->add_option("--steps", grid.steps, "Points per axis");

  MatrixSource src;
  auto* bcmsv = app.add_subcommand("bcmsv", "Estimate the q-ratio block CMSV");
  add_matrix_source(bcmsv, src);
  std::string bq = "2", bmethod = "multistart";
  double bs = 1.0;
  int bstarts = 64, bsamples = 100000;
  bcmsv->add_option("--q", bq, "Order q (number or inf)");
  bcmsv->add_option("--s", bs, "Sparsity level s in [1, M]");
  bcmsv->add_option("--starts", bstarts, "Random starts");
  bcmsv->add_option("--method", bmethod, "multistart|brute")
      ->check(CLI::IsMember({"multistart", "brute"}));
  bcmsv->add_option("--samples", bsamples, "Samples for --method brute");

  auto* nsp = app.add_subcommand("nsp", "Null-space sufficient condition");
  add_matrix_source(nsp, src);
  std::string nq = "2";
  double nk = 1.0;
  int nsamples = 256;
  nsp->add_option("--q", nq, "Order q (number or inf)");
  nsp->add_option("--k", nk, "Sparsity k");
  nsp->add_option("--samples", nsamples, "Kernel samples");

  auto* bounds = app.add_subcommand("bounds", "Evaluate recovery error bounds");
  std::string theorem = "T1", tq = "2", tnoise = "l2";
  bqr::BoundInputs in;
  double beta_threshold = 0.0;
  bounds->add_option("--theorem", theorem, "T1|T2|T3|T4");
  bounds->add_option("--q", tq, "Order q (number or inf)");
  bounds->add_option("--k", in.k, "Sparsity k");
  bounds->add_option("--noise", tnoise, "l2|l2inf (T1, T2)");
  bounds->add_option("--level", in.noise_level, "eta or mu (T1, T2)");
  bounds->add_option("--lambda", in.lambda, "Regularization (T3, T4)");
  bounds->add_option("--kappa", in.kappa, "kappa in (0, 1) (T3, T4)");
  bounds->add_option("--beta", in.beta, "BCMSV at the required level");
  bounds->add_option("--beta-threshold", beta_threshold, "BCMSV for the T4 lambda threshold");
  bounds->add_option("--matrix-norm", in.matrix_norm, "||A||_2 (T3, T4)");
  bounds->add_option("--signal-ratio", in.signal_ratio, "k_q(x) (T2, T4)");
  bounds->add_option("--tail", in.tail, "||x - x^k||_{2,1} (T2, T4)");
  bounds->add_option("--noise-norm", in.noise_norm, "||e||_2 (T3, T4)");
  bounds->add_option("--correlation", in.correlation, "||A^T e||_{2,inf} (T3, T4)");
  bounds->add_option("--y-norm", in.measurement_norm, "||y||_2 (T3, T4)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*recover) return cmd_recover(g);
    if (*sweep) return cmd_sweep(g);
    if (*toy) return cmd_toy(g);
    if (*levelset_cmd) return cmd_levelset(g, level_q, grid);
    if (*bcmsv) return cmd_bcmsv(g, src, bq, bs, bstarts, bmethod, bsamples);
    if (*nsp) return cmd_nsp(g, src, nq, nk, nsamples);
    if (*bounds) return cmd_bounds(g, theorem, tq, tnoise, in, beta_threshold);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
