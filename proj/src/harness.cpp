#include "bqr/harness.hpp"

#include "bqr/baselines.hpp"
#include "bqr/ccp.hpp"
#include "bqr/gen.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

namespace bqr {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Orders and methods

Order parse_order(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "Inf") return Order::infinity();
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument("bad number '" + text + "'");
  if (std::isinf(v)) return Order::infinity();
  return Order(v);
}

Order parse_order(const json& value) {
  if (value.is_string()) return parse_order(value.get<std::string>());
  if (value.is_number()) return Order(value.get<double>());
  throw std::invalid_argument("expected a number or \"inf\"");
}

json order_json(Order q) {
  if (q.is_infinite()) return "inf";
  return q.value();
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string MethodSpec::name() const {
  switch (kind) {
    case MethodKind::Ccp: return "ccp";
    case MethodKind::BlockBp: return "bbp";
    case MethodKind::GroupLasso: return "group_lasso";
    case MethodKind::L2Lp: return "l2lp";
    case MethodKind::L1m2: return "l1m2";
  }
  return "unknown";
}

std::string MethodSpec::param_field() const {
  if (kind == MethodKind::BlockBp || kind == MethodKind::L1m2) return "";
  return param.is_infinite() ? "inf" : format_number(param.value());
}

std::string MethodSpec::label() const {
  const std::string p = param_field();
  return p.empty() ? name() : name() + ":" + p;
}

namespace {

MethodSpec make_method(const std::string& name, std::optional<Order> param) {
  MethodSpec m;
  if (name == "ccp") {
    m.kind = MethodKind::Ccp;
    m.param = param.value_or(Order(2.0));
    if (!m.param.is_infinite() && !(m.param.value() > 1.0)) {
      throw std::invalid_argument("ccp needs q > 1");
    }
  } else if (name == "bbp") {
    m.kind = MethodKind::BlockBp;
  } else if (name == "group_lasso") {
    m.kind = MethodKind::GroupLasso;
    m.param = param.value_or(Order(1e-4));
    if (m.param.is_infinite() || !(m.param.value() > 0.0)) {
      throw std::invalid_argument("group_lasso needs a positive lambda factor");
    }
  } else if (name == "l2lp") {
    m.kind = MethodKind::L2Lp;
    m.param = param.value_or(Order(0.5));
    if (m.param.is_infinite() || !(m.param.value() > 0.0 && m.param.value() < 1.0)) {
      throw std::invalid_argument("l2lp needs p in (0, 1)");
    }
  } else if (name == "l1m2") {
    m.kind = MethodKind::L1m2;
  } else {
    throw std::invalid_argument("unknown method '" + name +
                                "' (expected ccp|bbp|group_lasso|l2lp|l1m2)");
  }
  return m;
}

}  // namespace

MethodSpec parse_method(const json& spec) {
  if (spec.is_string()) return parse_method(spec.get<std::string>());
  const std::string name = spec.at("name").get<std::string>();
  std::optional<Order> param;
  for (const char* key : {"q", "p", "lambda_factor"}) {
    if (spec.contains(key)) param = parse_order(spec.at(key));
  }
  return make_method(name, param);
}

MethodSpec parse_method(const std::string& label) {
  const auto colon = label.find(':');
  if (colon == std::string::npos) return make_method(label, std::nullopt);
  return make_method(label.substr(0, colon), parse_order(label.substr(colon + 1)));
}

// ---------------------------------------------------------------------------
// Configuration

BlockPartition ExperimentConfig::partition() const {
  if (!dims.empty()) return BlockPartition(dims);
  return BlockPartition::uniform(n, d);
}

namespace {

std::vector<int> int_list(const json& v) {
  if (v.is_array()) return v.get<std::vector<int>>();
  return {v.get<int>()};
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("methods")) {
    for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_method(m));
  } else if (j.contains("method")) {
    cfg.methods.push_back(parse_method(j.at("method")));
  } else {
    cfg.methods.push_back(make_method("ccp", Order(2.0)));
  }
  if (cfg.methods.empty()) throw std::invalid_argument("config lists no methods");

  if (j.contains("matrix")) {
    const json& mj = j.at("matrix");
    if (mj.is_string()) {
      cfg.matrix = mj.get<std::string>();
    } else {
      cfg.matrix = mj.value("type", "gaussian");
      cfg.oversampling = mj.value("F", cfg.oversampling);
      cfg.normalize_columns = mj.value("normalize_columns", false);
    }
  }
  if (cfg.matrix != "gaussian" && cfg.matrix != "dct") {
    throw std::invalid_argument("matrix type must be gaussian or dct");
  }
  cfg.normalize_columns = j.value("normalize_columns", cfg.normalize_columns);

  cfg.m_values = int_list(j.at("m"));
  if (j.contains("dims")) {
    cfg.dims = j.at("dims").get<std::vector<int>>();
    cfg.n = 0;
    for (int dj : cfg.dims) cfg.n += dj;
    cfg.d = cfg.dims.empty() ? 0 : cfg.dims.front();
  } else {
    cfg.n = j.at("N").get<int>();
    cfg.d = j.value("d", 1);
  }
  cfg.k_values = int_list(j.at("k"));

  if (j.contains("noise")) {
    const json& nj = j.at("noise");
    cfg.noise.kind = noise_kind_from_string(nj.value("kind", "none"));
    cfg.noise.level = nj.value("level", 0.0);
  }
  cfg.trials = j.value("trials", 1);
  cfg.threshold = j.value("threshold", 1e-3);
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.trial = j.value("trial", 0);
  if (j.contains("checks")) {
    for (const json& c : j.at("checks")) {
      OrderingCheck check;
      check.better = parse_method(c.at("better")).label();
      check.worse = parse_method(c.at("worse")).label();
      check.margin = c.value("margin", 0.05);
      cfg.checks.push_back(check);
    }
  }

  // Validation.
  const BlockPartition p = cfg.partition();
  if (cfg.trials < 1) throw std::invalid_argument("trials must be at least 1");
  if (!(cfg.threshold > 0.0)) throw std::invalid_argument("threshold must be positive");
  if (cfg.m_values.empty() || cfg.k_values.empty()) throw std::invalid_argument("empty m or k grid");
  for (int m : cfg.m_values) {
    if (m < 1) throw std::invalid_argument("m must be positive");
    if (cfg.matrix == "dct" && (!p.is_uniform() || m % cfg.d != 0 || cfg.n % cfg.d != 0)) {
      throw std::invalid_argument("dct matrices need uniform blocks with d dividing m and N");
    }
  }
  for (int k : cfg.k_values) {
    if (k < 0 || k > p.num_blocks()) throw std::invalid_argument("k out of range [0, M]");
  }
  if (cfg.noise.kind != NoiseKind::None && !(cfg.noise.level > 0.0)) {
    throw std::invalid_argument("noisy configs need a positive noise level");
  }
  if (cfg.noise.kind == NoiseKind::None && cfg.noise.level != 0.0) {
    throw std::invalid_argument("noise level given without a noise kind");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse_config(json::parse(in));
}

// ---------------------------------------------------------------------------
// Instances and methods

Instance make_instance(const ExperimentConfig& cfg, int m, int k, int trial) {
  const std::string label = cfg.matrix + ":m=" + std::to_string(m) + ":N=" + std::to_string(cfg.n) +
                            ":d=" + std::to_string(cfg.d) + ":k=" + std::to_string(k);
  Rng rng(cfg.seed, label, static_cast<std::uint64_t>(trial));
  Instance inst;
  inst.partition = cfg.partition();
  inst.seed = stream_seed(cfg.seed, label, static_cast<std::uint64_t>(trial));
  if (cfg.matrix == "dct") {
    inst.A = block_coherent_dct(m, cfg.n, cfg.d, cfg.oversampling, rng);
  } else {
    inst.A = gaussian_matrix(m, cfg.n, rng, cfg.normalize_columns);
  }
  inst.x = block_sparse_signal(inst.partition, k, rng);
  inst.y = inst.A * inst.x;
  inst.noise = cfg.noise;
  if (cfg.noise.kind != NoiseKind::None) {
    inst.y += bounded_noise(cfg.noise.kind, cfg.noise.level, inst.A, inst.partition, rng);
  }
  return inst;
}

MethodOutcome run_method(const MethodSpec& method, const Problem& problem) {
  MethodOutcome out;
  switch (method.kind) {
    case MethodKind::Ccp: {
      CcpOptions opts;
      opts.q = method.param;
      const RecoveryResult r = ccp_recover(problem, opts);
      out.x = r.x;
      out.iterations = r.iterations;
      out.status = to_string(r.status);
      break;
    }
    case MethodKind::BlockBp: {
      BlockBpSolver solver(problem.A, problem.y, problem.partition, problem.noise);
      const BpSolution sol = solver.solve();
      out.x = sol.z;
      out.iterations = sol.report.iterations;
      out.status = to_string(sol.report.status);
      break;
    }
    case MethodKind::GroupLasso: {
      const double scale =
          problem.partition.block_norms(problem.A.transpose() * problem.y).maxCoeff();
      const double lambda = method.param.value() * scale;
      if (!(lambda > 0.0)) {
        out.x = Vector::Zero(problem.partition.size());
        out.status = "converged";
        return out;
      }
      const BaselineResult r = group_lasso(problem.A, problem.y, problem.partition, lambda);
      out.x = r.z;
      out.iterations = r.iterations;
      out.status = r.converged ? "converged" : "max_iterations";
      out.violation = r.residual;
      return out;
    }
    case MethodKind::L2Lp: {
      const BaselineResult r = l2lp_recover(problem, method.param.value());
      out.x = r.z;
      out.iterations = r.iterations;
      out.status = r.converged ? "converged" : "subproblem_failure";
      break;
    }
    case MethodKind::L1m2: {
      const BaselineResult r = l2_l1m2_recover(problem);
      out.x = r.z;
      out.iterations = r.iterations;
      out.status = r.converged ? "converged" : "max_iterations";
      break;
    }
  }
  out.violation =
      measurement_violation(problem.A, problem.y, problem.partition, problem.noise, out.x);
  return out;
}

double relative_error(const ConstVectorRef& estimate, const ConstVectorRef& truth) {
  const double nt = truth.norm();
  const double diff = (estimate - truth).norm();
  return nt > 0.0 ? diff / nt : diff;
}

// ---------------------------------------------------------------------------
// Sweeps

SweepResult run_sweep(const ExperimentConfig& cfg, int jobs, bool timing) {
  struct Task {
    int m, k, trial;
  };
  std::vector<Task> tasks;
  for (int m : cfg.m_values)
    for (int k : cfg.k_values)
      for (int t = 0; t < cfg.trials; ++t) tasks.push_back({m, k, t});

  const std::size_t nm = cfg.methods.size();
  std::vector<TrialRecord> records(tasks.size() * nm);
  const BlockPartition p = cfg.partition();
  const int d_field = p.is_uniform() ? p.dim(0) : 0;

  auto run_task = [&](std::size_t i) {
    const Task& task = tasks[i];
    std::optional<Instance> inst;
    std::string instance_error;
    try {
      inst = make_instance(cfg, task.m, task.k, task.trial);
    } catch (const std::exception& e) {
      instance_error = e.what();
    }
    for (std::size_t j = 0; j < nm; ++j) {
      const MethodSpec& method = cfg.methods[j];
      TrialRecord& rec = records[i * nm + j];
      rec.method = method.name();
      rec.param = method.param_field();
      rec.m = task.m;
      rec.n = cfg.n;
      rec.d = d_field;
      rec.k = task.k;
      rec.trial = task.trial;
      rec.rel_err = std::numeric_limits<double>::quiet_NaN();
      if (!inst) {
        rec.status = "error: " + instance_error;
        continue;
      }
      rec.seed = inst->seed;
      const auto start = std::chrono::steady_clock::now();
      try {
        const MethodOutcome out =
            run_method(method, Problem{inst->A, inst->y, inst->partition, inst->noise});
        rec.rel_err = relative_error(out.x, inst->x);
        rec.iterations = out.iterations;
        rec.status = out.status;
        rec.success = std::isfinite(rec.rel_err) && rec.rel_err <= cfg.threshold;
        if (!std::isfinite(rec.rel_err)) rec.rel_err = std::numeric_limits<double>::quiet_NaN();
      } catch (const std::exception& e) {
        rec.status = std::string("error: ") + e.what();
      }
      if (timing) {
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                start)
                          .count();
      }
    }
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Reorder to (m, k, method, trial).
  SweepResult result;
  result.trials.reserve(records.size());
  std::size_t base = 0;
  for (std::size_t g = 0; g < cfg.m_values.size() * cfg.k_values.size(); ++g) {
    for (std::size_t j = 0; j < nm; ++j) {
      for (int t = 0; t < cfg.trials; ++t) {
        result.trials.push_back(records[(base + static_cast<std::size_t>(t)) * nm + j]);
      }
    }
    base += static_cast<std::size_t>(cfg.trials);
  }
  result.summary = summarize(result.trials);
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& trials) {
  std::vector<SummaryRow> rows;
  std::map<std::tuple<std::string, std::string, int, int, int, int>, std::size_t> index;
  for (const TrialRecord& r : trials) {
    const auto key = std::make_tuple(r.method, r.param, r.m, r.n, r.d, r.k);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, rows.size()).first;
      rows.push_back({r.method, r.param, r.m, r.n, r.d, r.k, 0, 0, 0.0});
    }
    SummaryRow& row = rows[it->second];
    row.trials += 1;
    row.successes += r.success ? 1 : 0;
  }
  for (SummaryRow& row : rows) row.rate = static_cast<double>(row.successes) / row.trials;
  return rows;
}

CheckOutcome evaluate_checks(const std::vector<OrderingCheck>& checks,
                             const std::vector<SummaryRow>& summary) {
  CheckOutcome out;
  auto label = [](const SummaryRow& r) { return r.param.empty() ? r.method : r.method + ":" + r.param; };
  for (const OrderingCheck& c : checks) {
    bool found = false;
    for (const SummaryRow& b : summary) {
      if (label(b) != c.better) continue;
      for (const SummaryRow& w : summary) {
        if (label(w) != c.worse || w.m != b.m || w.k != b.k) continue;
        found = true;
        const bool ok = b.rate >= w.rate - c.margin;
        out.passed = out.passed && ok;
        out.lines.push_back(std::string(ok ? "PASS" : "FAIL") + " m=" + std::to_string(b.m) +
                            " k=" + std::to_string(b.k) + " rate(" + c.better +
                            ")=" + format_number(b.rate) + " >= rate(" + c.worse +
                            ")=" + format_number(w.rate) + " - " + format_number(c.margin));
      }
    }
    if (!found) {
      out.passed = false;
      out.lines.push_back("FAIL no grid point compares " + c.better + " with " + c.worse);
    }
  }
  return out;
}

const char* const kTrialHeader = "method,q,m,N,d,k,trial,seed,rel_err,success,iters,wall_ms";
const char* const kSummaryHeader = "method,q,m,N,d,k,trials,successes,rate";

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

void write_trials_csv(const std::string& path, const std::vector<TrialRecord>& rows) {
  std::ofstream out = open_output(path);
  out << kTrialHeader << '\n';
  for (const TrialRecord& r : rows) {
    out << r.method << ',' << r.param << ',' << r.m << ',' << r.n << ',' << r.d << ',' << r.k
        << ',' << r.trial << ',' << r.seed << ',' << format_number(r.rel_err) << ','
        << (r.success ? 1 : 0) << ',' << r.iterations << ',' << fixed3(r.wall_ms) << '\n';
  }
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out = open_output(path);
  out << kSummaryHeader << '\n';
  for (const SummaryRow& r : rows) {
    out << r.method << ',' << r.param << ',' << r.m << ',' << r.n << ',' << r.d << ',' << r.k
        << ',' << r.trials << ',' << r.successes << ',' << format_number(r.rate) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Toy example

Vector ToyProblem::line_point(double t) const {
  Vector z(6);
  z << t, t, t, 20.0 - 2.0 * t, 40.0 - 4.0 * t, 2.0 * (t - 9.0);
  return z;
}

Vector ToyProblem::kernel() const {
  Vector h(6);
  h << 1, 1, 1, -2, -4, 2;
  return h;
}

ToyProblem toy_problem() {
  ToyProblem toy;
  toy.A.resize(5, 6);
  toy.A << 1, -1, 0, 0, 0, 0,
           1, 0, -1, 0, 0, 0,
           0, 1, 1, 1, 0, 0,
           2, 2, 0, 0, 1, 0,
           1, 1, 0, 0, 0, -1;
  toy.y.resize(5);
  toy.y << 0, 0, 20, 40, 18;
  toy.partition = BlockPartition({1, 1, 1, 2, 1});
  return toy;
}

ToyCurves toy_curves() {
  const ToyProblem toy = toy_problem();
  const BlockPartition& p = toy.partition;
  ToyCurves c;
  c.columns = {"l21", "l2_half", "l21_minus_l2", "kq_0.5", "kq_1.5", "kq_2", "kq_inf"};
  c.values.assign(c.columns.size(), {});
  for (int i = 0; i <= 1200; ++i) {
    const double t = (i - 100) / 100.0;
    const Vector z = toy.line_point(t);
    const Vector norms = p.block_norms(z);
    c.t.push_back(t);
    c.values[0].push_back(norms.sum());
    c.values[1].push_back(norms.array().sqrt().sum());
    c.values[2].push_back(norms.sum() - z.norm());
    c.values[3].push_back(q_ratio_from_block_norms(norms, 0.5));
    c.values[4].push_back(q_ratio_from_block_norms(norms, 1.5));
    c.values[5].push_back(q_ratio_from_block_norms(norms, 2.0));
    c.values[6].push_back(q_ratio_from_block_norms(norms, Order::infinity()));
  }
  return c;
}

void write_toy_curves(const std::string& path, const ToyCurves& curves) {
  std::ofstream out = open_output(path);
  out << 't';
  for (const auto& name : curves.columns) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < curves.t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f", curves.t[i]);
    out << buf;
    for (const auto& col : curves.values) out << ',' << format_number(col[i]);
    out << '\n';
  }
}

std::vector<double> local_minima(const std::vector<double>& t, const std::vector<double>& f) {
  if (t.size() != f.size()) throw std::invalid_argument("curve length mismatch");
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < f.size(); ++i) {
    if (f[i] < f[i - 1] && f[i] < f[i + 1]) out.push_back(t[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Level sets

LevelsetResult levelset(Order q, const LevelsetGrid& grid) {
  if (grid.steps < 2 || !(grid.half_width > 0.0)) throw std::invalid_argument("bad level-set grid");
  const BlockPartition p({2, 1});
  LevelsetResult res;
  Vector x(3);
  for (int a = 0; a < grid.steps; ++a) {
    for (int b = 0; b < grid.steps; ++b) {
      for (int c = 0; c < grid.steps; ++c) {
        auto coord = [&](int i) {
          return -grid.half_width + 2.0 * grid.half_width * i / (grid.steps - 1);
        };
        x << coord(a), coord(b), coord(c);
        if (x.norm() == 0.0) {
          ++res.skipped;
          continue;
        }
        res.rows.push_back({x[0], x[1], x[2], q_ratio_sparsity(p, x, q)});
      }
    }
  }
  return res;
}

void write_levelset_csv(const std::string& path, const LevelsetResult& result) {
  std::ofstream out = open_output(path);
  out << "x1,x2,x3,kq\n";
  for (const auto& r : result.rows) {
    out << format_number(r[0]) << ',' << format_number(r[1]) << ',' << format_number(r[2]) << ','
        << format_number(r[3]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON reports

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

}  // namespace

json to_json(const BcmsvEstimate& est) {
  return {{"q", order_json(est.q)},       {"s", est.s},
          {"beta", est.beta},             {"witness", vector_json(est.witness)},
          {"method", to_string(est.method)}, {"starts", est.starts}};
}

json to_json(const NspVerdict& verdict) {
  json j = {{"status", to_string(verdict.status)},
            {"estimate", finite_or_string(verdict.estimate)},
            {"kernel_dimension", verdict.kernel_dimension}};
  if (verdict.witness.size() > 0) j["witness"] = vector_json(verdict.witness);
  return j;
}

json to_json(const BoundReport& r) {
  const BoundInputs& in = r.inputs;
  json inputs = {{"k", in.k},
                 {"q", order_json(in.q)},
                 {"beta", in.beta},
                 {"matrix_norm", in.matrix_norm},
                 {"signal_ratio", in.signal_ratio},
                 {"tail", in.tail}};
  if (r.id == Theorem::T1 || r.id == Theorem::T2) {
    inputs["noise"] = to_string(in.noise);
    inputs["noise_level"] = in.noise_level;
  } else {
    inputs["lambda"] = in.lambda;
    inputs["kappa"] = in.kappa;
    inputs["noise_norm"] = in.noise_norm;
    inputs["correlation"] = in.correlation;
    inputs["measurement_norm"] = in.measurement_norm;
    if (in.beta_threshold) inputs["beta_threshold"] = *in.beta_threshold;
  }
  json j = {{"theorem", to_string(r.id)},
            {"inputs", inputs},
            {"level", r.level},
            {"bound_l2q", r.bound_l2q},
            {"bound_l21", r.bound_l21}};
  if (r.lambda_threshold) j["lambda_threshold"] = *r.lambda_threshold;
  if (r.lambda_valid) j["lambda_valid"] = *r.lambda_valid;
  return j;
}

}  // namespace bqr
