#include "rot/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>

#include "rot/coloc.hpp"
#include "rot/inference.hpp"
#include "rot/io.hpp"
#include "rot/parallel.hpp"
#include "rot/sensitivity.hpp"
#include "rot/solver.hpp"

namespace rot::cli {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// Every flag of every subcommand lives here; each subcommand binds a subset.
// Zero means "unset" for lambda, lambda0, delta, n, m and resample.
struct Settings {
  std::string cost;
  Index grid = 0;
  double extent = 1.0;
  std::string metric = "euclidean";
  double p = 1.0;
  std::string r;
  std::string s;
  double lambda = 0.0;
  double lambda0 = 0.0;
  std::string reg = "entropy";
  double tol = 1e-9;
  Index max_iter = 100000;
  bool renormalize = false;

  std::string mode = "one";
  double delta = 0.0;
  Index n = 0;
  Index m = 0;
  bool gradient = false;
  bool covariance = false;

  std::string data;
  std::string data2;
  double alpha = 0.05;
  Index bootstrap_replicates = 500;

  std::string img_a;
  std::string img_b;
  double pixel_size = 1.0;
  Index resample = 0;
  std::string band = "bootstrap";
  Index draws = 2000;

  std::string config;
  std::string out = ".";
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

// Binding between a flag, its JSON key and a Settings field.
struct Field {
  std::string key;
  std::function<json()> get;
  std::function<void(const json&)> set;
};

class Binder {
 public:
  explicit Binder(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* option(const std::string& flag, T& target, const std::string& help) {
    add_field(flag, target);
    if constexpr (std::is_same_v<T, bool>) {
      return app_->add_flag(flag, target, help);
    } else {
      return app_->add_option(flag, target, help)->capture_default_str();
    }
  }

  /// Flags that affect outputs are recorded in the manifest; --config,
  /// --out and --threads are not part of the resolved configuration.
  template <typename T>
  CLI::Option* plumbing(const std::string& flag, T& target, const std::string& help) {
    return app_->add_option(flag, target, help);
  }

  const std::vector<Field>& fields() const noexcept { return fields_; }
  CLI::App* app() const noexcept { return app_; }

 private:
  template <typename T>
  void add_field(const std::string& flag, T& target) {
    std::string key = flag.substr(flag.find_first_not_of('-'));
    std::replace(key.begin(), key.end(), '-', '_');
    fields_.push_back({key, [&target] { return json(target); },
                       [&target, key](const json& j) {
                         try {
                           target = j.get<T>();
                         } catch (const json::exception&) {
                           throw ConfigError("config key '" + key + "' has the wrong type");
                         }
                       }});
  }

  CLI::App* app_;
  std::vector<Field> fields_;
};

json resolved_config(const Binder& binder) {
  json out = json::object();
  for (const Field& f : binder.fields()) out[f.key] = f.get();
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    json j = json::parse(in);
    // A manifest from an earlier run replays its resolved configuration.
    if (j.is_object() && j.contains("subcommand") && j.contains("config")) return j["config"];
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void apply_config(const Binder& binder, const json& config) {
  if (!config.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : config.items()) {
    const auto it = std::find_if(binder.fields().begin(), binder.fields().end(),
                                 [&](const Field& f) { return f.key == key; });
    if (it == binder.fields().end()) throw ConfigError("unknown config key '" + key + "'");
    it->set(value);
  }
}

class RunContext {
 public:
  RunContext(std::string subcommand, const Settings& settings)
      : subcommand_(std::move(subcommand)),
        settings_(settings),
        start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& path) {
    if (!path.empty()) inputs_[path] = io::sha256_file(path);
  }

  fs::path path(const std::string& name) const { return fs::path(settings_.out) / name; }

  /// Stages result.json and manifest.json, commits every staged file and
  /// echoes the result.
  void finish(io::OutputSet& outputs, json result, const json& config, std::ostream& out) {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json files = json::array();
    for (const auto& [p, content] : outputs.files()) files.push_back(p.filename().string());
    result["outputs"] = files;
    json manifest = {{"subcommand", subcommand_},
                     {"config", config},
                     {"seed", settings_.seed},
                     {"version", std::string(kVersion)},
                     {"inputs", inputs_},
                     {"threads", settings_.threads > 0 ? settings_.threads : default_threads()},
                     {"wall_time_seconds", elapsed}};
    const std::string text = result.dump(2) + "\n";
    outputs.add(path("result.json"), text);
    outputs.add(path("manifest.json"), manifest.dump(2) + "\n");
    outputs.commit();
    out << text;
  }

 private:
  std::string subcommand_;
  const Settings& settings_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::object();
};

struct Problem {
  CostVector c;
  double lambda;
  std::string lambda_source;
  Regularizer reg;
  SolverOptions solver;
};

CostVector load_cost(const Settings& st, RunContext& ctx) {
  if (!st.cost.empty() && st.grid > 0) throw ConfigError("pass either --cost or --grid, not both");
  if (st.grid > 0)
    return cost_from_metric(build_grid_space(st.grid, st.extent), st.p, parse_metric(st.metric));
  if (st.cost.empty()) throw ConfigError("a cost is required (--cost FILE or --grid L)");
  ctx.input(st.cost);
  const Matrix table = io::read_csv_matrix(st.cost);
  if (table.rows() == table.cols() && table.rows() > 1) return CostVector::from_table(table, st.p);
  return CostVector(io::read_csv_vector(st.cost), st.p);
}

Prob load_prob(const std::string& path, const Settings& st, RunContext& ctx, Index n,
               const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing --") + what);
  ctx.input(path);
  Prob out(io::read_csv_vector(path), st.renormalize);
  if (out.size() != n)
    throw ConfigError(std::string(what) + " has " + std::to_string(out.size()) +
                      " entries, the cost has N = " + std::to_string(n));
  return out;
}

std::pair<double, std::string> resolve_lambda(const Settings& st, const CostVector& c) {
  if (st.lambda > 0.0 && st.lambda0 > 0.0) throw ConfigError("pass either --lambda or --lambda0");
  if (st.lambda > 0.0) return {st.lambda, "lambda"};
  if (st.lambda0 > 0.0) return {scaled_lambda(c, st.lambda0), "lambda0"};
  throw ConfigError("a regularization level is required (--lambda or --lambda0)");
}

Problem load_problem(const Settings& st, RunContext& ctx) {
  CostVector c = load_cost(st, ctx);
  auto [lambda, source] = resolve_lambda(st, c);
  SolverOptions solver;
  solver.tol = st.tol;
  solver.max_iter = st.max_iter;
  return {std::move(c), lambda, source, Regularizer::parse(st.reg), solver};
}

json plan_json(const TransportPlan& plan, const CostVector& c) {
  return {{"divergence", divergence(c, plan)},
          {"transport_cost", transport_cost(c, plan)},
          {"iterations", plan.diagnostics().iterations},
          {"residual", plan.diagnostics().residual},
          {"method", plan.diagnostics().method},
          {"support_rows", plan.rows().size()},
          {"support_cols", plan.cols().size()}};
}

json lambda_json(const Problem& pb) {
  return {{"lambda", pb.lambda}, {"lambda_source", pb.lambda_source}, {"reg", pb.reg.name()}};
}

void add_problem_flags(Binder& b, Settings& st, bool marginals) {
  b.option("--cost", st.cost, "Cost table CSV (N x N, or N^2 values row-major)");
  b.option("--grid", st.grid, "Build an L x L grid instead of reading a cost");
  b.option("--extent", st.extent, "Grid side length");
  b.option("--metric", st.metric, "euclidean or sqeuclidean");
  b.option("--p", st.p, "Cost power p >= 1");
  if (marginals) {
    b.option("--r", st.r, "First marginal CSV");
    b.option("--s", st.s, "Second marginal CSV");
  }
  b.option("--lambda", st.lambda, "Absolute regularization level");
  b.option("--lambda0", st.lambda0, "Regularization relative to the median cost");
  b.option("--reg", st.reg, "entropy, burg, fermi, beta:<b> or lpq:<p>");
  b.option("--tol", st.tol, "Marginal residual tolerance");
  b.option("--max-iter", st.max_iter, "Sinkhorn iteration cap");
  b.option("--renormalize", st.renormalize, "Divide input marginals by their sum");
}

void require_seed(const CLI::App* sub, const Settings& st, const json& config) {
  if (sub->count("--seed") == 0 && !config.contains("seed"))
    throw ConfigError(std::string(sub->get_name()) + " needs an explicit --seed");
  (void)st;
}

unsigned thread_count(const Settings& st) { return st.threads > 0 ? st.threads : default_threads(); }

std::string samples_csv(const std::vector<double>& values) {
  std::vector<std::vector<double>> rows;
  rows.reserve(values.size());
  for (const double v : values) rows.push_back({v});
  return io::format_csv_rows(rows);
}

json summary_json(const std::vector<double>& values) {
  if (values.empty()) return json::object();
  const Vector v = Eigen::Map<const Vector>(values.data(), Index(values.size()));
  const double mean = v.mean();
  const double sd =
      v.size() > 1 ? std::sqrt((v.array() - mean).square().sum() / double(v.size() - 1)) : 0.0;
  return {{"mean", mean},
          {"sd", sd},
          {"q025", quantile(v, 0.025)},
          {"q500", quantile(v, 0.5)},
          {"q975", quantile(v, 0.975)}};
}

// --- subcommands -----------------------------------------------------------

void run_solve(const Settings& st, const json& config, std::ostream& out) {
  RunContext ctx("solve", st);
  const Problem pb = load_problem(st, ctx);
  const Prob r = load_prob(st.r, st, ctx, pb.c.size(), "r");
  const Prob s = load_prob(st.s, st, ctx, pb.c.size(), "s");
  const TransportPlan plan = solve(pb.reg, pb.c, r, s, pb.lambda, pb.solver);

  io::OutputSet outputs;
  outputs.add(ctx.path("plan.csv"), io::format_csv(plan.matrix()));
  json result = plan_json(plan, pb.c);
  result["plan_file"] = "plan.csv";
  result.update(lambda_json(pb));
  ctx.finish(outputs, std::move(result), config, out);
}

void run_variance(const Settings& st, const json& config, std::ostream& out) {
  RunContext ctx("variance", st);
  const Problem pb = load_problem(st, ctx);
  const Prob r = load_prob(st.r, st, ctx, pb.c.size(), "r");
  const Prob s = load_prob(st.s, st, ctx, pb.c.size(), "s");
  SamplingMode mode = SamplingMode::one_sample();
  if (st.mode == "two") {
    if (st.delta > 0.0) {
      mode = SamplingMode::two_sample(st.delta);
    } else if (st.n > 0 && st.m > 0) {
      mode = SamplingMode::from_sizes(st.n, st.m);
    } else {
      throw ConfigError("two-sample mode needs --delta or both --n and --m");
    }
  } else if (st.mode != "one") {
    throw ConfigError("--mode must be one or two");
  }
  const TransportPlan plan = solve(pb.reg, pb.c, r, s, pb.lambda, pb.solver);
  const CovarianceResult cov = plan_covariance(pb.reg, plan, pb.c, mode, st.covariance);

  io::OutputSet outputs;
  json result = plan_json(plan, pb.c);
  result.update(lambda_json(pb));
  result["mode"] = mode.is_two_sample() ? "two" : "one";
  result["delta"] = mode.is_two_sample() ? json(mode.delta) : json(nullptr);
  result["orientation"] =
      "r indexes plan rows; the constraint of the last support column of s is deleted";
  result["sigma_divergence"] = cov.sigma_divergence;
  result["sigma"] = std::sqrt(cov.sigma_divergence);
  if (st.gradient) {
    outputs.add(ctx.path("gradient.csv"), io::format_csv(plan_gradient(pb.reg, plan).grad_phi));
    result["plan_gradient_file"] = "gradient.csv";
  }
  if (st.covariance) {
    if (!cov.sigma_plan) throw ConfigError("plan covariance is only materialized for N <= 64");
    outputs.add(ctx.path("covariance.csv"), io::format_csv(*cov.sigma_plan));
    result["covariance_file"] = "covariance.csv";
  }
  ctx.finish(outputs, std::move(result), config, out);
}

Prob sample_or_prob(const std::string& data, const std::string& prob_path, Index given_n,
                    const Settings& st, RunContext& ctx, Index size, Index& n, const char* what) {
  if (!data.empty()) {
    ctx.input(data);
    const std::vector<Index> sample = io::read_sample_indices(data, size);
    n = Index(sample.size());
    return empirical_distribution(sample, size);
  }
  if (given_n < 1) throw ConfigError(std::string("an empirical ") + what + " needs --n");
  n = given_n;
  return load_prob(prob_path, st, ctx, size, what);
}

void run_ci(const Settings& st, const json& config, std::ostream& out) {
  RunContext ctx("ci", st);
  const Problem pb = load_problem(st, ctx);
  Index n = 0;
  const Prob r_hat = sample_or_prob(st.data, st.r, st.n, st, ctx, pb.c.size(), n, "r");
  json result;
  ConfidenceInterval ci;
  if (!st.data2.empty()) {
    Index m = 0;
    const Prob s_hat = sample_or_prob(st.data2, st.s, st.m, st, ctx, pb.c.size(), m, "s");
    ci = limit_ci_two_sample(pb.reg, pb.c, r_hat, s_hat, pb.lambda, n, m, st.alpha, pb.solver);
    result["mode"] = "two";
    result["n"] = n;
    result["m"] = m;
  } else {
    const Prob s = load_prob(st.s, st, ctx, pb.c.size(), "s");
    ci = limit_ci(pb.reg, pb.c, r_hat, s, pb.lambda, n, st.alpha, pb.solver);
    result["mode"] = "one";
    result["n"] = n;
  }
  result["estimate"] = ci.estimate;
  result["sigma"] = ci.sigma;
  result["lower"] = ci.lower;
  result["upper"] = ci.upper;
  result["alpha"] = ci.alpha;
  result.update(lambda_json(pb));
  io::OutputSet outputs;
  ctx.finish(outputs, std::move(result), config, out);
}

void run_bootstrap(const Settings& st, const json& config, std::ostream& out) {
  RunContext ctx("bootstrap", st);
  const Problem pb = load_problem(st, ctx);
  Index n = 0;
  const Prob r_hat = sample_or_prob(st.data, st.r, st.n, st, ctx, pb.c.size(), n, "r");
  const Prob s = load_prob(st.s, st, ctx, pb.c.size(), "s");
  StatisticOptions options;
  options.reg = pb.reg;
  options.solver = pb.solver;
  options.threads = thread_count(st);
  options.max_failure_rate = 0.01;
  const SampleDistribution sample = bootstrap_statistic(r_hat, s, pb.c, pb.lambda, n,
                                                        st.bootstrap_replicates, st.seed, options);
  const TransportPlan base = solve(pb.reg, pb.c, r_hat, s, pb.lambda, pb.solver);

  io::OutputSet outputs;
  outputs.add(ctx.path("samples.csv"), samples_csv(sample.values));
  json result = {{"estimate", divergence(pb.c, base)},
                 {"n", n},
                 {"B", st.bootstrap_replicates},
                 {"failures", sample.failures},
                 {"statistic", "sqrt(n) (W(r*, s) - W(r_hat, s))"},
                 {"summary", summary_json(sample.values)},
                 {"samples_file", "samples.csv"}};
  result.update(lambda_json(pb));
  ctx.finish(outputs, std::move(result), config, out);
}

json mc_config_json(const MCConfig& c) {
  return {{"grid", c.grid},
          {"extent", c.extent},
          {"metric", std::string(to_string(c.metric))},
          {"p", c.p},
          {"lambda0", c.lambda0},
          {"n", c.n},
          {"replicates", c.replicates},
          {"dirichlet_alpha", c.dirichlet_alpha},
          {"seed", c.seed},
          {"mode", std::string(to_string(c.mode))},
          {"studentize", c.studentize},
          {"reg", c.reg.name()},
          {"compare_ot_limit", c.compare_ot_limit},
          {"ot_limit_draws", c.ot_limit_draws},
          {"lambda_kappa", c.lambda_kappa ? json(*c.lambda_kappa) : json(nullptr)},
          {"tol", c.tol}};
}

MCConfig mc_config_from_json(const json& j, MCConfig base) {
  if (!j.is_object()) throw ConfigError("mc config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "grid") base.grid = value.get<Index>();
      else if (key == "extent") base.extent = value.get<double>();
      else if (key == "metric") base.metric = parse_metric(value.get<std::string>());
      else if (key == "p") base.p = value.get<double>();
      else if (key == "lambda0") base.lambda0 = value.get<std::vector<double>>();
      else if (key == "n") base.n = value.get<std::vector<Index>>();
      else if (key == "replicates") base.replicates = value.get<Index>();
      else if (key == "dirichlet_alpha") base.dirichlet_alpha = value.get<double>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "mode") base.mode = parse_mc_mode(value.get<std::string>());
      else if (key == "studentize") base.studentize = value.get<bool>();
      else if (key == "reg") base.reg = Regularizer::parse(value.get<std::string>());
      else if (key == "compare_ot_limit") base.compare_ot_limit = value.get<bool>();
      else if (key == "ot_limit_draws") base.ot_limit_draws = value.get<Index>();
      else if (key == "lambda_kappa")
        base.lambda_kappa = value.is_null() ? std::nullopt : std::optional(value.get<double>());
      else if (key == "tol") base.tol = value.get<double>();
      else throw ConfigError("unknown mc config key '" + key + "'");
    } catch (const json::exception&) {
      throw ConfigError("mc config key '" + key + "' has the wrong type");
    }
  }
  return base;
}

void run_mc(const Settings& st, const CLI::App* sub, std::ostream& out) {
  RunContext ctx("mc", st);
  json file_config = json::object();
  if (!st.config.empty()) {
    ctx.input(st.config);
    file_config = read_json(st.config);
  }
  require_seed(sub, st, file_config);
  MCConfig base;
  base.seed = st.seed;
  MCConfig config = mc_config_from_json(file_config, base);
  config.threads = thread_count(st);
  const MCReport report = mc_experiment(config);

  io::OutputSet outputs;
  json cells = json::array();
  for (std::size_t k = 0; k < report.cells.size(); ++k) {
    const MCCell& cell = report.cells[k];
    const std::string samples = "samples_" + std::to_string(k) + ".csv";
    const std::string qq = "qq_" + std::to_string(k) + ".csv";
    std::vector<std::vector<double>> sample_rows;
    for (std::size_t i = 0; i < cell.sample.values.size(); ++i)
      sample_rows.push_back({cell.sample.values[i], cell.sample.raw[i]});
    std::vector<std::vector<double>> qq_rows;
    for (const auto& [theory, observed] : cell.qq) qq_rows.push_back({theory, observed});
    outputs.add(ctx.path(samples), io::format_csv_rows(sample_rows));
    outputs.add(ctx.path(qq), io::format_csv_rows(qq_rows));
    cells.push_back({{"lambda0", cell.lambda0},
                     {"lambda", cell.lambda},
                     {"n", cell.n},
                     {"m", cell.m},
                     {"sigma", cell.sigma},
                     {"ks_reference", cell.ks_reference},
                     {"ks_gaussian_limit", cell.ks_gaussian_limit},
                     {"ks_ot_limit", cell.ks_ot_limit ? json(*cell.ks_ot_limit) : json(nullptr)},
                     {"replicates", cell.sample.values.size()},
                     {"failures", cell.sample.failures},
                     {"samples_file", samples},
                     {"qq_file", qq}});
  }
  const auto weights = [](const Prob& p) {
    return std::vector<double>(p.weights().data(), p.weights().data() + p.size());
  };
  json result = {{"config", mc_config_json(config)},
                 {"studentized", config.studentize},
                 {"two_sample_studentization", "plug-in variance at (r_n, s_m), delta = 1/2"},
                 {"r", weights(report.r)},
                 {"s", weights(report.s)},
                 {"cells", cells}};
  ctx.finish(outputs, std::move(result), mc_config_json(config), out);
}

IntensityImage load_image(const std::string& path, double pixel_size, RunContext& ctx) {
  if (path.empty()) throw ConfigError("rcol needs --imgA and --imgB");
  ctx.input(path);
  return io::read_image(path, pixel_size);
}

void run_rcol(const Settings& st, const json& config, std::ostream& out) {
  RunContext ctx("rcol", st);
  const IntensityImage a = load_image(st.img_a, st.pixel_size, ctx);
  const IntensityImage b = load_image(st.img_b, st.pixel_size, ctx);
  if (a.width != b.width || a.height != b.height) throw ConfigError("images differ in size");
  const auto [space, prob_a] = image_to_distribution(a);
  const Prob prob_b = image_to_distribution(b).second;
  const CostVector c = cost_from_metric(space, st.p, parse_metric(st.metric));
  const auto [lambda, source] = resolve_lambda(st, c);
  const Regularizer reg = Regularizer::parse(st.reg);
  const Index n = st.resample > 0
                      ? st.resample
                      : std::max<Index>(1, Index(std::llround(50.0 * std::sqrt(double(c.size())))));
  const Prob r_hat = resample_distribution(prob_a, n, derive_seed(st.seed, 1));
  const Prob s_hat = resample_distribution(prob_b, n, derive_seed(st.seed, 2));
  SolverOptions solver;
  solver.tol = st.tol;
  solver.max_iter = st.max_iter;

  RColCurve curve;
  json result = {{"lambda", lambda},
                 {"lambda_source", source},
                 {"reg", reg.name()},
                 {"n", n},
                 {"band", st.band}};
  if (st.band == "none") {
    curve = rcol(solve(reg, c, r_hat, s_hat, lambda, solver), c);
  } else if (st.band == "gaussian") {
    const TransportPlan plan = solve(reg, c, r_hat, s_hat, lambda, solver);
    curve = rcol_cb_gaussian(reg, plan, c, n, n,
                             {st.alpha, st.draws, derive_seed(st.seed, 3), thread_count(st)});
    result["draws"] = st.draws;
  } else if (st.band == "bootstrap") {
    BootstrapBandOptions options;
    options.alpha = st.alpha;
    options.replicates = st.bootstrap_replicates;
    options.seed = derive_seed(st.seed, 4);
    options.threads = thread_count(st);
    options.solver = solver;
    const BootstrapRCol boot = rcol_cb_bootstrap(reg, r_hat, s_hat, c, lambda, n, options);
    curve = boot.curve;
    result["B"] = st.bootstrap_replicates;
    result["failures"] = boot.failures;
  } else {
    throw ConfigError("--band must be none, gaussian or bootstrap");
  }
  if (curve.band) {
    result["alpha"] = curve.band->alpha;
    result["quantile"] = curve.band->quantile;
    result["half_width"] = curve.band->half_width;
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
    const Index i = Index(k);
    const double lo = curve.band ? curve.band->lower[i] : curve.values[i];
    const double hi = curve.band ? curve.band->upper[i] : curve.values[i];
    rows.push_back({curve.thresholds[k], curve.values[i], lo, hi});
  }
  io::OutputSet outputs;
  outputs.add(ctx.path("curve.csv"), io::format_csv_rows(rows));
  result["curve_file"] = "curve.csv";
  result["c_max"] = c.c_max();
  ctx.finish(outputs, std::move(result), config, out);
}

int exit_code_for(const std::exception_ptr& failure, std::ostream& err) {
  try {
    std::rethrow_exception(failure);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConvergenceError& e) {
    err << "convergence error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const Error& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::bad_alloc&) {
    err << "numerical error: out of memory\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Settings st;
  CLI::App app{"Regularized optimal transport with limit-law inference"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::map<std::string, Binder> binders;
  auto sub = [&](const std::string& name, const std::string& help) -> Binder& {
    CLI::App* s = app.add_subcommand(name, help);
    Binder& b = binders.emplace(name, Binder(s)).first->second;
    b.plumbing("--out", st.out, "Output directory");
    b.plumbing("--config", st.config, "JSON file whose keys override flags");
    return b;
  };

  Binder& solve_b = sub("solve", "Solve for the regularized plan and divergence");
  add_problem_flags(solve_b, st, true);

  Binder& var_b = sub("variance", "Limit variance of the divergence and plan covariance");
  add_problem_flags(var_b, st, true);
  var_b.option("--mode", st.mode, "one (r random) or two (r and s random)");
  var_b.option("--delta", st.delta, "Two-sample weight m / (n + m)");
  var_b.option("--n", st.n, "Size of the r sample (two-sample mode)");
  var_b.option("--m", st.m, "Size of the s sample (two-sample mode)");
  var_b.option("--gradient", st.gradient, "Write the plan gradient as CSV");
  var_b.option("--covariance", st.covariance, "Write the plan covariance as CSV");

  Binder& ci_b = sub("ci", "Limit-law confidence interval for the divergence");
  add_problem_flags(ci_b, st, true);
  ci_b.option("--data", st.data, "1-based sample indices drawn from r");
  ci_b.option("--data2", st.data2, "1-based sample indices drawn from s (two-sample)");
  ci_b.option("--n", st.n, "Sample size when --r is already empirical");
  ci_b.option("--m", st.m, "Sample size when --s is already empirical");
  ci_b.option("--alpha", st.alpha, "Miscoverage level");

  Binder& boot_b = sub("bootstrap", "Naive bootstrap of the divergence statistic");
  add_problem_flags(boot_b, st, true);
  boot_b.option("--data", st.data, "1-based sample indices drawn from r");
  boot_b.option("--n", st.n, "Sample size when --r is already empirical");
  boot_b.option("--B", st.bootstrap_replicates, "Bootstrap replicates");
  boot_b.option("--seed", st.seed, "Random seed (required)");
  boot_b.plumbing("--threads", st.threads, "Worker threads (default ROT_THREADS or all cores)");

  Binder& mc_b = sub("mc", "Monte Carlo validation of the limit laws");
  mc_b.plumbing("--seed", st.seed, "Random seed (required unless in --config)");
  mc_b.plumbing("--threads", st.threads, "Worker threads (default ROT_THREADS or all cores)");

  Binder& rcol_b = sub("rcol", "Colocalization curve with a uniform confidence band");
  rcol_b.option("--imgA", st.img_a, "First channel (PGM or CSV)");
  rcol_b.option("--imgB", st.img_b, "Second channel (PGM or CSV)");
  rcol_b.option("--pixel-size", st.pixel_size, "Pixel spacing");
  rcol_b.option("--resample", st.resample, "Resampled points per channel (default 50 sqrt(N))");
  rcol_b.option("--metric", st.metric, "euclidean or sqeuclidean");
  rcol_b.option("--p", st.p, "Cost power p >= 1");
  rcol_b.option("--lambda", st.lambda, "Absolute regularization level");
  rcol_b.option("--lambda0", st.lambda0, "Regularization relative to the median cost");
  rcol_b.option("--reg", st.reg, "Regularizer");
  rcol_b.option("--tol", st.tol, "Marginal residual tolerance");
  rcol_b.option("--max-iter", st.max_iter, "Sinkhorn iteration cap");
  rcol_b.option("--alpha", st.alpha, "Miscoverage level of the band");
  rcol_b.option("--band", st.band, "none, gaussian or bootstrap");
  rcol_b.option("--B", st.bootstrap_replicates, "Bootstrap replicates");
  rcol_b.option("--M", st.draws, "Gaussian draws");
  rcol_b.option("--seed", st.seed, "Random seed (required)");
  rcol_b.plumbing("--threads", st.threads, "Worker threads (default ROT_THREADS or all cores)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    Binder& binder = binders.at(name);
    if (name == "mc") {
      run_mc(st, chosen, out);
      return kExitOk;
    }
    json file_config = json::object();
    if (!st.config.empty()) {
      file_config = read_json(st.config);
      apply_config(binder, file_config);
    }
    if (name == "bootstrap" || name == "rcol") require_seed(chosen, st, file_config);
    const json config = resolved_config(binder);
    if (name == "solve") run_solve(st, config, out);
    else if (name == "variance") run_variance(st, config, out);
    else if (name == "ci") run_ci(st, config, out);
    else if (name == "bootstrap") run_bootstrap(st, config, out);
    else if (name == "rcol") run_rcol(st, config, out);
    return kExitOk;
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
}

}  // namespace rot::cli
