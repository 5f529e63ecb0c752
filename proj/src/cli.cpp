#include "mlrhar/cli.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlrhar/csv.hpp"
#include "mlrhar/estimators.hpp"
#include "mlrhar/evaluation.hpp"
#include "mlrhar/har.hpp"

namespace mlrhar {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";

json load_json(const std::string& path) {
  std::ifstream in(path);
  ensure(in.good(), "cannot open " + path + " for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

// Strict-schema accessor over one JSON object: reads mark their key as seen,
// finish() rejects anything left over so typos fail loudly instead of being
// silently ignored.
class ConfigView {
 public:
  ConfigView(const json& node, std::string context)
      : node_(node), context_(std::move(context)) {
    require(node_.is_object(), context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!node_.contains(key)) return fallback;
    return fetch<T>(key);
  }

  template <typename T>
  T need(const std::string& key) {
    require(node_.contains(key), context_ + ": missing required key '" + key + "'");
    return fetch<T>(key);
  }

  std::optional<ConfigView> child(const std::string& key) {
    if (!node_.contains(key)) return std::nullopt;
    seen_.insert(key);
    return ConfigView(node_.at(key), context_ + "." + key);
  }

  void finish() const {
    for (const auto& item : node_.items())
      require(seen_.count(item.key()) > 0, context_ + ": unknown key '" + item.key() + "'");
  }

  const std::string& context() const { return context_; }

 private:
  template <typename T>
  T fetch(const std::string& key) {
    seen_.insert(key);
    try {
      return node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw std::invalid_argument(context_ + ": key '" + key + "' has the wrong type");
    }
  }

  const json& node_;
  std::string context_;
  std::set<std::string> seen_;
};

Eigen::VectorXd as_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

Eigen::MatrixXd as_matrix(const std::vector<std::vector<double>>& rows, const std::string& ctx) {
  require(!rows.empty(), ctx + ": empty matrix");
  const Index cols = static_cast<Index>(rows.front().size());
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(static_cast<Index>(rows[r].size()) == cols, ctx + ": ragged matrix rows");
    m.row(static_cast<Index>(r)) = as_eigen(rows[r]).transpose();
  }
  return m;
}

Ranks as_ranks(const std::vector<Index>& v, const std::string& ctx) {
  require(v.size() == 3, ctx + ": expected three ranks");
  return Ranks{v[0], v[1], v[2]};
}

LowRankHarConfig parse_lowrank(ConfigView& view) {
  LowRankHarConfig cfg;
  cfg.n_assets = view.get<Index>("assets", cfg.n_assets);
  cfg.lags = view.get<Index>("lags", cfg.lags);
  cfg.alpha1_spectral_radius =
      view.get<double>("alpha1_spectral_radius", cfg.alpha1_spectral_radius);
  cfg.max_companion_radius = view.get<double>("max_companion_radius", cfg.max_companion_radius);
  cfg.omega = view.get<double>("omega", cfg.omega);
  cfg.v = view.get<double>("v", cfg.v);
  cfg.bw_corr = view.get<double>("bw_corr", cfg.bw_corr);
  cfg.seed = view.get<std::uint64_t>("seed", cfg.seed);
  view.finish();
  return cfg;
}

DiffusionSpec parse_model(ConfigView& view) {
  const std::string kind = view.need<std::string>("kind");
  if (kind == "har_low_rank") return make_lowrank_har_spec(parse_lowrank(view));
  require(kind == "explicit",
          view.context() + ": kind must be 'har_low_rank' or 'explicit', got '" + kind + "'");

  DiffusionSpec spec;
  spec.omega = as_eigen(view.need<std::vector<double>>("omega"));
  const Index n = spec.omega.size();
  const Eigen::MatrixXd alpha1 =
      as_matrix(view.need<std::vector<std::vector<double>>>("alpha"), view.context() + ".alpha");
  require(alpha1.rows() == n && alpha1.cols() % n == 0,
          view.context() + ".alpha: expected N rows and a multiple of N columns");
  const Index p = alpha1.cols() / n;
  spec.alpha = fold(alpha1, 1, n, n, p);

  auto vec_or = [&](const char* key, const Eigen::VectorXd& fallback) {
    if (!view.has(key)) return fallback;
    Eigen::VectorXd v = as_eigen(view.get<std::vector<double>>(key, {}));
    require(v.size() == n, view.context() + "." + key + ": expected " + std::to_string(n) +
                               " entries");
    return v;
  };
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  spec.beta = vec_or("beta", zero);
  spec.v = vec_or("v", zero);
  spec.drift = vec_or("drift", zero);
  spec.jump_intensity = vec_or("jump_intensity", zero);
  spec.jump_size_variance = vec_or("jump_size_variance", zero);
  spec.init_sigma2 = vec_or("init_sigma2", spec.omega);
  spec.init_log_price =
      vec_or("init_log_price", Eigen::VectorXd::Constant(n, std::log(50.0)));

  spec.rho_b = Eigen::MatrixXd::Identity(n, n);
  spec.rho_w = Eigen::MatrixXd::Identity(n, n);
  spec.rho = Eigen::MatrixXd::Zero(n, n);
  if (auto corr = view.child("correlation")) {
    const std::string ckind = corr->need<std::string>("kind");
    if (ckind == "scaled_identity") {
      spec.rho = corr->need<double>("bw") * Eigen::MatrixXd::Identity(n, n);
    } else if (ckind == "explicit") {
      spec.rho_b = as_matrix(corr->need<std::vector<std::vector<double>>>("rho_b"),
                             corr->context() + ".rho_b");
      spec.rho_w = as_matrix(corr->need<std::vector<std::vector<double>>>("rho_w"),
                             corr->context() + ".rho_w");
      spec.rho = as_matrix(corr->need<std::vector<std::vector<double>>>("rho"),
                           corr->context() + ".rho");
    } else {
      require(ckind == "identity", corr->context() +
                                       ": kind must be 'identity', 'scaled_identity' or "
                                       "'explicit', got '" +
                                       ckind + "'");
    }
    corr->finish();
  }
  view.finish();
  spec.validate();
  return spec;
}

FitMethod parse_method(const std::string& name, const std::string& ctx) {
  if (name == "ols") return FitMethod::OLS;
  if (name == "mri") return FitMethod::MRI;
  if (name == "mlr") return FitMethod::MLR;
  throw std::invalid_argument(ctx + ": method must be 'ols', 'mri' or 'mlr', got '" + name + "'");
}

// Shared optimizer block: {"ranks": [..], "running_ranks": [..],
// "step_size": x, "max_iterations": n, "tolerance": x}.
PgdConfig parse_pgd(ConfigView& parent, const PgdConfig& defaults = {}) {
  PgdConfig pgd = defaults;
  if (auto view = parent.child("pgd")) {
    if (view->has("ranks"))
      pgd.ranks = as_ranks(view->get<std::vector<Index>>("ranks", {}), view->context());
    if (view->has("running_ranks"))
      pgd.running_ranks =
          as_ranks(view->get<std::vector<Index>>("running_ranks", {}), view->context());
    if (view->has("step_size")) pgd.step_size = view->get<double>("step_size", 0.0);
    pgd.max_iterations = view->get<Index>("max_iterations", pgd.max_iterations);
    pgd.tolerance = view->get<double>("tolerance", pgd.tolerance);
    view->finish();
  }
  return pgd;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  Index reps = 0;
  Index threads = 0;
  bool seed_set = false;
  bool reps_set = false;
  bool threads_set = false;
};

void write_manifest(const CommonArgs& args, const std::string& subcommand, std::uint64_t seed,
                    const std::vector<std::string>& outputs, json extra = json::object()) {
  json m;
  m["tool"] = "mlrhar";
  m["version"] = kToolVersion;
  m["subcommand"] = subcommand;
  m["seed"] = seed;
  m["config_checksum"] = args.config_path.empty() ? "" : file_checksum(args.config_path);
  json files = json::object();
  for (const auto& path : outputs) files[fs::path(path).filename().string()] = file_checksum(path);
  m["outputs"] = files;
  for (auto& [key, value] : extra.items()) m[key] = value;

  const std::string path = (fs::path(args.out_dir) / "manifest.json").string();
  std::ofstream out(path);
  ensure(out.good(), "cannot open " + path + " for writing");
  out << m.dump(2) << '\n';
  ensure(out.good(), "write failed: " + path);
}

std::string out_path(const CommonArgs& args, const std::string& name) {
  return (fs::path(args.out_dir) / name).string();
}

json required_config(const CommonArgs& args, const std::string& subcommand) {
  require(!args.config_path.empty(), subcommand + ": --config is required");
  return load_json(args.config_path);
}

// Input panel shared by estimate / forecast / select-rank: path plus layout
// and transform switches.
struct PanelArgs {
  RealizedPanel panel;
  bool log_transform = false;
  Index lags = 22;
};

PanelArgs parse_panel(ConfigView& cfg) {
  PanelArgs in;
  const std::string path = cfg.need<std::string>("input");
  const bool wide = cfg.get<bool>("wide", false);
  in.log_transform = cfg.get<bool>("log_transform", false);
  in.lags = cfg.get<Index>("lags", in.lags);
  in.panel = read_panel_csv(path, wide);
  return in;
}

int cmd_simulate(const CommonArgs& args) {
  const json root = required_config(args, "simulate");
  ConfigView cfg(root, "simulate");
  const Index days = cfg.get<Index>("days", 250);
  const int steps = cfg.get<int>("steps_per_day", 390);
  const int m = cfg.get<int>("sampling_count", steps);
  const std::string measure = cfg.get<std::string>("measure", "rv");
  require(measure == "rv" || measure == "bv",
          "simulate: measure must be 'rv' or 'bv', got '" + measure + "'");
  std::uint64_t seed = cfg.get<std::uint64_t>("seed", 1);
  if (args.seed_set) seed = args.seed;
  auto model = cfg.child("model");
  require(model.has_value(), "simulate: missing required key 'model'");
  const DiffusionSpec spec = parse_model(*model);
  cfg.finish();

  const HighFreqPanel prices = simulate(spec, days, steps, seed);
  const RealizedPanel panel =
      measure == "rv" ? realized_volatility(prices, m) : bipower_variation(prices, m);

  fs::create_directories(args.out_dir);
  const std::string prices_path = out_path(args, "prices.csv");
  const std::string panel_path = out_path(args, "panel.csv");
  write_prices_csv(prices_path, prices);
  write_panel_csv(panel_path, panel);

  json extra;
  extra["days"] = days;
  extra["steps_per_day"] = steps;
  extra["sampling_count"] = m;
  extra["measure"] = measure;
  extra["total_jumps"] = prices.total_jump_count;
  write_manifest(args, "simulate", seed, {prices_path, panel_path}, extra);
  return 0;
}

int cmd_estimate(const CommonArgs& args) {
  const json root = required_config(args, "estimate");
  ConfigView cfg(root, "estimate");
  PanelArgs in = parse_panel(cfg);
  const FitMethod method = parse_method(cfg.get<std::string>("method", "mlr"), "estimate");
  const Index mri_rank = cfg.get<Index>("mri_rank", 1);
  const PgdConfig pgd = parse_pgd(cfg);
  const bool covariance = cfg.get<bool>("covariance", false);
  cfg.finish();

  const RealizedPanel centered = center_and_transform(in.panel, in.log_transform);
  const RegressionDesign design = build_design(centered, in.lags);
  FitResult fit;
  switch (method) {
    case FitMethod::OLS: fit = fit_ols(design); break;
    case FitMethod::MRI: fit = fit_mri(design, mri_rank); break;
    case FitMethod::MLR: fit = fit_mlr(design, pgd); break;
  }

  fs::create_directories(args.out_dir);
  std::vector<std::string> outputs = write_fit_result(out_path(args, "fit"), fit);
  if (covariance) {
    const Ranks cov_ranks = method == FitMethod::MLR
                                ? fit.ranks
                                : (method == FitMethod::MRI
                                       ? Ranks{design.n, mri_rank, design.p}
                                       : Ranks{design.n, design.n, design.p});
    const Eigen::MatrixXd sigma = asymptotic_covariance(
        fit.tensor, plugin_asymptotic_input(design, fit.tensor), method, cov_ranks);
    const std::string cov_path = out_path(args, "covariance.csv");
    write_matrix_csv(cov_path, sigma);
    outputs.push_back(cov_path);
  }

  json extra;
  extra["method"] = method_name(method);
  extra["final_loss"] = fit.final_loss;
  extra["converged"] = fit.converged;
  write_manifest(args, "estimate", 0, outputs, extra);
  std::cout << method_name(method) << " fit: loss " << fit.final_loss << ", "
            << fit.iterations << " iterations" << (fit.converged ? "" : " (not converged)")
            << '\n';
  return 0;
}

int cmd_forecast(const CommonArgs& args) {
  const json root = required_config(args, "forecast");
  ConfigView cfg(root, "forecast");
  PanelArgs in = parse_panel(cfg);

  ForecastConfig fc;
  fc.lags = in.lags;
  fc.log_scale = in.log_transform;
  fc.center = cfg.get<bool>("center", true);
  fc.method = parse_method(cfg.get<std::string>("method", "mlr"), "forecast");
  fc.mri_rank = cfg.get<Index>("mri_rank", 1);
  fc.pgd = parse_pgd(cfg);
  const std::string refit = cfg.get<std::string>("refit", "each_step");
  require(refit == "each_step" || refit == "fixed",
          "forecast: refit must be 'each_step' or 'fixed', got '" + refit + "'");
  fc.refit = refit == "fixed" ? RefitPolicy::FixedCoefficients : RefitPolicy::RefitEachStep;
  if (cfg.has("oracle"))
    fc.oracle = read_coefficients_csv(cfg.get<std::string>("oracle", ""));
  const Index window = cfg.need<Index>("window");
  const Index horizon = cfg.need<Index>("horizon");
  cfg.finish();

  const ForecastRun run = rolling_forecast(in.panel, fc, window, horizon);

  fs::create_directories(args.out_dir);
  RealizedPanel forecasts, realized;
  forecasts.values = run.forecasts;
  realized.values = run.realized;
  const std::string fpath = out_path(args, "forecasts.csv");
  const std::string rpath = out_path(args, "realized.csv");
  write_panel_csv(fpath, forecasts);
  write_panel_csv(rpath, realized);
  std::vector<std::string> outputs{fpath, rpath};

  json extra;
  extra["model"] = run.model;
  extra["refit"] = refit;
  extra["failures"] = run.failures;
  try {
    const Eigen::VectorXd q = qlike(run);
    const std::string qpath = out_path(args, "qlike.csv");
    std::ofstream out(qpath);
    ensure(out.good(), "cannot open " + qpath + " for writing");
    out << std::setprecision(17) << "asset,qlike\n";
    for (Index i = 0; i < q.size(); ++i) out << i + 1 << ',' << q(i) << '\n';
    ensure(out.good(), "write failed: " + qpath);
    outputs.push_back(qpath);
  } catch (const std::exception& e) {
    extra["qlike_skipped"] = e.what();
  }
  write_manifest(args, "forecast", 0, outputs, extra);
  return 0;
}

int cmd_select_rank(const CommonArgs& args) {
  const json root = required_config(args, "select-rank");
  ConfigView cfg(root, "select-rank");
  PanelArgs in = parse_panel(cfg);
  const double lambda = cfg.get<double>("lambda", 1e-4);
  const Index max_rank = cfg.get<Index>("max_rank", 10);
  const PgdConfig pgd = parse_pgd(cfg);
  cfg.finish();

  const RealizedPanel centered = center_and_transform(in.panel, in.log_transform);
  const RankSelection selection = select_ranks_bic(
      centered, in.lags, lambda, full_rank_grid(centered.assets(), in.lags, max_rank), pgd);

  fs::create_directories(args.out_dir);
  const std::string path = out_path(args, "selection.csv");
  {
    std::ofstream out(path);
    ensure(out.good(), "cannot open " + path + " for writing");
    out << std::setprecision(17);
    out << "# selected=(" << selection.ranks[0] << ',' << selection.ranks[1] << ','
        << selection.ranks[2] << ")\n";
    out << "r1,r2,r3,bic\n";
    for (const auto& [r, bic] : selection.table)
      out << r[0] << ',' << r[1] << ',' << r[2] << ',' << bic << '\n';
    ensure(out.good(), "write failed: " + path);
  }

  json extra;
  extra["ranks"] = {selection.ranks[0], selection.ranks[1], selection.ranks[2]};
  extra["bic"] = selection.bic;
  if (!selection.warnings.empty()) extra["warnings"] = selection.warnings;
  write_manifest(args, "select-rank", 0, {path}, extra);
  std::cout << "selected ranks (" << selection.ranks[0] << ',' << selection.ranks[1] << ','
            << selection.ranks[2] << ")\n";
  return 0;
}

int cmd_experiment(const CommonArgs& args, const std::string& kind) {
  json root = json::object();
  if (!args.config_path.empty()) root = load_json(args.config_path);
  ConfigView cfg(root, "experiment " + kind);

  ExperimentReport report;
  if (kind == "asymptotics") {
    AsymptoticsConfig c;
    if (auto view = cfg.child("construction")) c.construction = parse_lowrank(*view);
    c.sample_sizes = cfg.get<std::vector<Index>>("sample_sizes", c.sample_sizes);
    c.sampling_counts = cfg.get<std::vector<int>>("sampling_counts", c.sampling_counts);
    c.steps_per_day = cfg.get<int>("steps_per_day", c.steps_per_day);
    c.replications = cfg.get<Index>("replications", c.replications);
    c.seed = cfg.get<std::uint64_t>("seed", c.seed);
    c.mri_rank = cfg.get<Index>("mri_rank", c.mri_rank);
    const std::string init = cfg.get<std::string>("init", "projected_ols");
    require(init == "projected_ols" || init == "zero",
            "experiment asymptotics: init must be 'projected_ols' or 'zero'");
    c.init = init == "zero" ? MlrInit::Zero : MlrInit::ProjectedOls;
    c.pgd = parse_pgd(cfg, c.pgd);
    cfg.finish();
    if (args.seed_set) c.seed = args.seed;
    if (args.reps_set) c.replications = args.reps;
    if (args.threads_set) c.threads = args.threads;
    report = experiment_asymptotics(c);
  } else if (kind == "error-bound") {
    ErrorBoundConfig c;
    c.dims = cfg.get<std::vector<Index>>("dims", c.dims);
    if (cfg.has("rank_sets")) {
      c.rank_sets.clear();
      for (const auto& r : cfg.get<std::vector<std::vector<Index>>>("rank_sets", {}))
        c.rank_sets.push_back(as_ranks(r, "experiment error-bound.rank_sets"));
    }
    c.lags = cfg.get<Index>("lags", c.lags);
    c.core_norm = cfg.get<double>("core_norm", c.core_norm);
    c.sample_sizes_model = cfg.get<std::vector<Index>>("sample_sizes_model", c.sample_sizes_model);
    c.sample_sizes_noise = cfg.get<std::vector<Index>>("sample_sizes_noise", c.sample_sizes_noise);
    c.replications = cfg.get<Index>("replications", c.replications);
    c.seed = cfg.get<std::uint64_t>("seed", c.seed);
    c.run_noise_process = cfg.get<bool>("run_noise_process", c.run_noise_process);
    c.pgd = parse_pgd(cfg, c.pgd);
    cfg.finish();
    if (args.seed_set) c.seed = args.seed;
    if (args.reps_set) c.replications = args.reps;
    if (args.threads_set) c.threads = args.threads;
    report = experiment_error_bound(c);
  } else {
    require(kind == "convergence", "experiment: unknown kind '" + kind + "'");
    ConvergenceConfig c;
    c.construction.n_assets = 30;
    if (auto view = cfg.child("construction")) c.construction = parse_lowrank(*view);
    c.days = cfg.get<Index>("days", c.days);
    c.steps_per_day = cfg.get<int>("steps_per_day", c.steps_per_day);
    c.sampling_counts = cfg.get<std::vector<int>>("sampling_counts", c.sampling_counts);
    if (cfg.has("running_ranks")) {
      c.running_ranks.clear();
      for (const auto& r : cfg.get<std::vector<std::vector<Index>>>("running_ranks", {}))
        c.running_ranks.push_back(as_ranks(r, "experiment convergence.running_ranks"));
    }
    c.iterations = cfg.get<Index>("iterations", c.iterations);
    c.seed = cfg.get<std::uint64_t>("seed", c.seed);
    if (cfg.has("step_size")) c.step_size = cfg.get<double>("step_size", 0.0);
    cfg.finish();
    if (args.seed_set) c.seed = args.seed;
    report = experiment_convergence(c);
  }

  fs::create_directories(args.out_dir);
  const std::vector<std::string> outputs =
      write_report(out_path(args, report.experiment_id), report);

  json extra;
  extra["experiment"] = report.experiment_id;
  extra["replications"] = report.replications;
  write_manifest(args, "experiment", report.master_seed, outputs, extra);
  std::cout << "experiment " << report.experiment_id << ": " << report.rows.size()
            << " summary rows, " << report.curves.size() << " curves\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Low-rank vector HAR toolkit: simulation, estimation, forecasting"};
  app.require_subcommand(1);

  CommonArgs common;
  auto add_common = [&common](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "JSON configuration file");
    cmd->add_option("--out", common.out_dir, "output directory (default: current)");
    cmd->add_option("--seed", common.seed, "master seed override")
        ->each([&common](const std::string&) { common.seed_set = true; });
    cmd->add_option("--reps", common.reps, "replication count override")
        ->each([&common](const std::string&) { common.reps_set = true; });
    cmd->add_option("--threads", common.threads, "worker thread count")
        ->each([&common](const std::string&) { common.threads_set = true; });
  };

  CLI::App* sim = app.add_subcommand("simulate", "simulate the diffusion and realized measures");
  CLI::App* est = app.add_subcommand("estimate", "fit a coefficient tensor to a panel CSV");
  CLI::App* fore = app.add_subcommand("forecast", "rolling one-step forecasts over a panel CSV");
  CLI::App* sel = app.add_subcommand("select-rank", "BIC rank selection over a panel CSV");
  CLI::App* exp = app.add_subcommand("experiment", "run a replication study");
  exp->require_subcommand(1);
  CLI::App* exp_asy = exp->add_subcommand("asymptotics", "bias and variance across sample sizes");
  CLI::App* exp_err = exp->add_subcommand("error-bound", "estimation error against model size");
  CLI::App* exp_con = exp->add_subcommand("convergence", "per-iteration optimizer error");
  for (CLI::App* cmd : {sim, est, fore, sel, exp_asy, exp_err, exp_con}) add_common(cmd);

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("mlrhar");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(common);
    if (*est) return cmd_estimate(common);
    if (*fore) return cmd_forecast(common);
    if (*sel) return cmd_select_rank(common);
    if (*exp_asy) return cmd_experiment(common, "asymptotics");
    if (*exp_err) return cmd_experiment(common, "error-bound");
    return cmd_experiment(common, "convergence");
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mlrhar
