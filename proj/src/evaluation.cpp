#include "mlrhar/evaluation.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "mlrhar/numeric.hpp"
#include "mlrhar/parallel.hpp"
#include "mlrhar/rng.hpp"

namespace mlrhar {

namespace {

int resolve_threads(Index threads) {
  return threads <= 0 ? default_thread_count() : static_cast<int>(threads);
}

RealizedPanel head_panel(const RealizedPanel& panel, Index days) {
  RealizedPanel sub = panel;
  sub.values = panel.values.topRows(days);
  if (sub.jump_estimates.rows() >= days) sub.jump_estimates = panel.jump_estimates.topRows(days);
  return sub;
}

Tensor3 fit_window(const RegressionDesign& design, const ForecastConfig& config) {
  switch (config.method) {
    case FitMethod::OLS: return fit_ols(design).tensor;
    case FitMethod::MRI: return fit_mri(design, config.mri_rank).tensor;
    case FitMethod::MLR: return fit_mlr(design, config.pgd).tensor;
  }
  throw std::invalid_argument("rolling_forecast: unknown method");
}

}  // namespace

ForecastRun rolling_forecast(const RealizedPanel& panel, const ForecastConfig& config,
                             Index window, Index horizon) {
  const Index n = panel.assets();
  const Index p = config.lags;
  require(p >= 1 && window > p, "rolling_forecast: window must exceed the lag order");
  require(horizon >= 1, "rolling_forecast: horizon must be positive");
  require(panel.days() >= window + horizon, "rolling_forecast: panel too short for the window");
  if (config.oracle)
    require(config.oracle->dim1() == n && config.oracle->dim2() == n && config.oracle->dim3() == p,
            "rolling_forecast: oracle tensor shape mismatch");

  ForecastRun run;
  run.window = window;
  run.horizon = horizon;
  run.refit = config.refit;
  run.model = config.oracle ? "oracle" : method_name(config.method);
  run.forecasts.setZero(horizon, n);
  run.realized.setZero(horizon, n);
  run.valid.assign(static_cast<std::size_t>(horizon), 1);

  Tensor3 coeffs(0, 0, 0);
  bool have_coeffs = false;

  for (Index step = 0; step < horizon; ++step) {
    run.realized.row(step) = panel.values.row(window + step);
    try {
      RealizedPanel sub;
      sub.values = panel.values.middleRows(step, window);
      sub.kind = panel.kind;
      sub.sampling_count = panel.sampling_count;
      RealizedPanel centered = center_and_transform(sub, config.log_scale);
      if (!config.center) {
        // Treat the window as already mean zero: restore the values and
        // forecast without an intercept.
        centered.values.rowwise() += centered.centering.transpose();
        centered.centering.setZero();
      }

      const Tensor3* use = nullptr;
      if (config.oracle) {
        use = &*config.oracle;
      } else if (config.refit == RefitPolicy::RefitEachStep || !have_coeffs) {
        coeffs = fit_window(build_design(centered, p), config);
        have_coeffs = true;
        use = &coeffs;
      } else {
        use = &coeffs;
      }

      Eigen::VectorXd x(n * p);
      for (Index l = 1; l <= p; ++l)
        x.segment((l - 1) * n, n) = centered.values.row(window - l).transpose();
      Eigen::VectorXd yhat = use->mode1() * x + centered.centering;
      if (config.log_scale) yhat = yhat.array().exp();
      run.forecasts.row(step) = yhat.transpose();
    } catch (const std::exception& e) {
      run.valid[static_cast<std::size_t>(step)] = 0;
      ++run.failures;
      run.warnings.push_back("step " + std::to_string(step + 1) + ": " + e.what());
    }
  }
  return run;
}

Eigen::VectorXd qlike(const ForecastRun& run) {
  const Index n = run.realized.cols();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  Index scored = 0;
  for (Index step = 0; step < run.horizon; ++step) {
    if (!run.valid[static_cast<std::size_t>(step)]) continue;
    for (Index i = 0; i < n; ++i) {
      const double y = run.realized(step, i);
      const double f = run.forecasts(step, i);
      require(y > 0.0 && f > 0.0, "qlike: nonpositive value at step " + std::to_string(step + 1) +
                                      ", asset " + std::to_string(i + 1));
      const double r = y / f;
      total(i) += r - std::log(r) - 1.0;
    }
    ++scored;
  }
  require(scored > 0, "qlike: no valid forecast steps");
  return total / static_cast<double>(scored);
}

double subspace_discrepancy(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
  require(u.rows() == v.rows() && u.cols() == v.cols(), "subspace_discrepancy: shape mismatch");
  const Index k = u.cols();
  require(k >= 1 && u.rows() >= k, "subspace_discrepancy: need a tall matrix");

  auto orthonormalize = [k](const Eigen::MatrixXd& m) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    require(qr.rank() == k, "subspace_discrepancy: rank-deficient input");
    return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), k));
  };
  const Eigen::MatrixXd q1 = orthonormalize(u);
  const Eigen::MatrixXd q2 = orthonormalize(v);
  const double overlap = (q1.transpose() * q2).squaredNorm() / static_cast<double>(k);
  return std::sqrt(std::clamp(1.0 - overlap, 0.0, 1.0));
}

namespace {

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? std::numeric_limits<double>::quiet_NaN()
                    : s / static_cast<double>(xs.size());
}

Eigen::VectorXd as_vector(const std::vector<double>& xs) {
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Index>(xs.size()));
}

// Largest eigenvalue of the sample covariance of the rows of a replication
// matrix (reps x dim), via the singular values of the centered matrix.
double empirical_covariance_max_eig(const std::vector<Eigen::VectorXd>& reps) {
  const Index r = static_cast<Index>(reps.size());
  if (r < 2) return std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd x(r, reps.front().size());
  for (Index i = 0; i < r; ++i) x.row(i) = reps[static_cast<std::size_t>(i)].transpose();
  x.rowwise() -= x.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
  const double top = svd.singularValues()(0);
  return top * top / static_cast<double>(r - 1);
}

}  // namespace

ExperimentReport experiment_asymptotics(const AsymptoticsConfig& config) {
  require(config.replications >= 2, "experiment_asymptotics: need at least two replications");
  require(!config.sample_sizes.empty() && !config.sampling_counts.empty(),
          "experiment_asymptotics: empty configuration axes");

  const DiffusionSpec spec = make_lowrank_har_spec(config.construction);
  const VarCoefficients coeffs = high_to_low_frequency(spec);
  const Tensor3& truth = coeffs.tensor;
  const Ranks true_ranks = multilinear_ranks(truth);
  const Index n = coeffs.assets();
  const Index p = coeffs.lags();
  const Index max_t = *std::max_element(config.sample_sizes.begin(), config.sample_sizes.end());
  const Index reps = config.replications;

  PgdConfig pgd = config.pgd;
  if (pgd.ranks == Ranks{1, 1, 1}) pgd.ranks = true_ranks;
  const Ranks mri_ranks{n, config.mri_rank, p};
  const Ranks ols_ranks{n, n, p};

  const std::array<FitMethod, 3> methods{FitMethod::OLS, FitMethod::MRI, FitMethod::MLR};
  const Index n_m = static_cast<Index>(config.sampling_counts.size());
  const Index n_t = static_cast<Index>(config.sample_sizes.size());
  const Index cells = n_m * n_t * 3;
  auto cell = [&](Index mi, Index ti, Index me) { return (mi * n_t + ti) * 3 + me; };

  // Per-cell, per-replication slots keep reductions independent of the
  // parallel schedule.
  std::vector<std::vector<Eigen::VectorXd>> estimates(static_cast<std::size_t>(cells));
  std::vector<std::vector<double>> avars(static_cast<std::size_t>(cells));
  for (Index c = 0; c < cells; ++c) {
    estimates[static_cast<std::size_t>(c)].assign(static_cast<std::size_t>(reps),
                                                  Eigen::VectorXd());
    avars[static_cast<std::size_t>(c)].assign(static_cast<std::size_t>(reps),
                                              std::numeric_limits<double>::quiet_NaN());
  }

  parallel_for(static_cast<std::size_t>(reps), resolve_threads(config.threads),
               [&](std::size_t rep) {
    const HighFreqPanel panel =
        simulate(spec, max_t, config.steps_per_day, mix_keys(config.seed, 11, rep));
    for (Index mi = 0; mi < n_m; ++mi) {
      const RealizedPanel rv =
          realized_volatility(panel, config.sampling_counts[static_cast<std::size_t>(mi)]);
      for (Index ti = 0; ti < n_t; ++ti) {
        const Index t = config.sample_sizes[static_cast<std::size_t>(ti)];
        const RealizedPanel centered = center_and_transform(head_panel(rv, t), false);
        const RegressionDesign design = build_design(centered, p);
        for (Index me = 0; me < 3; ++me) {
          const FitMethod method = methods[static_cast<std::size_t>(me)];
          try {
            FitResult fit;
            if (method == FitMethod::OLS) {
              fit = fit_ols(design);
            } else if (method == FitMethod::MRI) {
              fit = fit_mri(design, config.mri_rank);
            } else {
              PgdConfig cfg = pgd;
              if (config.init == MlrInit::ProjectedOls)
                cfg.initializer =
                    project_tucker(fit_ols(design).tensor, cfg.running_ranks.value_or(cfg.ranks));
              fit = fit_mlr(design, cfg);
            }
            const Ranks jac_ranks = method == FitMethod::OLS
                                        ? ols_ranks
                                        : (method == FitMethod::MRI ? mri_ranks : pgd.ranks);
            const double avar = asymptotic_variance_max_eig(
                fit.tensor, plugin_asymptotic_input(design, fit.tensor), method, jac_ranks);
            const Index c = cell(mi, ti, me);
            estimates[static_cast<std::size_t>(c)][rep] = fit.tensor.data();
            avars[static_cast<std::size_t>(c)][rep] = avar;
          } catch (const std::exception&) {
            // slot stays empty; counted below
          }
        }
      }
    }
  });

  ExperimentReport report;
  report.experiment_id = "asymptotics";
  report.replications = reps;
  report.master_seed = config.seed;
  report.columns = {"m",    "T",    "method", "bias_sq",    "evar",
                    "avar", "avar_over_t", "failures"};
  report.notes.push_back("method codes: 0 ols, 1 mri, 2 mlr");
  report.notes.push_back("construction ranks: (" + std::to_string(true_ranks[0]) + "," +
                         std::to_string(true_ranks[1]) + "," + std::to_string(true_ranks[2]) +
                         ")");

  const Eigen::VectorXd truth_vec = truth.data();
  for (Index mi = 0; mi < n_m; ++mi) {
    for (Index ti = 0; ti < n_t; ++ti) {
      for (Index me = 0; me < 3; ++me) {
        const Index c = cell(mi, ti, me);
        std::vector<Eigen::VectorXd> good;
        std::vector<double> good_avar;
        for (Index rep = 0; rep < reps; ++rep) {
          const auto& est = estimates[static_cast<std::size_t>(c)][static_cast<std::size_t>(rep)];
          const double av = avars[static_cast<std::size_t>(c)][static_cast<std::size_t>(rep)];
          if (est.size() > 0 && std::isfinite(av)) {
            good.push_back(est);
            good_avar.push_back(av);
          }
        }
        double abs_dev = 0.0;
        for (const auto& est : good) abs_dev += (est - truth_vec).cwiseAbs().mean();
        abs_dev /= std::max<std::size_t>(good.size(), 1);
        const double bias_sq = abs_dev * abs_dev;
        const double evar = empirical_covariance_max_eig(good);
        const double avar = mean_of(good_avar);
        const double t = static_cast<double>(config.sample_sizes[static_cast<std::size_t>(ti)]);
        report.rows.push_back({static_cast<double>(config.sampling_counts[static_cast<std::size_t>(mi)]),
                               t, static_cast<double>(me), bias_sq, evar, avar, avar / t,
                               static_cast<double>(reps - static_cast<Index>(good.size()))});
      }
    }
  }

  for (Index mi = 0; mi < n_m; ++mi) {
    for (Index me = 0; me < 3; ++me) {
      ExperimentReport::Curve ev, bi;
      const std::string tag = std::string(method_name(methods[static_cast<std::size_t>(me)])) +
                              " m=" +
                              std::to_string(config.sampling_counts[static_cast<std::size_t>(mi)]);
      ev.name = "evar " + tag;
      bi.name = "bias_sq " + tag;
      for (Index ti = 0; ti < n_t; ++ti) {
        const auto& row = report.rows[static_cast<std::size_t>(cell(mi, ti, me))];
        ev.x.push_back(row[1]);
        ev.y.push_back(row[4]);
        bi.x.push_back(row[1]);
        bi.y.push_back(row[3]);
      }
      report.curves.push_back(std::move(bi));
      report.curves.push_back(std::move(ev));
    }
  }
  return report;
}

namespace {

struct MomentAccumulator {
  Eigen::MatrixXd gram, cross, yy;
  Index n = 0, p = 0;

  MomentAccumulator(Index n_, Index p_) : n(n_), p(p_) {
    gram.setZero(n * p, n * p);
    cross.setZero(n, n * p);
    yy.setZero(n, n);
  }

  // Adds response days [from, to) of a centered panel (0-based day indices,
  // from >= p).
  void add_days(const Eigen::MatrixXd& values, Index from, Index to) {
    if (to <= from) return;
    const Index rows = to - from;
    Eigen::MatrixXd xb(rows, n * p), yb(rows, n);
    for (Index d = from; d < to; ++d) {
      yb.row(d - from) = values.row(d);
      for (Index l = 1; l <= p; ++l) xb.block(d - from, (l - 1) * n, 1, n) = values.row(d - l);
    }
    gram.selfadjointView<Eigen::Lower>().rankUpdate(xb.transpose());
    cross.noalias() += yb.transpose() * xb;
    yy.noalias() += yb.transpose() * yb;
  }

  RegressionDesign design(Index t) const {
    Eigen::MatrixXd g = gram.selfadjointView<Eigen::Lower>();
    return design_from_moments(std::move(g), cross, yy, t, n, p);
  }
};

}  // namespace

ExperimentReport experiment_error_bound(const ErrorBoundConfig& config) {
  require(config.replications >= 1, "experiment_error_bound: need replications");
  require(!config.dims.empty() && !config.rank_sets.empty(),
          "experiment_error_bound: empty configuration axes");
  require(std::is_sorted(config.sample_sizes_model.begin(), config.sample_sizes_model.end()) &&
              std::is_sorted(config.sample_sizes_noise.begin(), config.sample_sizes_noise.end()),
          "experiment_error_bound: sample sizes must be ascending");

  struct Line {
    Index n = 0;
    Ranks ranks{0, 0, 0};
    VarCoefficients truth;
    Index dim = 0;
  };
  std::vector<Line> lines;
  for (std::size_t di = 0; di < config.dims.size(); ++di) {
    for (std::size_t ri = 0; ri < config.rank_sets.size(); ++ri) {
      Line line;
      line.n = config.dims[di];
      line.ranks = config.rank_sets[ri];
      line.truth = random_lowrank_var(line.n, config.lags, line.ranks, config.core_norm,
                                      mix_keys(config.seed, 7, di, ri));
      line.dim = model_dimension(line.n, config.lags, line.ranks);
      lines.push_back(std::move(line));
    }
  }

  const Index reps = config.replications;
  const Index n_t1 = static_cast<Index>(config.sample_sizes_model.size());
  const Index n_t2 = config.run_noise_process
                         ? static_cast<Index>(config.sample_sizes_noise.size())
                         : 0;
  const Index max_t1 = config.sample_sizes_model.back();

  // errors[line][t][rep], process 1 then process 2.
  std::vector<std::vector<std::vector<double>>> err1(
      lines.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(n_t1),
                                                     std::vector<double>(static_cast<std::size_t>(reps), 0.0)));
  std::vector<std::vector<std::vector<double>>> err2(
      lines.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(n_t2),
                                                     std::vector<double>(static_cast<std::size_t>(reps), 0.0)));

  parallel_for(lines.size() * static_cast<std::size_t>(reps), resolve_threads(config.threads),
               [&](std::size_t job) {
    const std::size_t li = job / static_cast<std::size_t>(reps);
    const std::size_t rep = job % static_cast<std::size_t>(reps);
    const Line& line = lines[li];
    const InnovationSpec innov = InnovationSpec::identity(line.n);

    // Process 1: exact autoregressive data, ascending sample sizes share one
    // path; Gram matrices grow incrementally and fits warm-start.
    const RealizedPanel panel =
        generate_var(line.truth, innov, max_t1, mix_keys(config.seed, 11, li, rep));
    MomentAccumulator acc(line.n, config.lags);
    Index done = config.lags;
    std::optional<Tensor3> warm;
    for (Index ti = 0; ti < n_t1; ++ti) {
      const Index t = config.sample_sizes_model[static_cast<std::size_t>(ti)];
      acc.add_days(panel.values, done, t);
      done = t;
      PgdConfig cfg = config.pgd;
      cfg.ranks = line.ranks;
      cfg.running_ranks = line.ranks;
      cfg.initializer = warm;
      const FitResult fit = fit_mlr(acc.design(t), cfg);
      warm = fit.tensor;
      err1[li][static_cast<std::size_t>(ti)][rep] = (fit.tensor - line.truth.tensor).norm();
    }

    // Process 2: measurement noise of variance 1/sqrt(m), m = T^4.
    std::optional<Tensor3> warm2;
    for (Index ti = 0; ti < n_t2; ++ti) {
      const Index t = config.sample_sizes_noise[static_cast<std::size_t>(ti)];
      const double m = std::pow(static_cast<double>(t), 4.0);
      const RealizedPanel noisy = generate_var(line.truth, innov, t,
                                               mix_keys(config.seed, 13, li, rep),
                                               MeasurementNoise{m});
      PgdConfig cfg = config.pgd;
      cfg.ranks = line.ranks;
      cfg.running_ranks = line.ranks;
      cfg.initializer = warm2;
      const FitResult fit = fit_mlr(build_design(noisy, config.lags), cfg);
      warm2 = fit.tensor;
      err2[li][static_cast<std::size_t>(ti)][rep] = (fit.tensor - line.truth.tensor).norm();
    }
  });

  ExperimentReport report;
  report.experiment_id = "error-bound";
  report.replications = reps;
  report.master_seed = config.seed;
  report.columns = {"process", "N", "r", "T", "d_m", "x", "mean_error"};

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const Line& line = lines[li];
    const std::string label =
        "N=" + std::to_string(line.n) + " r=" + std::to_string(line.ranks[0]);
    ExperimentReport::Curve c1;
    c1.name = "model-error " + label;
    for (Index ti = 0; ti < n_t1; ++ti) {
      const Index t = config.sample_sizes_model[static_cast<std::size_t>(ti)];
      const double x = std::sqrt(static_cast<double>(line.dim) / static_cast<double>(t));
      const double err = mean_of(err1[li][static_cast<std::size_t>(ti)]);
      report.rows.push_back({1.0, static_cast<double>(line.n),
                             static_cast<double>(line.ranks[0]), static_cast<double>(t),
                             static_cast<double>(line.dim), x, err});
      c1.x.push_back(x);
      c1.y.push_back(err);
    }
    const LinearFit f1 = fit_line(as_vector(c1.x), as_vector(c1.y));
    report.notes.push_back("process 1 " + label + ": slope=" + std::to_string(f1.slope) +
                           " r2=" + std::to_string(f1.r_squared));
    report.curves.push_back(std::move(c1));

    if (n_t2 > 0) {
      ExperimentReport::Curve c2;
      c2.name = "noise-error " + label;
      for (Index ti = 0; ti < n_t2; ++ti) {
        const Index t = config.sample_sizes_noise[static_cast<std::size_t>(ti)];
        const double m = std::pow(static_cast<double>(t), 4.0);
        const double x = std::pow(static_cast<double>(t), 1.5) / std::pow(m, 0.25);
        const double scale = std::sqrt(static_cast<double>(t) / static_cast<double>(line.dim));
        const double err = scale * mean_of(err2[li][static_cast<std::size_t>(ti)]);
        report.rows.push_back({2.0, static_cast<double>(line.n),
                               static_cast<double>(line.ranks[0]), static_cast<double>(t),
                               static_cast<double>(line.dim), x, err});
        c2.x.push_back(x);
        c2.y.push_back(err);
      }
      const LinearFit f2 = fit_line(as_vector(c2.x), as_vector(c2.y));
      report.notes.push_back("process 2 " + label + ": slope=" + std::to_string(f2.slope) +
                             " r2=" + std::to_string(f2.r_squared));
      report.curves.push_back(std::move(c2));
    }
  }
  return report;
}

ExperimentReport experiment_convergence(const ConvergenceConfig& config) {
  require(config.iterations >= 2, "experiment_convergence: need at least two iterations");
  require(!config.sampling_counts.empty() && !config.running_ranks.empty(),
          "experiment_convergence: empty configuration axes");

  const DiffusionSpec spec = make_lowrank_har_spec(config.construction);
  const VarCoefficients coeffs = high_to_low_frequency(spec);
  const Tensor3& truth = coeffs.tensor;
  const double truth_norm = truth.norm();
  const Index p = coeffs.lags();

  const HighFreqPanel panel =
      simulate(spec, config.days, config.steps_per_day, mix_keys(config.seed, 11));

  ExperimentReport report;
  report.experiment_id = "convergence";
  report.replications = 1;
  report.master_seed = config.seed;
  report.columns = {"m", "r1", "r2", "r3", "initial_error", "terminal_error"};

  for (int m : config.sampling_counts) {
    const RealizedPanel centered =
        center_and_transform(realized_volatility(panel, m), false);
    const RegressionDesign design = build_design(centered, p);
    // The iterates start at zero, so the step controls how far the recorded
    // window travels. The default is large enough that twenty iterations show
    // visible decay and the running-rank choices separate, yet small enough
    // that the sparsely sampled panels do not overshoot toward their
    // noise-dominated sample optimum inside the window.
    const double step = config.step_size.value_or(0.05);
    for (const Ranks& rr : config.running_ranks) {
      PgdConfig cfg;
      cfg.ranks = rr;
      cfg.running_ranks = rr;
      cfg.step_size = step;
      cfg.max_iterations = config.iterations;
      cfg.tolerance = 0.0;  // always run the full iteration budget
      cfg.record_iterates = true;
      const FitResult fit = fit_mlr(design, cfg);

      ExperimentReport::Curve curve;
      curve.name = "m=" + std::to_string(m) + " ranks=(" + std::to_string(rr[0]) + "," +
                   std::to_string(rr[1]) + "," + std::to_string(rr[2]) + ")";
      for (std::size_t k = 0; k < fit.iterates.size(); ++k) {
        curve.x.push_back(static_cast<double>(k + 1));
        curve.y.push_back((fit.iterates[k] - truth).norm() / truth_norm);
      }
      report.rows.push_back({static_cast<double>(m), static_cast<double>(rr[0]),
                             static_cast<double>(rr[1]), static_cast<double>(rr[2]),
                             curve.y.front(), curve.y.back()});
      report.curves.push_back(std::move(curve));
    }
  }
  return report;
}

}  // namespace mlrhar
