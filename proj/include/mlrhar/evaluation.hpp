#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlrhar/common.hpp"
#include "mlrhar/diffusion.hpp"
#include "mlrhar/estimators.hpp"
#include "mlrhar/har.hpp"

namespace mlrhar {

enum class RefitPolicy { RefitEachStep, FixedCoefficients };

// Model run inside each rolling window. When `oracle` is set the tensor is
// used as-is at every step (no fitting); a zero oracle therefore forecasts
// the per-window mean. Under FixedCoefficients the model is fit on the first
// window only, while the window mean (and log transform) is still recomputed
// every step from the trailing data.
struct ForecastConfig {
  Index lags = 22;
  bool log_scale = false;
  bool center = true;  // subtract the window mean before fitting and predicting
  RefitPolicy refit = RefitPolicy::RefitEachStep;
  FitMethod method = FitMethod::MLR;
  PgdConfig pgd;       // MLR settings; ranks must be set by the caller
  Index mri_rank = 1;  // MRI only
  std::optional<Tensor3> oracle;
};

struct ForecastRun {
  Eigen::MatrixXd forecasts;  // horizon x N, original measure scale
  Eigen::MatrixXd realized;   // horizon x N, original measure scale
  std::vector<char> valid;    // per-step flag; fit failures leave a step unscored
  Index window = 0;
  Index horizon = 0;
  std::string model;
  RefitPolicy refit = RefitPolicy::RefitEachStep;
  Index failures = 0;
  std::vector<std::string> warnings;
};

// One-step-ahead rolling forecasts: for each step the trailing `window` days
// are centered (and optionally logged), the model is fit per the refit
// policy, and the prediction is mapped back to the original scale.
ForecastRun rolling_forecast(const RealizedPanel& panel, const ForecastConfig& config,
                             Index window, Index horizon);

// Per-asset QLIKE over the valid steps: mean of r - log r - 1 with
// r = realized/forecast. Both scales must be strictly positive.
Eigen::VectorXd qlike(const ForecastRun& run);

// Distance between the column spaces of two p x k full-column-rank matrices:
// sqrt(1 - ||Q1^T Q2||_F^2 / k) after orthonormalising both, equal to the
// root mean square sine of the principal angles. Lies in [0, 1].
double subspace_discrepancy(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v);

struct ExperimentReport {
  std::string experiment_id;
  std::vector<std::string> columns;       // names of the row entries
  std::vector<std::vector<double>> rows;  // numeric summary table
  struct Curve {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
  };
  std::vector<Curve> curves;
  Index replications = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::string> notes;
};

// How the gradient-descent fits inside the experiments are initialised: from
// zero, or from the rank-truncated OLS estimate when the design allows it.
enum class MlrInit { Zero, ProjectedOls };

// Experiment: estimator bias and variance across sample sizes. Data come
// from the heterogeneous diffusion construction; realized volatility at each
// sampling count is centered and fit by OLS, the index model, and the
// low-rank estimator. Reports squared mean absolute deviation, the largest
// eigenvalue of the empirical covariance of the estimates (EVar), and the
// replication average of the plug-in asymptotic counterpart (AVar).
struct AsymptoticsConfig {
  LowRankHarConfig construction;  // n_assets fixes N
  std::vector<Index> sample_sizes = {1000, 2000, 3000};
  std::vector<int> sampling_counts = {78, 780};
  int steps_per_day = 780;
  Index replications = 200;
  std::uint64_t seed = 61001;
  Index threads = 0;  // 0: hardware default
  Index mri_rank = 2;
  PgdConfig pgd;  // ranks filled from the construction's certified ranks
  MlrInit init = MlrInit::ProjectedOls;
};
ExperimentReport experiment_asymptotics(const AsymptoticsConfig& config);

// Experiment: estimation error against the model-dimension rate. Process 1
// simulates the autoregression exactly; process 2 adds measurement noise
// with variance 1/sqrt(m), m = T^4, and reports the adjusted error
// sqrt(T/d) * error against T^{3/2} / m^{1/4}.
struct ErrorBoundConfig {
  std::vector<Index> dims = {10, 20, 25};
  std::vector<Ranks> rank_sets = {{2, 2, 2}, {3, 3, 3}};
  Index lags = 22;
  double core_norm = 0.5;
  std::vector<Index> sample_sizes_model = {400, 700, 1100, 1600, 2200};
  std::vector<Index> sample_sizes_noise = {100, 150, 200, 250, 300};
  Index replications = 100;
  std::uint64_t seed = 61002;
  Index threads = 0;
  PgdConfig pgd;
  bool run_noise_process = true;
};
ExperimentReport experiment_error_bound(const ErrorBoundConfig& config);

// Experiment: per-iteration convergence of the projected gradient loop at
// several running ranks and sampling counts, on one simulated panel. Curves
// hold ||A_k - A||_F / ||A||_F for the first `iterations` steps.
struct ConvergenceConfig {
  LowRankHarConfig construction;  // defaults overridden to N=30 by the caller
  Index days = 1000;
  int steps_per_day = 780;
  std::vector<int> sampling_counts = {78, 390, 780};
  std::vector<Ranks> running_ranks = {{2, 2, 3}, {5, 5, 5}, {10, 10, 10}};
  Index iterations = 20;
  std::uint64_t seed = 61003;
  std::optional<double> step_size;  // defaults to 0.05; see experiment_convergence
};
ExperimentReport experiment_convergence(const ConvergenceConfig& config);

}  // namespace mlrhar
