#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "mlrhar/common.hpp"
#include "mlrhar/diffusion.hpp"
#include "mlrhar/har.hpp"
#include "mlrhar/tensor.hpp"

namespace mlrhar {

// Lagged regression view of a centered panel: row n holds the response y_n
// and the stacked predictors (y_{n-1}^T, ..., y_{n-P}^T). Second moments are
// cached because every fit below works off them alone; the loss divisor is
// the full panel length t, not the number of usable rows.
struct RegressionDesign {
  Eigen::MatrixXd responses;   // (t-p) x n
  Eigen::MatrixXd predictors;  // (t-p) x (n*p), lag-1 block first
  Index t = 0;
  Index n = 0;
  Index p = 0;
  Eigen::MatrixXd gram;   // predictors^T predictors
  Eigen::MatrixXd cross;  // responses^T predictors
  Eigen::MatrixXd yy;     // responses^T responses

  Index samples() const { return t - p; }
};

RegressionDesign build_design(const RealizedPanel& panel, Index p);

// Moments-only design with empty data blocks. Sufficient for every fit and
// loss evaluation here; lets experiment drivers grow Gram matrices
// incrementally instead of rebuilding them per sample size.
RegressionDesign design_from_moments(Eigen::MatrixXd gram, Eigen::MatrixXd cross,
                                     Eigen::MatrixXd yy, Index t, Index n, Index p);

// (1/t) sum of squared one-step residuals, and its gradient as a tensor of
// the same shape as the coefficient tensor.
double loss(const RegressionDesign& design, const Tensor3& coeffs);
Tensor3 loss_gradient(const RegressionDesign& design, const Tensor3& coeffs);

// Residual second-moment matrix (Y - fitted)^T (Y - fitted) / samples.
Eigen::MatrixXd residual_covariance(const RegressionDesign& design, const Tensor3& coeffs);

enum class FitMethod { OLS, MRI, MLR };
const char* method_name(FitMethod method);

struct FitResult {
  Tensor3 tensor{0, 0, 0};
  FitMethod method = FitMethod::OLS;
  Ranks ranks{0, 0, 0};
  std::vector<double> loss_trace;  // loss after each iteration (first entry: initializer)
  Index iterations = 0;
  bool converged = true;
  double final_loss = 0.0;    // at the returned tensor
  double running_loss = 0.0;  // before the final rank projection; equals final_loss for OLS/MRI
  std::string warning;
  std::vector<Tensor3> iterates;  // filled only when PgdConfig::record_iterates is set
};

struct PgdConfig {
  Ranks ranks{1, 1, 1};
  std::optional<Ranks> running_ranks;  // defaults to ranks; must dominate them entrywise
  std::optional<double> step_size;     // defaults to 2 / (3 * lambda_max(gram / t))
  Index max_iterations = 500;
  double tolerance = 1e-7;  // on the Frobenius change between successive iterates
  std::optional<Tensor3> initializer;  // defaults to the zero tensor
  bool certify_ranks = false;          // verify the running-rank constraint each iteration
  bool record_iterates = false;        // keep every post-projection iterate in the result
};

// Stable default step for the projected gradient loop, 2/3 of the inverse
// curvature bound lambda_max(Hessian)/2 = lambda_max(gram/t).
double suggested_step_size(const RegressionDesign& design);

FitResult fit_ols(const RegressionDesign& design);

// Index-model estimator: every lag matrix shares the same r2-dimensional row
// space, A_l = B_l U2^T. Solved by alternating least squares from the
// rank-truncated OLS mode-2 unfolding, so its loss never exceeds that of the
// projected OLS start.
FitResult fit_mri(const RegressionDesign& design, Index r2, Index max_iterations = 100,
                  double tolerance = 1e-12);

// Projected gradient descent: gradient step, then sequential mode-wise rank
// truncation at the running ranks; one final projection to the target ranks.
FitResult fit_mlr(const RegressionDesign& design, const PgdConfig& config);

// Parameter count of the rank-(r1,r2,r3) model on an N x N x P tensor:
// r1 r2 r3 + (N - r1) r1 + (N - r2) r2 + (P - r3) r3.
Index model_dimension(Index n, Index p, const Ranks& ranks);

struct RankSelection {
  Ranks ranks{0, 0, 0};
  double bic = 0.0;
  std::vector<std::pair<Ranks, double>> table;  // every scored grid point
  std::vector<std::string> warnings;            // skipped grid points
};

// All rank triples with 1 <= r1, r2 <= min(max_rank, n) and
// 1 <= r3 <= min(max_rank, p), in lexicographic order.
std::vector<Ranks> full_rank_grid(Index n, Index p, Index max_rank = 10);

// BIC(r) = log(loss at the rank-r fit) + lambda * d(r) * log(t) / t,
// minimised over the grid; ties go to the smaller parameter count, then
// lexicographically. Grid points whose fit throws are skipped with a warning.
RankSelection select_ranks_bic(const RealizedPanel& panel, Index p, double lambda,
                               const std::vector<Ranks>& grid,
                               const PgdConfig& fit_template = {});

struct DiagnosticsReport {
  double mu_min = 0.0;  // extrema of the spectral density shape z -> A*(z)A(z) over |z|=1
  double mu_max = 0.0;
  double kappa_l = 0.0;  // lambda_min(sigma_eps) / mu_max
  double kappa_u = 0.0;  // lambda_max(sigma_eps) / mu_min
  Index d_m = 0;
  double kappa = 1.0;  // sub-Gaussian proxy, caller-supplied
  Index grid_points = 0;
  double grid_resolution = 0.0;  // angular spacing of the search grid
  double suggested_step = 0.0;   // 2 / (3 kappa_u)
};

// Grid search over z = e^{i theta} for the extreme eigenvalues of
// A*(z) A(z) with A(z) = I - sum_l A_l z^l, plus the curvature bounds and
// parameter count built from them. Requires stationary coefficients.
DiagnosticsReport dependence_diagnostics(const VarCoefficients& coeffs,
                                         const InnovationSpec& innov, const Ranks& ranks,
                                         Index grid_points = 720, double kappa = 1.0);

// Second-order structure feeding the asymptotic covariances: the stationary
// covariance of the stacked predictors and the innovation covariance.
struct AsymptoticInput {
  Eigen::MatrixXd gamma_star;  // np x np
  Eigen::MatrixXd sigma_eps;   // n x n
  Index n = 0;
  Index p = 0;
};

// Model-implied input via the companion Lyapunov equation.
AsymptoticInput model_asymptotic_input(const VarCoefficients& coeffs,
                                       const InnovationSpec& innov);
// Plug-in input from a design and a fitted tensor: gram/samples and the
// fit's residual covariance.
AsymptoticInput plugin_asymptotic_input(const RegressionDesign& design, const Tensor3& coeffs);

// Jacobian of vec(A_(1)) with respect to the Tucker parameters
// (core, U1, U2, U3), as four horizontal blocks.
Eigen::MatrixXd mlr_jacobian(const TuckerFactors& tucker);
// Jacobian of vec(A_(1)) with respect to the index-model parameters (H, U2),
// where H = coeffs x_2 U2^T.
Eigen::MatrixXd mri_jacobian(const Tensor3& coeffs, const Eigen::MatrixXd& u2);

// Asymptotic covariance of vec(A_(1)) per method, dense (n^2 p square):
// OLS gives gamma_star^{-1} (x) sigma_eps, the constrained methods the
// projected form H (H^T J H)^+ H^T with J = gamma_star (x) sigma_eps^{-1}.
// For MLR a Tucker factorization may be supplied; otherwise the truncated
// HOSVD at `ranks` is used. For MRI, U2 defaults to the top left singular
// vectors of the mode-2 unfolding. Intended for moderate n^2 p.
Eigen::MatrixXd asymptotic_covariance(const Tensor3& coeffs, const AsymptoticInput& input,
                                      FitMethod method, const Ranks& ranks,
                                      const std::optional<TuckerFactors>& tucker = std::nullopt);
Eigen::MatrixXd asymptotic_covariance(const VarCoefficients& coeffs, const InnovationSpec& innov,
                                      FitMethod method, const Ranks& ranks,
                                      const std::optional<TuckerFactors>& tucker = std::nullopt);

// Largest eigenvalue of the same matrix without forming it; scales to the
// experiment sizes.
double asymptotic_variance_max_eig(const Tensor3& coeffs, const AsymptoticInput& input,
                                   FitMethod method, const Ranks& ranks);

}  // namespace mlrhar
