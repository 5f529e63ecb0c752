#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "mlrhar/common.hpp"
#include "mlrhar/diffusion.hpp"
#include "mlrhar/tensor.hpp"

namespace mlrhar {

// The three entire matrix functions mapping continuous-time loadings to daily
// autoregressive coefficients:
//   rho1 = sum_k a^k/(k+1)!   (= a^{-1}(e^a - I) when a is invertible)
//   rho2 = sum_k a^k/(k+2)!   rho3 = sum_k a^k/(k+3)!
// At a = 0 they reduce to I, I/2 and I/6.
struct RhoTriple {
  Eigen::MatrixXd rho1, rho2, rho3;
};

// Power-series evaluation; requires spectral_radius(alpha1) < 1.
RhoTriple rho_functions(const Eigen::MatrixXd& alpha1);

// Daily VAR implied by a DiffusionSpec:
//   y_n = intercept + sum_j A_j y_{n-j} + jump_loading * J_{n-1} + eps_n
struct VarCoefficients {
  Tensor3 tensor;               // N x N x P, slice j = A_j
  Eigen::VectorXd intercept;    // zero for centered series
  Eigen::MatrixXd jump_loading; // N x N; 0 x 0 when the model carries no jump term

  Index assets() const { return tensor.dim1(); }
  Index lags() const { return tensor.dim3(); }
  Eigen::MatrixXd mode1() const { return tensor.mode1(); }
};

VarCoefficients high_to_low_frequency(const DiffusionSpec& spec);

// Lag-aggregation matrix (P x 3): column 1 picks the previous day, column 2
// averages the previous min(5, P) days, column 3 averages all P days.
Eigen::MatrixXd build_uc(Index p);

// NP x NP companion form: top block row (A_1 ... A_P), identity subdiagonal.
Eigen::MatrixXd companion_matrix(const VarCoefficients& coeffs);

struct StationarityReport {
  bool stationary = false;
  double spectral_radius = 0.0;
  double margin = 0.0;
};

StationarityReport check_stationarity(const VarCoefficients& coeffs, double margin = 1e-8);

// Stationary covariance of the stacked lag vector (y_{n-1}, ..., y_{n-P}):
// the NP x NP block-Toeplitz matrix solving Gamma = B Gamma B^T + E, where E
// has the innovation covariance in its leading block.
Eigen::MatrixXd stationary_autocovariance(const VarCoefficients& coeffs,
                                          const Eigen::MatrixXd& sigma_eps);

struct InnovationSpec {
  Eigen::MatrixXd sigma;  // innovation covariance, PSD

  static InnovationSpec identity(Index n) {
    return {Eigen::MatrixXd::Identity(n, n)};
  }
};

// Additive i.i.d. Gaussian measurement error with variance m^{-1/2} per
// coordinate, mimicking the sampling error of realized measures built from m
// intraday observations.
struct MeasurementNoise {
  double m = 0.0;
};

// Simulates the centered VAR (intercept and jump term ignored) after a
// burn-in of max(500, 10 P) steps. Draws are keyed so the first T days of a
// longer run coincide with a shorter run under the same seed. If latent_out
// is non-null it receives the noiseless series (equal to the returned values
// when no measurement noise is requested).
RealizedPanel generate_var(const VarCoefficients& coeffs, const InnovationSpec& innov, Index t,
                           std::uint64_t seed,
                           const std::optional<MeasurementNoise>& noise = std::nullopt,
                           Eigen::MatrixXd* latent_out = nullptr);

// Aggregated lag components x_n^{(k)} = sum_j u3(j,k) y_{n-j} for day n
// (1-based; valid for P+1 <= n <= days+1). Returns N x r3.
Eigen::MatrixXd heterogeneous_components(const RealizedPanel& panel, const Eigen::MatrixXd& u3,
                                         Index n);

// Randomized diffusion parameterization whose implied daily VAR tensor has
// multilinear ranks (2, 2, 3): the lag loadings are u_c-combinations of a
// positive rank-2 matrix, rescaled until the daily model is stationary.
struct LowRankHarConfig {
  Index n_assets = 5;
  Index lags = 22;
  double alpha1_spectral_radius = 0.65;  // target for the lag-1 loading
  double max_companion_radius = 0.95;    // shrink until the daily VAR satisfies this
  double omega = 0.2;
  double v = 0.4;
  double bw_corr = -0.6;
  std::uint64_t seed = 1;
};

DiffusionSpec make_lowrank_har_spec(const LowRankHarConfig& cfg);

// Random VAR coefficient tensor with exact multilinear ranks: orthonormal
// factors from SVDs of Gaussian matrices, Gaussian core rescaled to
// frobenius_norm, redrawn until the companion radius is below max_radius.
VarCoefficients random_lowrank_var(Index n, Index p, const Ranks& ranks, double frobenius_norm,
                                   std::uint64_t seed, double max_radius = 0.98);

}  // namespace mlrhar
