#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "mlrhar/common.hpp"
#include "mlrhar/tensor.hpp"

namespace mlrhar {

// Continuous-time multivariate volatility model with daily feedback. Each
// asset's spot variance opens the day at the level the daily recursion
// dictates: omega plus the lag loadings (alpha slices 1..P) applied to the
// previous completed daily integrated variances plus the jump feedback (beta
// times the previous day's jump variation). Within the day it reverts toward
// omega, loads on the running integrated variance of all assets (alpha
// slice 1) and on accumulated squared jumps (beta), and carries an intraday
// squared-Brownian term that dies out toward the close (v). Jump sizes are
// zero-mean Gaussian with per-asset variance jump_size_variance, arriving at
// Poisson rate jump_intensity.
struct DiffusionSpec {
  Eigen::VectorXd omega;        // N, daily mean-reversion level, entries > 0
  Tensor3 alpha;                // N x N x P, slice l = lag-l loading matrix, entries >= 0
  Eigen::VectorXd beta;         // N, jump-variation loading, >= 0
  Eigen::VectorXd v;            // N, intraday squared-noise loading, >= 0
  Eigen::VectorXd drift;        // N, log-price drift
  Eigen::MatrixXd rho_b;        // N x N, correlation of the price Brownian motions
  Eigen::MatrixXd rho_w;        // N x N, correlation of the variance Brownian motions
  Eigen::MatrixXd rho;          // N x N, cross-correlation corr(dB_i, dW_j)
  Eigen::VectorXd jump_intensity;      // N, Poisson rate per day, >= 0
  Eigen::VectorXd jump_size_variance;  // N, variance of Gaussian jump sizes, >= 0
  Eigen::VectorXd init_sigma2;         // N, spot variance at time 0
  Eigen::VectorXd init_log_price;      // N

  Index assets() const { return omega.size(); }
  Index lags() const { return alpha.dim3(); }

  // Throws std::invalid_argument on structurally inadmissible parameters,
  // including correlation blocks whose joint 2N x 2N matrix is not PSD.
  void validate() const;
};

// Uniform-parameter convenience constructor: scalar parameters broadcast to
// every asset, identity Brownian correlations, cross-correlation bw_corr * I.
DiffusionSpec make_uniform_spec(Index n_assets, const Tensor3& alpha, double omega, double v,
                                double beta = 0.0, double bw_corr = 0.0, double drift = 0.0,
                                double jump_intensity = 0.0, double jump_size_variance = 0.0);

struct HighFreqPanel {
  Eigen::MatrixXd log_prices;  // (days*steps_per_day + 1) x N
  int steps_per_day = 0;
  Eigen::MatrixXd true_iv;     // days x N, per-day integrated variance (left-endpoint sums)
  Eigen::MatrixXd true_jump;   // days x N, per-day summed squared jump sizes
  Eigen::MatrixXd sigma2;      // (days*steps_per_day + 1) x N when recorded, else 0 x 0;
                               // integer-time rows hold the day-open level
  long total_jump_count = 0;

  Index assets() const { return log_prices.cols(); }
  Index days() const { return true_iv.rows(); }
};

// Euler scheme with steps_per_day steps per day. The first `lags` days are a
// burn-in (not recorded) whose lagged daily integrated variances start at
// omega. Identical inputs give identical output; streams are keyed by
// (seed, day, asset) so the generated path for day d does not depend on how
// many days follow it.
HighFreqPanel simulate(const DiffusionSpec& spec, Index days, int steps_per_day,
                       std::uint64_t seed, bool record_sigma2 = false);

enum class MeasureKind { RV, BV, LogRV, LogBV };

struct RealizedPanel {
  Eigen::MatrixXd values;  // days x N
  MeasureKind kind = MeasureKind::RV;
  int sampling_count = 0;          // intraday observations per day (0 = synthetic)
  bool centered = false;
  Eigen::VectorXd centering;       // per-asset mean that was subtracted
  Eigen::MatrixXd jump_estimates;  // days x N for bipower panels, else 0 x 0

  Index assets() const { return values.cols(); }
  Index days() const { return values.rows(); }
};

// Sum of squared log-price increments over m regular intraday intervals;
// m must divide steps_per_day.
RealizedPanel realized_volatility(const HighFreqPanel& panel, int m);

// Scaled products of adjacent absolute increments (robust to jumps), with the
// small-sample factor m/(m-1). jump_estimates holds max(RV - BV, 0).
RealizedPanel bipower_variation(const HighFreqPanel& panel, int m);

// Optional elementwise log then per-asset mean removal. The subtracted means
// accumulate in `centering` so the transform can be inverted later; applying
// the centering twice is a no-op up to floating-point error.
RealizedPanel center_and_transform(const RealizedPanel& panel, bool log_transform);

}  // namespace mlrhar
