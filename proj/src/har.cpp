#include "mlrhar/har.hpp"

#include <cmath>
#include <deque>

#include "mlrhar/numeric.hpp"
#include "mlrhar/rng.hpp"

namespace mlrhar {

RhoTriple rho_functions(const Eigen::MatrixXd& alpha1) {
  require(alpha1.rows() == alpha1.cols(), "rho_functions: matrix must be square");
  require(alpha1.allFinite(), "rho_functions: non-finite entry");
  require(spectral_radius(alpha1) < 1.0, "rho_functions: spectral radius must be below 1");
  const Index n = alpha1.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  // term_j holds alpha^k/(k+j)!; advance with term *= alpha/(k+j+1).
  Eigen::MatrixXd t1 = eye, t2 = eye / 2.0, t3 = eye / 6.0;
  RhoTriple out{t1, t2, t3};
  for (int k = 0; k < 300; ++k) {
    t1 = (t1 * alpha1).eval() / static_cast<double>(k + 2);
    t2 = (t2 * alpha1).eval() / static_cast<double>(k + 3);
    t3 = (t3 * alpha1).eval() / static_cast<double>(k + 4);
    out.rho1 += t1;
    out.rho2 += t2;
    out.rho3 += t3;
    const double scale = out.rho1.norm() + out.rho2.norm() + out.rho3.norm();
    if (t1.norm() + t2.norm() + t3.norm() <= 1e-17 * scale) break;
  }
  return out;
}

VarCoefficients high_to_low_frequency(const DiffusionSpec& spec) {
  spec.validate();
  const Index n = spec.assets();
  const Index p = spec.lags();
  const RhoTriple rho = rho_functions(spec.alpha.slice3(0));
  const Eigen::MatrixXd gain = rho.rho1 - rho.rho2;

  VarCoefficients out;
  out.tensor = Tensor3(n, n, p);
  for (Index l = 0; l < p; ++l) out.tensor.set_slice3(l, gain * spec.alpha.slice3(l));
  const Eigen::VectorXd jump_mean =
      spec.beta.cwiseProduct(spec.jump_size_variance).cwiseProduct(spec.jump_intensity);
  out.intercept = rho.rho1 * spec.omega + rho.rho2 * jump_mean + (rho.rho2 - 2.0 * rho.rho3) * spec.v;
  out.jump_loading = gain * spec.beta.asDiagonal();
  return out;
}

Eigen::MatrixXd build_uc(Index p) {
  require(p >= 1, "build_uc: need at least one lag");
  Eigen::MatrixXd uc = Eigen::MatrixXd::Zero(p, 3);
  uc(0, 0) = 1.0;
  const Index week = std::min<Index>(5, p);
  uc.col(1).head(week).setConstant(1.0 / static_cast<double>(week));
  uc.col(2).setConstant(1.0 / static_cast<double>(p));
  return uc;
}

Eigen::MatrixXd companion_matrix(const VarCoefficients& coeffs) {
  const Index n = coeffs.assets(), p = coeffs.lags();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n * p, n * p);
  b.topRows(n) = coeffs.mode1();
  if (p > 1)
    b.block(n, 0, n * (p - 1), n * (p - 1)) =
        Eigen::MatrixXd::Identity(n * (p - 1), n * (p - 1));
  return b;
}

StationarityReport check_stationarity(const VarCoefficients& coeffs, double margin) {
  require(margin >= 0.0, "check_stationarity: negative margin");
  StationarityReport rep;
  rep.margin = margin;
  rep.spectral_radius = spectral_radius(companion_matrix(coeffs));
  rep.stationary = rep.spectral_radius < 1.0 - margin;
  return rep;
}

Eigen::MatrixXd stationary_autocovariance(const VarCoefficients& coeffs,
                                          const Eigen::MatrixXd& sigma_eps) {
  const Index n = coeffs.assets(), p = coeffs.lags();
  require(sigma_eps.rows() == n && sigma_eps.cols() == n,
          "stationary_autocovariance: innovation covariance shape mismatch");
  const StationarityReport rep = check_stationarity(coeffs);
  ensure(rep.stationary,
         "stationary_autocovariance: model is not stationary (companion radius " +
             std::to_string(rep.spectral_radius) + ")");
  Eigen::MatrixXd embed = Eigen::MatrixXd::Zero(n * p, n * p);
  embed.topLeftCorner(n, n) = sigma_eps;
  return solve_discrete_lyapunov(companion_matrix(coeffs), embed);
}

RealizedPanel generate_var(const VarCoefficients& coeffs, const InnovationSpec& innov, Index t,
                           std::uint64_t seed, const std::optional<MeasurementNoise>& noise,
                           Eigen::MatrixXd* latent_out) {
  const Index n = coeffs.assets(), p = coeffs.lags();
  require(t >= 1, "generate_var: need at least one observation");
  require(innov.sigma.rows() == n && innov.sigma.cols() == n,
          "generate_var: innovation covariance shape mismatch");
  const StationarityReport rep = check_stationarity(coeffs);
  ensure(rep.stationary, "generate_var: model is not stationary");

  const Eigen::MatrixXd root = sqrt_psd(innov.sigma);
  const Index burn = std::max<Index>(500, 10 * p);
  const Eigen::MatrixXd mode1 = coeffs.mode1();

  double noise_sd = 0.0;
  if (noise) {
    require(noise->m > 0.0, "generate_var: measurement noise m must be positive");
    noise_sd = std::pow(noise->m, -0.25);  // variance m^{-1/2}
  }

  KeyedRng innov_rng(seed, 11);
  KeyedRng noise_rng(seed, 13);
  Eigen::VectorXd z(n);
  Eigen::VectorXd lagged = Eigen::VectorXd::Zero(n * p);  // (y_{n-1}, ..., y_{n-P})
  Eigen::MatrixXd latent(t, n);
  Eigen::MatrixXd values(t, n);
  for (Index step = 0; step < burn + t; ++step) {
    for (Index i = 0; i < n; ++i) z(i) = innov_rng.normal();
    Eigen::VectorXd y = mode1 * lagged + root * z;
    // shift the lag stack: newest lag block first
    if (p > 1) {
      Eigen::VectorXd shifted(n * p);
      shifted.tail(n * (p - 1)) = lagged.head(n * (p - 1));
      shifted.head(n) = y;
      lagged = shifted;
    } else {
      lagged = y;
    }
    if (step >= burn) {
      const Index row = step - burn;
      latent.row(row) = y.transpose();
      if (noise) {
        for (Index i = 0; i < n; ++i) values(row, i) = y(i) + noise_sd * noise_rng.normal();
      } else {
        values.row(row) = y.transpose();
      }
    }
  }

  if (latent_out) *latent_out = latent;
  RealizedPanel panel;
  panel.values = noise ? values : latent;
  panel.kind = MeasureKind::RV;
  panel.sampling_count = 0;
  // The simulated series is the centered process itself; mark it so designs
  // can be built on it directly.
  panel.centered = true;
  panel.centering = Eigen::VectorXd::Zero(n);
  return panel;
}

Eigen::MatrixXd heterogeneous_components(const RealizedPanel& panel, const Eigen::MatrixXd& u3,
                                         Index n) {
  const Index days = panel.days(), assets = panel.assets();
  const Index p = u3.rows();
  require(p >= 1 && u3.cols() >= 1, "heterogeneous_components: empty aggregation matrix");
  require(n >= p + 1 && n <= days + 1,
          "heterogeneous_components: day index outside the valid lag window");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(assets, u3.cols());
  for (Index j = 1; j <= p; ++j)
    out += panel.values.row(n - j - 1).transpose() * u3.row(j - 1);  // day n-j is row n-j-1
  return out;
}

DiffusionSpec make_lowrank_har_spec(const LowRankHarConfig& cfg) {
  const Index n = cfg.n_assets, p = cfg.lags;
  require(n >= 1 && p >= 1, "make_lowrank_har_spec: bad dimensions");
  require(cfg.alpha1_spectral_radius > 0.0 && cfg.alpha1_spectral_radius < 1.0,
          "make_lowrank_har_spec: alpha1 spectral radius must lie in (0,1)");

  KeyedRng rng(cfg.seed, 17);
  // Positive rank-2 base with a shared row space: each block of alpha* is
  // a g_c b^T with strictly positive factors. The matrix alpha* then has rank
  // two, every lag loading inherits nonnegativity, and the slice stack keeps
  // a two-dimensional row space as well, so the assembled tensor certifies
  // multilinear ranks (2, 2, 3) rather than letting mode 2 fill up.
  Eigen::MatrixXd a(n, 2), b(n, 2);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = std::abs(rng.normal()) + 0.1;
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = std::abs(rng.normal()) + 0.1;
  // The daily block carries nearly all of the mass. Equal-sized blocks would
  // smear the loading thinly over every lag, leaving a persistent process
  // whose one-day-ahead predictable variance sits far below the measurement
  // noise of sparsely sampled realized volatility. Keeping the weekly and
  // monthly blocks small but nonzero preserves the mode-3 rank of the stack
  // while concentrating forecastable signal at the daily horizon.
  const double block_scale[3] = {1.0, 0.02, 0.01};
  Eigen::MatrixXd alpha_star(n, 3 * n);  // blocks (daily, weekly, monthly)
  for (Index c = 0; c < 3; ++c) {
    Eigen::Matrix2d core;
    for (Index i = 0; i < 4; ++i) core.data()[i] = std::abs(rng.normal()) + 0.1;
    alpha_star.middleCols(c * n, n) = block_scale[c] * (a * core * b.transpose());
  }

  const Eigen::MatrixXd uc = build_uc(p);
  auto assemble = [&](const Eigen::MatrixXd& star) {
    Tensor3 alpha(n, n, p);
    for (Index l = 0; l < p; ++l) {
      Eigen::MatrixXd slab = Eigen::MatrixXd::Zero(n, n);
      for (Index c = 0; c < 3; ++c)
        if (uc(l, c) != 0.0) slab += uc(l, c) * star.middleCols(c * n, n);
      alpha.set_slice3(l, slab);
    }
    return alpha;
  };

  // One linear rescale pins the lag-1 loading's spectral radius to the target.
  {
    Tensor3 alpha = assemble(alpha_star);
    const double r = spectral_radius(alpha.slice3(0));
    ensure(r > 0.0, "make_lowrank_har_spec: degenerate draw");
    alpha_star *= cfg.alpha1_spectral_radius / r;
  }

  // The daily-model companion radius is not monotone-linked to the lag-1
  // radius, so shrink geometrically until the implied VAR is comfortably
  // stationary.
  for (int attempt = 0; attempt < 200; ++attempt) {
    DiffusionSpec spec = make_uniform_spec(n, assemble(alpha_star), cfg.omega, cfg.v,
                                           /*beta=*/0.0, cfg.bw_corr);
    const VarCoefficients coeffs = high_to_low_frequency(spec);
    if (spectral_radius(companion_matrix(coeffs)) <= cfg.max_companion_radius) return spec;
    alpha_star *= 0.9;
  }
  throw std::runtime_error("make_lowrank_har_spec: failed to reach a stationary configuration");
}

VarCoefficients random_lowrank_var(Index n, Index p, const Ranks& ranks, double frobenius_norm,
                                   std::uint64_t seed, double max_radius) {
  require(n >= 1 && p >= 1, "random_lowrank_var: bad dimensions");
  require(ranks[0] >= 1 && ranks[0] <= n && ranks[1] >= 1 && ranks[1] <= n && ranks[2] >= 1 &&
              ranks[2] <= p,
          "random_lowrank_var: ranks out of range");
  require(frobenius_norm > 0.0, "random_lowrank_var: norm must be positive");

  for (std::uint64_t attempt = 0; attempt < 200; ++attempt) {
    KeyedRng rng(seed, 19, attempt);
    auto gaussian = [&rng](Index rows, Index cols) {
      Eigen::MatrixXd m(rows, cols);
      for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
      return m;
    };
    auto orthonormal = [&](Index rows, Index cols) {
      Eigen::BDCSVD<Eigen::MatrixXd> svd(gaussian(rows, cols), Eigen::ComputeThinU);
      return fix_singular_vector_signs(svd.matrixU().leftCols(cols));
    };

    TuckerFactors f;
    f.u1 = orthonormal(n, ranks[0]);
    f.u2 = orthonormal(n, ranks[1]);
    f.u3 = orthonormal(p, ranks[2]);
    Eigen::VectorXd core = Eigen::VectorXd::NullaryExpr(
        ranks[0] * ranks[1] * ranks[2], [&rng](Index) { return rng.normal(); });
    core *= frobenius_norm / core.norm();
    f.core = Tensor3::from_data(ranks[0], ranks[1], ranks[2], core);

    VarCoefficients coeffs;
    coeffs.tensor = f.reconstruct();
    coeffs.intercept = Eigen::VectorXd::Zero(n);
    coeffs.jump_loading = Eigen::MatrixXd();
    if (spectral_radius(companion_matrix(coeffs)) <= max_radius) return coeffs;
  }
  throw std::runtime_error("random_lowrank_var: no stationary draw found");
}

}  // namespace mlrhar
