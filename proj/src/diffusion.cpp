#include "mlrhar/diffusion.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <vector>

#include "mlrhar/numeric.hpp"
#include "mlrhar/rng.hpp"

namespace mlrhar {

namespace {

void check_correlation_block(const Eigen::MatrixXd& m, Index n, const char* name) {
  require(m.rows() == n && m.cols() == n, std::string(name) + ": shape mismatch");
  require(m.allFinite(), std::string(name) + ": non-finite entry");
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12, std::string(name) + ": not symmetric");
  for (Index i = 0; i < n; ++i)
    require(std::abs(m(i, i) - 1.0) <= 1e-12, std::string(name) + ": diagonal must be 1");
}

Eigen::MatrixXd joint_correlation(const DiffusionSpec& spec) {
  const Index n = spec.assets();
  Eigen::MatrixXd joint(2 * n, 2 * n);
  joint.topLeftCorner(n, n) = spec.rho_b;
  joint.topRightCorner(n, n) = spec.rho;
  joint.bottomLeftCorner(n, n) = spec.rho.transpose();
  joint.bottomRightCorner(n, n) = spec.rho_w;
  return joint;
}

}  // namespace

void DiffusionSpec::validate() const {
  const Index n = assets();
  require(n >= 1, "DiffusionSpec: need at least one asset");
  require(alpha.dim1() == n && alpha.dim2() == n && alpha.dim3() >= 1,
          "DiffusionSpec: alpha tensor must be N x N x P");
  require((omega.array() > 0.0).all(), "DiffusionSpec: omega entries must be positive");
  auto check_vec = [n](const Eigen::VectorXd& v, bool nonneg, const char* name) {
    require(v.size() == n, std::string(name) + ": length mismatch");
    require(v.allFinite(), std::string(name) + ": non-finite entry");
    if (nonneg) require((v.array() >= 0.0).all(), std::string(name) + ": negative entry");
  };
  check_vec(beta, true, "DiffusionSpec beta");
  check_vec(v, true, "DiffusionSpec v");
  check_vec(drift, false, "DiffusionSpec drift");
  check_vec(jump_intensity, true, "DiffusionSpec jump_intensity");
  check_vec(jump_size_variance, true, "DiffusionSpec jump_size_variance");
  check_vec(init_sigma2, true, "DiffusionSpec init_sigma2");
  check_vec(init_log_price, false, "DiffusionSpec init_log_price");

  require(alpha.all_finite() && alpha.data().minCoeff() >= 0.0,
          "DiffusionSpec: alpha entries must be nonnegative");
  require(spectral_radius(alpha.slice3(0)) < 1.0,
          "DiffusionSpec: lag-1 loading must have spectral radius below 1");

  check_correlation_block(rho_b, n, "DiffusionSpec rho_b");
  check_correlation_block(rho_w, n, "DiffusionSpec rho_w");
  require(rho.rows() == n && rho.cols() == n && rho.allFinite(),
          "DiffusionSpec rho: shape mismatch");
  require(rho.cwiseAbs().maxCoeff() <= 1.0, "DiffusionSpec rho: entries must lie in [-1, 1]");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(joint_correlation(*this));
  ensure(es.info() == Eigen::Success, "DiffusionSpec: correlation eigendecomposition failed");
  require(es.eigenvalues().minCoeff() >= -1e-8,
          "DiffusionSpec: joint Brownian correlation matrix is not positive semidefinite");
}

DiffusionSpec make_uniform_spec(Index n_assets, const Tensor3& alpha, double omega, double v,
                                double beta, double bw_corr, double drift, double jump_intensity,
                                double jump_size_variance) {
  DiffusionSpec spec;
  spec.omega = Eigen::VectorXd::Constant(n_assets, omega);
  spec.alpha = alpha;
  spec.beta = Eigen::VectorXd::Constant(n_assets, beta);
  spec.v = Eigen::VectorXd::Constant(n_assets, v);
  spec.drift = Eigen::VectorXd::Constant(n_assets, drift);
  spec.rho_b = Eigen::MatrixXd::Identity(n_assets, n_assets);
  spec.rho_w = Eigen::MatrixXd::Identity(n_assets, n_assets);
  spec.rho = bw_corr * Eigen::MatrixXd::Identity(n_assets, n_assets);
  spec.jump_intensity = Eigen::VectorXd::Constant(n_assets, jump_intensity);
  spec.jump_size_variance = Eigen::VectorXd::Constant(n_assets, jump_size_variance);
  spec.init_sigma2 = Eigen::VectorXd::Constant(n_assets, 0.01);
  spec.init_log_price = Eigen::VectorXd::Constant(n_assets, std::log(50.0));
  spec.validate();
  return spec;
}

HighFreqPanel simulate(const DiffusionSpec& spec, Index days, int steps_per_day,
                       std::uint64_t seed, bool record_sigma2) {
  spec.validate();
  require(days >= 1, "simulate: need at least one day");
  require(steps_per_day >= 1, "simulate: need at least one step per day");

  const Index n = spec.assets();
  const Index p = spec.lags();
  const int s = steps_per_day;
  const double dt = 1.0 / static_cast<double>(s);
  const double sqrt_dt = std::sqrt(dt);
  const Eigen::MatrixXd mix = sqrt_psd(joint_correlation(spec));
  const Eigen::MatrixXd alpha1 = spec.alpha.slice3(0);
  const bool any_jumps = (spec.jump_intensity.array() > 0.0).any();

  HighFreqPanel out;
  out.steps_per_day = s;
  out.log_prices.resize(days * s + 1, n);
  out.true_iv.resize(days, n);
  out.true_jump.resize(days, n);
  if (record_sigma2) out.sigma2.resize(days * s + 1, n);

  // Completed daily integrated variances for lags 1..P; burn-in seeds them at omega.
  std::vector<Eigen::VectorXd> lag_buffer(static_cast<std::size_t>(p), spec.omega);
  std::size_t lag_head = 0;  // most recent completed day
  auto lagged_iv = [&](Index l) -> const Eigen::VectorXd& {  // l in 1..P -> day d-l+1
    return lag_buffer[(lag_head + static_cast<std::size_t>(l - 1)) % lag_buffer.size()];
  };

  Eigen::VectorXd x = spec.init_log_price;
  Eigen::VectorXd jump_prev = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sig2_prev(n), day_start(n);
  Eigen::VectorXd u(2 * n), dbw(2 * n), run_iv(n), run_jump(n), z(n), jump_x(n), sig2(n);

  // The level the daily recursion dictates at the current day boundary: omega
  // plus the lag loadings applied to completed daily variances plus the jump
  // feedback. The spot variance is right-continuous here, so each day's
  // opening Euler step diffuses at exactly this level.
  auto recursion_anchor = [&]() {
    Eigen::VectorXd a = spec.omega + spec.beta.cwiseProduct(jump_prev);
    for (Index l = 1; l <= p; ++l) {
      const Eigen::MatrixXd slab = spec.alpha.slice3(l - 1);
      if (slab.cwiseAbs().maxCoeff() > 0.0) a.noalias() += slab * lagged_iv(l);
    }
    return a;
  };

  for (Index d = 0; d < p + days; ++d) {
    const bool recorded = d >= p;
    const Index day_row = d - p;

    day_start = d == 0 ? spec.init_sigma2 : recursion_anchor();
    sig2_prev = day_start;
    if (recorded) {
      if (day_row == 0) out.log_prices.row(0) = x.transpose();
      // Integer-time rows hold the day-open level, so a left-endpoint sum over
      // each day's rows reproduces the recorded integrated variance exactly.
      if (record_sigma2) out.sigma2.row(day_row * s) = sig2_prev.transpose();
    }

    std::vector<KeyedRng> norm_stream, jump_stream;
    norm_stream.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      norm_stream.emplace_back(seed, 101, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i));
    if (any_jumps) {
      jump_stream.reserve(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i)
        jump_stream.emplace_back(seed, 103, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i));
    }

    run_iv.setZero();
    run_jump.setZero();
    z.setZero();

    for (int k = 1; k <= s; ++k) {
      for (Index i = 0; i < n; ++i) {
        u(i) = norm_stream[static_cast<std::size_t>(i)].normal();
        u(n + i) = norm_stream[static_cast<std::size_t>(i)].normal();
      }
      dbw.noalias() = mix * u;
      dbw *= sqrt_dt;

      jump_x.setZero();
      if (any_jumps) {
        for (Index i = 0; i < n; ++i) {
          const double rate = spec.jump_intensity(i) * dt;
          if (rate <= 0.0) continue;
          const int count = jump_stream[static_cast<std::size_t>(i)].poisson(rate);
          for (int c = 0; c < count; ++c) {
            const double size = std::sqrt(spec.jump_size_variance(i)) *
                                jump_stream[static_cast<std::size_t>(i)].normal();
            jump_x(i) += size;
            run_jump(i) += size * size;
            ++out.total_jump_count;
          }
        }
      }

      x += spec.drift * dt + sig2_prev.cwiseSqrt().cwiseProduct(dbw.head(n)) + jump_x;
      run_iv += sig2_prev * dt;  // left-endpoint rule, matching the Euler update
      z += dbw.tail(n);

      const double frac = static_cast<double>(k) / static_cast<double>(s);
      sig2 = day_start + frac * (spec.omega - day_start);
      sig2.noalias() += alpha1 * run_iv;
      sig2 += spec.beta.cwiseProduct(run_jump);
      sig2 += (1.0 - frac) * spec.v.cwiseProduct(z.cwiseProduct(z));
      sig2 = sig2.cwiseMax(1e-12);

      if (recorded) {
        out.log_prices.row(day_row * s + k) = x.transpose();
        if (record_sigma2) out.sigma2.row(day_row * s + k) = sig2.transpose();
      }
      sig2_prev = sig2;
    }

    if (recorded) {
      out.true_iv.row(day_row) = run_iv.transpose();
      out.true_jump.row(day_row) = run_jump.transpose();
    }
    // Completed day becomes lag 1's value for the next day.
    lag_head = (lag_head + lag_buffer.size() - 1) % lag_buffer.size();
    lag_buffer[lag_head] = run_iv;
    jump_prev = run_jump;
  }
  if (record_sigma2) out.sigma2.row(days * s) = recursion_anchor().transpose();
  return out;
}

namespace {

Eigen::MatrixXd sampled_increments(const HighFreqPanel& panel, int m, Index day) {
  const int s = panel.steps_per_day;
  const int stride = s / m;
  Eigen::MatrixXd incr(m, panel.assets());
  const Index base = day * s;
  for (int k = 1; k <= m; ++k)
    incr.row(k - 1) =
        panel.log_prices.row(base + k * stride) - panel.log_prices.row(base + (k - 1) * stride);
  return incr;
}

void check_sampling(const HighFreqPanel& panel, int m, int min_m) {
  require(panel.steps_per_day >= 1 && panel.log_prices.rows() >= 2, "empty high-frequency panel");
  require(m >= min_m, "sampling count too small");
  require(panel.steps_per_day % m == 0, "m must divide steps_per_day");
}

}  // namespace

RealizedPanel realized_volatility(const HighFreqPanel& panel, int m) {
  check_sampling(panel, m, 1);
  RealizedPanel out;
  out.kind = MeasureKind::RV;
  out.sampling_count = m;
  out.centered = false;
  out.centering = Eigen::VectorXd::Zero(panel.assets());
  out.values.resize(panel.days(), panel.assets());
  for (Index d = 0; d < panel.days(); ++d)
    out.values.row(d) = sampled_increments(panel, m, d).array().square().colwise().sum();
  return out;
}

RealizedPanel bipower_variation(const HighFreqPanel& panel, int m) {
  check_sampling(panel, m, 2);
  const double factor = (std::numbers::pi / 2.0) * static_cast<double>(m) / static_cast<double>(m - 1);
  RealizedPanel out;
  out.kind = MeasureKind::BV;
  out.sampling_count = m;
  out.centered = false;
  out.centering = Eigen::VectorXd::Zero(panel.assets());
  out.values.resize(panel.days(), panel.assets());
  out.jump_estimates.resize(panel.days(), panel.assets());
  for (Index d = 0; d < panel.days(); ++d) {
    const Eigen::MatrixXd incr = sampled_increments(panel, m, d);
    const Eigen::MatrixXd abs = incr.cwiseAbs();
    Eigen::VectorXd bv =
        factor * (abs.topRows(m - 1).array() * abs.bottomRows(m - 1).array()).colwise().sum();
    Eigen::VectorXd rv = incr.array().square().colwise().sum();
    out.values.row(d) = bv.transpose();
    out.jump_estimates.row(d) = (rv - bv).cwiseMax(0.0).transpose();
  }
  return out;
}

RealizedPanel center_and_transform(const RealizedPanel& panel, bool log_transform) {
  require(panel.values.size() > 0, "center_and_transform: empty panel");
  RealizedPanel out = panel;
  if (log_transform) {
    require(panel.kind == MeasureKind::RV || panel.kind == MeasureKind::BV,
            "center_and_transform: panel is already on log scale");
    for (Index d = 0; d < out.days(); ++d)
      for (Index i = 0; i < out.assets(); ++i)
        require(out.values(d, i) > 0.0,
                "center_and_transform: log of nonpositive value at day " + std::to_string(d + 1) +
                    ", asset " + std::to_string(i + 1));
    out.values = out.values.array().log();
    out.kind = panel.kind == MeasureKind::RV ? MeasureKind::LogRV : MeasureKind::LogBV;
  }
  const Eigen::VectorXd mean = out.values.colwise().mean();
  out.values.rowwise() -= mean.transpose();
  if (out.centering.size() != out.assets()) out.centering = Eigen::VectorXd::Zero(out.assets());
  out.centering += mean;
  out.centered = true;
  return out;
}

}  // namespace mlrhar
