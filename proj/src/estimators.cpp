#include "mlrhar/estimators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "mlrhar/numeric.hpp"

namespace mlrhar {

namespace {

void check_tensor_dims(const RegressionDesign& design, const Tensor3& coeffs, const char* where) {
  require(coeffs.dim1() == design.n && coeffs.dim2() == design.n && coeffs.dim3() == design.p,
          std::string(where) + ": coefficient tensor does not match the design dimensions");
}

// Largest eigenvalue of a PSD matrix by power iteration; plenty for step-size
// and scaling purposes where 1% accuracy is enough.
double lambda_max_psd(const Eigen::MatrixXd& m) {
  const Index k = m.rows();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(k) +
                      Eigen::VectorXd::LinSpaced(k, 0.0, 0.5);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXd w = m.selfadjointView<Eigen::Lower>() * v;
    const double next = v.dot(w);
    const double scale = w.norm();
    if (scale <= 0.0) return 0.0;
    v = w / scale;
    if (std::abs(next - lambda) <= 1e-9 * std::max(1.0, std::abs(next)) && it > 2) return next;
    lambda = next;
  }
  return lambda;
}

}  // namespace

RegressionDesign build_design(const RealizedPanel& panel, Index p) {
  require(p >= 1, "build_design: need at least one lag");
  require(panel.centered, "build_design: panel must be centered first");
  const Index t = panel.days();
  const Index n = panel.assets();
  require(t > p, "build_design: panel length must exceed the lag order");

  RegressionDesign d;
  d.t = t;
  d.n = n;
  d.p = p;
  d.responses.resize(t - p, n);
  d.predictors.resize(t - p, n * p);
  for (Index row = 0; row < t - p; ++row) {
    const Index day = row + p;  // response day, 0-based
    d.responses.row(row) = panel.values.row(day);
    for (Index l = 1; l <= p; ++l)
      d.predictors.block(row, (l - 1) * n, 1, n) = panel.values.row(day - l);
  }
  d.gram = Eigen::MatrixXd::Zero(n * p, n * p);
  d.gram.selfadjointView<Eigen::Lower>().rankUpdate(d.predictors.transpose());
  d.gram = d.gram.selfadjointView<Eigen::Lower>();
  d.cross = d.responses.transpose() * d.predictors;
  d.yy = d.responses.transpose() * d.responses;
  return d;
}

RegressionDesign design_from_moments(Eigen::MatrixXd gram, Eigen::MatrixXd cross,
                                     Eigen::MatrixXd yy, Index t, Index n, Index p) {
  require(n >= 1 && p >= 1 && t > p, "design_from_moments: bad dimensions");
  require(gram.rows() == n * p && gram.cols() == n * p, "design_from_moments: gram shape");
  require(cross.rows() == n && cross.cols() == n * p, "design_from_moments: cross shape");
  require(yy.rows() == n && yy.cols() == n, "design_from_moments: yy shape");
  RegressionDesign d;
  d.t = t;
  d.n = n;
  d.p = p;
  d.gram = std::move(gram);
  d.cross = std::move(cross);
  d.yy = std::move(yy);
  return d;
}

double loss(const RegressionDesign& design, const Tensor3& coeffs) {
  check_tensor_dims(design, coeffs, "loss");
  const auto a1 = coeffs.mode1();
  const double quad = (a1 * design.gram).cwiseProduct(a1).sum();
  return (design.yy.trace() - 2.0 * a1.cwiseProduct(design.cross).sum() + quad) /
         static_cast<double>(design.t);
}

Tensor3 loss_gradient(const RegressionDesign& design, const Tensor3& coeffs) {
  check_tensor_dims(design, coeffs, "loss_gradient");
  const auto a1 = coeffs.mode1();
  Eigen::MatrixXd g = (2.0 / static_cast<double>(design.t)) * (a1 * design.gram - design.cross);
  return fold(g, 1, design.n, design.n, design.p);
}

Eigen::MatrixXd residual_covariance(const RegressionDesign& design, const Tensor3& coeffs) {
  check_tensor_dims(design, coeffs, "residual_covariance");
  const auto a1 = coeffs.mode1();
  Eigen::MatrixXd s = design.yy - design.cross * a1.transpose() - a1 * design.cross.transpose() +
                      a1 * design.gram * a1.transpose();
  s /= static_cast<double>(design.samples());
  return 0.5 * (s + s.transpose());
}

const char* method_name(FitMethod method) {
  switch (method) {
    case FitMethod::OLS: return "ols";
    case FitMethod::MRI: return "mri";
    case FitMethod::MLR: return "mlr";
  }
  return "unknown";
}

double suggested_step_size(const RegressionDesign& design) {
  const double top = lambda_max_psd(design.gram) / static_cast<double>(design.t);
  if (top <= 0.0) return 1.0;  // degenerate design; gradient is zero anyway
  return 2.0 / (3.0 * top);
}

FitResult fit_ols(const RegressionDesign& design) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(design.gram);
  bool singular = ldlt.info() != Eigen::Success;
  if (!singular) {
    const auto dvec = ldlt.vectorD();
    const double dmax = dvec.maxCoeff();
    singular = dmax <= 0.0 || dvec.minCoeff() <= dmax * 1e-13;
  }
  ensure(!singular,
         "fit_ols: predictor Gram matrix is numerically singular; add a ridge jitter to the "
         "panel or use more observations");
  Eigen::MatrixXd theta = ldlt.solve(design.cross.transpose());  // np x n

  FitResult r;
  r.tensor = fold(theta.transpose(), 1, design.n, design.n, design.p);
  r.method = FitMethod::OLS;
  r.ranks = {design.n, design.n, design.p};
  r.iterations = 1;
  r.converged = true;
  r.final_loss = r.running_loss = loss(design, r.tensor);
  r.loss_trace = {r.final_loss};
  return r;
}

FitResult fit_mri(const RegressionDesign& design, Index r2, Index max_iterations,
                  double tolerance) {
  require(r2 >= 1 && r2 <= design.n, "fit_mri: rank must lie in [1, N]");
  require(max_iterations >= 1, "fit_mri: need at least one iteration");

  FitResult ols = fit_ols(design);
  if (r2 == design.n) {
    ols.method = FitMethod::MRI;
    ols.ranks = {design.n, r2, design.p};
    return ols;
  }

  const Index n = design.n;
  const Index p = design.p;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matricize(ols.tensor, 2), Eigen::ComputeThinU);
  Eigen::MatrixXd u2 = svd.matrixU().leftCols(r2);

  auto sxx = [&](Index l, Index k) { return design.gram.block(l * n, k * n, n, n); };
  auto cyx = [&](Index l) { return design.cross.middleCols(l * n, n); };  // sum y x^{(l)T}

  FitResult r;
  r.method = FitMethod::MRI;
  r.ranks = {n, r2, p};
  Eigen::MatrixXd b_stack;  // n x (r2 p), lag blocks side by side
  double prev_loss = std::numeric_limits<double>::infinity();

  for (Index it = 1; it <= max_iterations; ++it) {
    // B-step: least squares on the per-lag index variables U2^T y_{n-l}.
    Eigen::MatrixXd gram_z(r2 * p, r2 * p);
    Eigen::MatrixXd cross_z(n, r2 * p);
    for (Index l = 0; l < p; ++l) {
      cross_z.middleCols(l * r2, r2) = cyx(l) * u2;
      for (Index k = 0; k < p; ++k)
        gram_z.block(l * r2, k * r2, r2, r2) = u2.transpose() * sxx(l, k) * u2;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram_z);
    ensure(ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() >
                                                ldlt.vectorD().maxCoeff() * 1e-14,
           "fit_mri: singular index Gram matrix");
    b_stack = ldlt.solve(cross_z.transpose()).transpose();

    Tensor3 fitted(n, n, p);
    for (Index l = 0; l < p; ++l)
      fitted.set_slice3(l, b_stack.middleCols(l * r2, r2) * u2.transpose());
    const double cur = loss(design, fitted);
    r.loss_trace.push_back(cur);
    r.iterations = it;
    r.tensor = std::move(fitted);
    if (prev_loss - cur <= tolerance * std::max(1.0, std::abs(cur))) {
      r.converged = true;
      break;
    }
    prev_loss = cur;
    if (it == max_iterations) {
      r.converged = false;
      break;
    }

    // U-step: normal equations for U2 given the lag loadings.
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n * r2, n * r2);
    Eigen::MatrixXd rhs_mat = Eigen::MatrixXd::Zero(n, r2);
    for (Index l = 0; l < p; ++l) {
      const Eigen::MatrixXd bl = b_stack.middleCols(l * r2, r2);
      rhs_mat += cyx(l).transpose() * bl;
      for (Index k = 0; k < p; ++k)
        m += kron(bl.transpose() * b_stack.middleCols(k * r2, r2), sxx(l, k));
    }
    Eigen::LDLT<Eigen::MatrixXd> uldlt(m);
    if (uldlt.info() != Eigen::Success ||
        uldlt.vectorD().minCoeff() <= uldlt.vectorD().maxCoeff() * 1e-14) {
      r.warning = "index update became singular; stopped at the last well-posed iterate";
      r.converged = false;
      break;
    }
    Eigen::VectorXd vec_u = uldlt.solve(Eigen::Map<const Eigen::VectorXd>(rhs_mat.data(), n * r2));
    Eigen::Map<const Eigen::MatrixXd> u_new(vec_u.data(), n, r2);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(u_new);
    u2 = qr.householderQ() * Eigen::MatrixXd::Identity(n, r2);
  }

  r.final_loss = r.running_loss = r.loss_trace.back();
  return r;
}

FitResult fit_mlr(const RegressionDesign& design, const PgdConfig& config) {
  const Index n = design.n;
  const Index p = design.p;
  const Ranks target = config.ranks;
  const Ranks running = config.running_ranks.value_or(target);
  const std::array<Index, 3> dims{n, n, p};
  for (int i = 0; i < 3; ++i) {
    require(target[i] >= 1 && target[i] <= running[i] && running[i] <= dims[static_cast<size_t>(i)],
            "fit_mlr: need 1 <= ranks <= running_ranks <= dimensions");
  }
  require(config.max_iterations >= 1, "fit_mlr: need at least one iteration");
  require(config.tolerance >= 0.0, "fit_mlr: negative tolerance");

  const double step = config.step_size.value_or(suggested_step_size(design));
  require(step > 0.0, "fit_mlr: step size must be positive");

  Tensor3 a = config.initializer.value_or(Tensor3(n, n, p));
  check_tensor_dims(design, a, "fit_mlr initializer");

  FitResult r;
  r.method = FitMethod::MLR;
  r.ranks = target;
  r.loss_trace.push_back(loss(design, a));
  r.converged = false;

  for (Index k = 1; k <= config.max_iterations; ++k) {
    Tensor3 next = project_tucker(a - step * loss_gradient(design, a), running);
    const double delta = (next - a).norm();
    a = std::move(next);
    r.loss_trace.push_back(loss(design, a));
    if (config.record_iterates) r.iterates.push_back(a);
    r.iterations = k;
    if (config.certify_ranks) {
      const Ranks mr = multilinear_ranks(a);
      ensure(mr[0] <= running[0] && mr[1] <= running[1] && mr[2] <= running[2],
             "fit_mlr: iterate violates the running-rank constraint");
    }
    if (delta < config.tolerance) {
      r.converged = true;
      break;
    }
  }

  r.running_loss = r.loss_trace.back();
  if (running != target) a = project_tucker(a, target);
  r.tensor = std::move(a);
  r.final_loss = loss(design, r.tensor);

  for (std::size_t i = 0; i + 1 < r.loss_trace.size(); ++i) {
    if (r.loss_trace[i + 1] > r.loss_trace[i] + 1e-12 * std::max(1.0, std::abs(r.loss_trace[i]))) {
      r.warning = "loss increased at iteration " + std::to_string(i + 1) +
                  "; consider a smaller step size";
      r.converged = false;
      break;
    }
  }
  return r;
}

Index model_dimension(Index n, Index p, const Ranks& ranks) {
  const Index r1 = ranks[0], r2 = ranks[1], r3 = ranks[2];
  require(r1 >= 1 && r1 <= n && r2 >= 1 && r2 <= n && r3 >= 1 && r3 <= p,
          "model_dimension: ranks out of range");
  return r1 * r2 * r3 + (n - r1) * r1 + (n - r2) * r2 + (p - r3) * r3;
}

std::vector<Ranks> full_rank_grid(Index n, Index p, Index max_rank) {
  require(max_rank >= 1, "full_rank_grid: max_rank must be positive");
  const Index m12 = std::min(max_rank, n);
  const Index m3 = std::min(max_rank, p);
  std::vector<Ranks> grid;
  grid.reserve(static_cast<std::size_t>(m12 * m12 * m3));
  for (Index r1 = 1; r1 <= m12; ++r1)
    for (Index r2 = 1; r2 <= m12; ++r2)
      for (Index r3 = 1; r3 <= m3; ++r3) grid.push_back({r1, r2, r3});
  return grid;
}

RankSelection select_ranks_bic(const RealizedPanel& panel, Index p, double lambda,
                               const std::vector<Ranks>& grid, const PgdConfig& fit_template) {
  require(!grid.empty(), "select_ranks_bic: empty rank grid");
  const RegressionDesign design = build_design(panel, p);
  const double log_t_over_t =
      std::log(static_cast<double>(design.t)) / static_cast<double>(design.t);

  RankSelection sel;
  bool have_best = false;
  Index best_dim = 0;
  for (const Ranks& ranks : grid) {
    PgdConfig cfg = fit_template;
    cfg.ranks = ranks;
    cfg.running_ranks = ranks;
    const Index dim = model_dimension(design.n, design.p, ranks);
    double bic;
    try {
      const FitResult fit = fit_mlr(design, cfg);
      const double l = std::max(fit.final_loss, 0.0);
      bic = (l > 0.0 ? std::log(l) : -std::numeric_limits<double>::infinity()) +
            lambda * static_cast<double>(dim) * log_t_over_t;
    } catch (const std::exception& e) {
      sel.warnings.push_back("ranks (" + std::to_string(ranks[0]) + "," + std::to_string(ranks[1]) +
                             "," + std::to_string(ranks[2]) + ") skipped: " + e.what());
      continue;
    }
    sel.table.emplace_back(ranks, bic);
    const bool better = !have_best || bic < sel.bic ||
                        (bic == sel.bic && (dim < best_dim || (dim == best_dim && ranks < sel.ranks)));
    if (better) {
      sel.ranks = ranks;
      sel.bic = bic;
      best_dim = dim;
      have_best = true;
    }
  }
  ensure(have_best, "select_ranks_bic: every grid point failed to fit");
  return sel;
}

namespace {

// Extreme eigenvalues of (I - sum A_l z^l)^* (I - sum A_l z^l) at z = e^{i theta}.
std::pair<double, double> spectral_shape_at(const VarCoefficients& coeffs, double theta) {
  const Index n = coeffs.assets();
  const Index p = coeffs.lags();
  Eigen::MatrixXcd az = Eigen::MatrixXcd::Identity(n, n);
  for (Index l = 0; l < p; ++l) {
    const std::complex<double> zl = std::polar(1.0, theta * static_cast<double>(l + 1));
    az -= zl * coeffs.tensor.slice3(l);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(az.adjoint() * az, Eigen::EigenvaluesOnly);
  ensure(es.info() == Eigen::Success, "dependence_diagnostics: eigensolver failed");
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace

DiagnosticsReport dependence_diagnostics(const VarCoefficients& coeffs,
                                         const InnovationSpec& innov, const Ranks& ranks,
                                         Index grid_points, double kappa) {
  require(grid_points >= 8, "dependence_diagnostics: grid too coarse");
  require(check_stationarity(coeffs).stationary,
          "dependence_diagnostics: coefficients are not stationary");
  require(innov.sigma.rows() == coeffs.assets() && innov.sigma.cols() == coeffs.assets(),
          "dependence_diagnostics: innovation covariance shape mismatch");

  const double two_pi = 2.0 * std::numbers::pi;
  const double spacing = two_pi / static_cast<double>(grid_points);
  double mu_min = std::numeric_limits<double>::infinity();
  double mu_max = 0.0;
  double at_min = 0.0, at_max = 0.0;
  for (Index g = 0; g < grid_points; ++g) {
    const double theta = spacing * static_cast<double>(g);
    const auto [lo, hi] = spectral_shape_at(coeffs, theta);
    if (lo < mu_min) { mu_min = lo; at_min = theta; }
    if (hi > mu_max) { mu_max = hi; at_max = theta; }
  }
  // One refinement sweep around each grid extremum.
  for (int j = -20; j <= 20; ++j) {
    const double d = spacing * static_cast<double>(j) / 20.0;
    const auto [lo, hi] = spectral_shape_at(coeffs, at_min + d);
    mu_min = std::min(mu_min, lo);
    const auto [lo2, hi2] = spectral_shape_at(coeffs, at_max + d);
    mu_max = std::max(mu_max, hi2);
    (void)hi;
    (void)lo2;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(innov.sigma, Eigen::EigenvaluesOnly);
  ensure(es.info() == Eigen::Success, "dependence_diagnostics: covariance eigensolver failed");

  DiagnosticsReport rep;
  rep.mu_min = mu_min;
  rep.mu_max = mu_max;
  rep.kappa_l = es.eigenvalues().minCoeff() / mu_max;
  rep.kappa_u = es.eigenvalues().maxCoeff() / mu_min;
  rep.d_m = model_dimension(coeffs.assets(), coeffs.lags(), ranks);
  rep.kappa = kappa;
  rep.grid_points = grid_points;
  rep.grid_resolution = spacing;
  rep.suggested_step = 2.0 / (3.0 * rep.kappa_u);
  return rep;
}

AsymptoticInput model_asymptotic_input(const VarCoefficients& coeffs,
                                       const InnovationSpec& innov) {
  AsymptoticInput in;
  in.n = coeffs.assets();
  in.p = coeffs.lags();
  in.sigma_eps = innov.sigma;
  in.gamma_star = stationary_autocovariance(coeffs, innov.sigma);
  return in;
}

AsymptoticInput plugin_asymptotic_input(const RegressionDesign& design, const Tensor3& coeffs) {
  AsymptoticInput in;
  in.n = design.n;
  in.p = design.p;
  in.gamma_star = design.gram / static_cast<double>(design.samples());
  in.sigma_eps = residual_covariance(design, coeffs);
  return in;
}

Eigen::MatrixXd mlr_jacobian(const TuckerFactors& tucker) {
  const Index n = tucker.u1.rows();
  const Index p = tucker.u3.rows();
  require(tucker.u2.rows() == n, "mlr_jacobian: factor shapes disagree");
  const Ranks r = tucker.ranks();
  const Eigen::MatrixXd g1 = matricize(tucker.core, 1);
  const Eigen::MatrixXd g2 = matricize(tucker.core, 2);
  const Eigen::MatrixXd g3 = matricize(tucker.core, 3);
  const Eigen::MatrixXd eye_n = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd eye_p = Eigen::MatrixXd::Identity(p, p);

  const Eigen::MatrixXd u32 = kron(tucker.u3, tucker.u2);  // np x r3 r2
  const ModePermutation t21 = mode_permutation(2, 1, n, n, p);
  const ModePermutation t31 = mode_permutation(3, 1, n, n, p);

  const Index cols = r[0] * r[1] * r[2] + n * r[0] + n * r[1] + p * r[2];
  Eigen::MatrixXd h(n * n * p, cols);
  Index at = 0;
  h.middleCols(at, r[0] * r[1] * r[2]) = kron(u32, tucker.u1);
  at += r[0] * r[1] * r[2];
  h.middleCols(at, n * r[0]) = kron(u32 * g1.transpose(), eye_n);
  at += n * r[0];
  h.middleCols(at, n * r[1]) =
      t21.apply_rows(kron(kron(tucker.u3, tucker.u1) * g2.transpose(), eye_n));
  at += n * r[1];
  h.middleCols(at, p * r[2]) =
      t31.apply_rows(kron(kron(tucker.u2, tucker.u1) * g3.transpose(), eye_p));
  return h;
}

Eigen::MatrixXd mri_jacobian(const Tensor3& coeffs, const Eigen::MatrixXd& u2) {
  const Index n = coeffs.dim1();
  const Index p = coeffs.dim3();
  require(coeffs.dim2() == n && u2.rows() == n && u2.cols() >= 1 && u2.cols() <= n,
          "mri_jacobian: shape mismatch");
  const Index r2 = u2.cols();
  const Tensor3 h = mode_multiply(coeffs, u2.transpose(), 2);  // n x r2 x p
  const Eigen::MatrixXd eye_n = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd eye_p = Eigen::MatrixXd::Identity(p, p);
  const ModePermutation t21 = mode_permutation(2, 1, n, n, p);

  Eigen::MatrixXd r(n * n * p, n * r2 * p + n * r2);
  r.leftCols(n * r2 * p) = kron(kron(eye_p, u2), eye_n);
  r.rightCols(n * r2) = t21.apply_rows(kron(matricize(h, 2).transpose(), eye_n));
  return r;
}

namespace {

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  ensure(llt.info() == Eigen::Success,
         std::string(what) + " is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

Eigen::MatrixXd canonical_u2(const Tensor3& coeffs, Index r2) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matricize(coeffs, 2), Eigen::ComputeThinU);
  return fix_singular_vector_signs(svd.matrixU().leftCols(r2));
}

Eigen::MatrixXd projected_covariance(const Eigen::MatrixXd& jac, const Eigen::MatrixXd& j) {
  Eigen::MatrixXd inner = jac.transpose() * j * jac;
  Eigen::MatrixXd sigma = jac * pinv_psd(inner) * jac.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace

Eigen::MatrixXd asymptotic_covariance(const Tensor3& coeffs, const AsymptoticInput& input,
                                      FitMethod method, const Ranks& ranks,
                                      const std::optional<TuckerFactors>& tucker) {
  const Index n = input.n;
  const Index p = input.p;
  require(coeffs.dim1() == n && coeffs.dim2() == n && coeffs.dim3() == p,
          "asymptotic_covariance: tensor does not match the input dimensions");
  require(input.gamma_star.rows() == n * p && input.gamma_star.cols() == n * p,
          "asymptotic_covariance: gamma_star shape mismatch");

  if (method == FitMethod::OLS)
    return kron(spd_inverse(input.gamma_star, "asymptotic_covariance: gamma_star"),
                input.sigma_eps);

  const Eigen::MatrixXd j =
      kron(input.gamma_star, spd_inverse(input.sigma_eps, "asymptotic_covariance: sigma_eps"));
  if (method == FitMethod::MLR) {
    const TuckerFactors tf = tucker ? *tucker : hosvd(coeffs, ranks);
    return projected_covariance(mlr_jacobian(tf), j);
  }
  return projected_covariance(mri_jacobian(coeffs, canonical_u2(coeffs, ranks[1])), j);
}

Eigen::MatrixXd asymptotic_covariance(const VarCoefficients& coeffs, const InnovationSpec& innov,
                                      FitMethod method, const Ranks& ranks,
                                      const std::optional<TuckerFactors>& tucker) {
  return asymptotic_covariance(coeffs.tensor, model_asymptotic_input(coeffs, innov), method,
                               ranks, tucker);
}

double asymptotic_variance_max_eig(const Tensor3& coeffs, const AsymptoticInput& input,
                                   FitMethod method, const Ranks& ranks) {
  const Index n = input.n;
  const Index p = input.p;
  require(coeffs.dim1() == n && coeffs.dim2() == n && coeffs.dim3() == p,
          "asymptotic_variance_max_eig: tensor does not match the input dimensions");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_eps(input.sigma_eps, Eigen::EigenvaluesOnly);
  ensure(es_eps.info() == Eigen::Success, "asymptotic_variance_max_eig: eigensolver failed");
  if (method == FitMethod::OLS) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_g(input.gamma_star, Eigen::EigenvaluesOnly);
    ensure(es_g.info() == Eigen::Success, "asymptotic_variance_max_eig: eigensolver failed");
    const double gmin = es_g.eigenvalues().minCoeff();
    ensure(gmin > 0.0, "asymptotic_variance_max_eig: gamma_star is singular");
    return es_eps.eigenvalues().maxCoeff() / gmin;
  }

  const Eigen::MatrixXd j = kron(
      input.gamma_star, spd_inverse(input.sigma_eps, "asymptotic_variance_max_eig: sigma_eps"));
  const Eigen::MatrixXd jac = method == FitMethod::MLR
                                  ? mlr_jacobian(hosvd(coeffs, ranks))
                                  : mri_jacobian(coeffs, canonical_u2(coeffs, ranks[1]));
  return max_eig_projected(jac, j);
}

}  // namespace mlrhar
