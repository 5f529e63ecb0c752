#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "mlrhar/estimators.hpp"
#include "mlrhar/har.hpp"
#include "mlrhar/tensor.hpp"
#include "oracles.hpp"

using mlrhar::FitMethod;
using mlrhar::Index;
using mlrhar::Ranks;
using mlrhar::RegressionDesign;
using mlrhar::Tensor3;

namespace {

mlrhar::RealizedPanel panel_from_series(const Eigen::MatrixXd& values) {
  mlrhar::RealizedPanel p;
  p.values = values;
  p.kind = mlrhar::MeasureKind::RV;
  p.centered = true;
  p.centering = Eigen::VectorXd::Zero(values.cols());
  return p;
}

Eigen::MatrixXd random_matrix(Index rows, Index cols, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(gen);
  return m;
}

// Noiseless regression design: iid predictors, responses generated exactly by
// the supplied coefficient tensor.
RegressionDesign noiseless_design(const Tensor3& truth, Index samples, unsigned seed) {
  const Index n = truth.dim1(), p = truth.dim3();
  const Eigen::MatrixXd x = random_matrix(samples, n * p, seed);
  const Eigen::MatrixXd y = x * truth.mode1().transpose();
  return mlrhar::design_from_moments(x.transpose() * x, y.transpose() * x, y.transpose() * y,
                                     samples + p, n, p);
}

// A moderately sized noisy VAR(2) design used by several fits below.
RegressionDesign noisy_var_design(Index t, unsigned seed) {
  mlrhar::VarCoefficients coeffs;
  coeffs.tensor = Tensor3(2, 2, 2);
  Eigen::MatrixXd a1(2, 2), a2(2, 2);
  a1 << 0.4, 0.1, 0.05, 0.3;
  a2 << 0.15, -0.05, 0.1, 0.2;
  coeffs.tensor.set_slice3(0, a1);
  coeffs.tensor.set_slice3(1, a2);
  coeffs.intercept = Eigen::VectorXd::Zero(2);
  const mlrhar::InnovationSpec innov{Eigen::MatrixXd::Identity(2, 2)};
  return mlrhar::build_design(mlrhar::generate_var(coeffs, innov, t, seed), 2);
}

double rel_diff(const Tensor3& a, const Tensor3& b) {
  Tensor3 d = a;
  d -= b;
  return d.norm() / b.norm();
}

}  // namespace

TEST_CASE("design stacking follows the lagged layout by hand") {
  Eigen::MatrixXd series(4, 1);
  series << 1, 2, 3, 4;
  const RegressionDesign d = mlrhar::build_design(panel_from_series(series), 2);
  REQUIRE(d.samples() == 2);
  CHECK(d.responses(0, 0) == 3.0);
  CHECK(d.responses(1, 0) == 4.0);
  CHECK(d.predictors(0, 0) == 2.0);
  CHECK(d.predictors(0, 1) == 1.0);
  CHECK(d.predictors(1, 0) == 3.0);
  CHECK(d.predictors(1, 1) == 2.0);

  // Cached moments match the data blocks.
  CHECK((d.gram - d.predictors.transpose() * d.predictors).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((d.cross - d.responses.transpose() * d.predictors).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("shortest admissible panel yields a single-row design") {
  Eigen::MatrixXd series(3, 2);
  series << 1, 2, 3, 4, 5, 6;
  const RegressionDesign d = mlrhar::build_design(panel_from_series(series), 2);
  CHECK(d.samples() == 1);
  CHECK(d.responses.rows() == 1);

  CHECK_THROWS_AS((void)mlrhar::build_design(panel_from_series(series), 3),
                  std::invalid_argument);
  mlrhar::RealizedPanel uncentered = panel_from_series(series);
  uncentered.centered = false;
  CHECK_THROWS_AS((void)mlrhar::build_design(uncentered, 1), std::invalid_argument);
}

TEST_CASE("loss at zero equals the mean squared response norm") {
  const RegressionDesign d = noisy_var_design(80, 101);
  const double at_zero = mlrhar::loss(d, Tensor3(2, 2, 2));
  CHECK(at_zero == doctest::Approx(d.yy.trace() / static_cast<double>(d.t)).epsilon(1e-12));
}

TEST_CASE("loss vanishes on noiselessly generated data") {
  Tensor3 truth(2, 2, 2);
  truth.set_slice3(0, random_matrix(2, 2, 7));
  truth.set_slice3(1, random_matrix(2, 2, 8));
  const RegressionDesign d = noiseless_design(truth, 50, 9);
  CHECK(mlrhar::loss(d, truth) < 1e-12);
}

TEST_CASE("loss agrees with the brute-force residual summation") {
  const RegressionDesign d = noisy_var_design(60, 103);
  Tensor3 coeffs(2, 2, 2);
  coeffs.set_slice3(0, random_matrix(2, 2, 11));
  coeffs.set_slice3(1, random_matrix(2, 2, 12));

  double acc = 0.0;
  const Eigen::MatrixXd a1 = coeffs.mode1();
  for (Index row = 0; row < d.samples(); ++row) {
    for (Index i = 0; i < d.n; ++i) {
      double fitted = 0.0;
      for (Index j = 0; j < d.n * d.p; ++j) fitted += a1(i, j) * d.predictors(row, j);
      const double resid = d.responses(row, i) - fitted;
      acc += resid * resid;
    }
  }
  acc /= static_cast<double>(d.t);
  CHECK(mlrhar::loss(d, coeffs) == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences coordinatewise") {
  const RegressionDesign d = noisy_var_design(70, 107);
  Tensor3 coeffs(2, 2, 2);
  coeffs.set_slice3(0, 0.3 * random_matrix(2, 2, 13));
  coeffs.set_slice3(1, 0.3 * random_matrix(2, 2, 14));
  const Tensor3 grad = mlrhar::loss_gradient(d, coeffs);

  const double h = 1e-6;
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j)
      for (Index l = 0; l < 2; ++l) {
        Tensor3 up = coeffs, down = coeffs;
        up(i, j, l) += h;
        down(i, j, l) -= h;
        const double fd = (mlrhar::loss(d, up) - mlrhar::loss(d, down)) / (2.0 * h);
        CHECK(grad(i, j, l) ==
              doctest::Approx(fd).epsilon(1e-4).scale(std::max(1.0, std::abs(fd))));
      }
}

TEST_CASE("single-observation gradient and loss match hand calculus") {
  Eigen::MatrixXd series(2, 1);
  series << 2.0, 1.5;  // predictor 2, response 1.5, divisor t = 2
  const RegressionDesign d = mlrhar::build_design(panel_from_series(series), 1);
  Tensor3 a(1, 1, 1);
  a(0, 0, 0) = 0.3;
  CHECK(mlrhar::loss(d, a) == doctest::Approx(0.5 * 0.9 * 0.9).epsilon(1e-14));
  CHECK(mlrhar::loss_gradient(d, a)(0, 0, 0) == doctest::Approx(-1.8).epsilon(1e-14));
}

TEST_CASE("gradient vanishes at the generating tensor of noiseless data") {
  Tensor3 truth(3, 3, 2);
  truth.set_slice3(0, 0.3 * random_matrix(3, 3, 15));
  truth.set_slice3(1, 0.2 * random_matrix(3, 3, 16));
  const RegressionDesign d = noiseless_design(truth, 90, 17);
  CHECK(mlrhar::loss_gradient(d, truth).norm() < 1e-10);
}

TEST_CASE("least squares recovers noiseless coefficients and is first-order optimal") {
  Tensor3 truth(3, 3, 2);
  truth.set_slice3(0, 0.4 * random_matrix(3, 3, 19));
  truth.set_slice3(1, 0.2 * random_matrix(3, 3, 20));
  const RegressionDesign d = noiseless_design(truth, 80, 21);

  const mlrhar::FitResult fit = mlrhar::fit_ols(d);
  CHECK(rel_diff(fit.tensor, truth) < 1e-8);
  CHECK(mlrhar::loss_gradient(d, fit.tensor).norm() < 1e-8);
  CHECK(fit.final_loss < 1e-12);

  const RegressionDesign noisy_design = noisy_var_design(100, 23);
  const mlrhar::FitResult noisy = mlrhar::fit_ols(noisy_design);
  CHECK(mlrhar::loss_gradient(noisy_design, noisy.tensor).norm() < 1e-8);
}

TEST_CASE("scalar least squares is the ratio of cross moments") {
  Eigen::MatrixXd series(4, 1);
  series << 1.0, 2.0, 1.5, 3.0;
  const RegressionDesign d = mlrhar::build_design(panel_from_series(series), 1);
  const mlrhar::FitResult fit = mlrhar::fit_ols(d);
  CHECK(fit.tensor(0, 0, 0) == doctest::Approx(9.5 / 7.25).epsilon(1e-14));
}

TEST_CASE("singular designs are rejected with advice rather than regularized") {
  // Fewer usable rows than predictors: Gram cannot be full rank.
  Eigen::MatrixXd series = random_matrix(5, 2, 25);
  const RegressionDesign d = mlrhar::build_design(panel_from_series(series), 2);
  try {
    (void)mlrhar::fit_ols(d);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("singular") != std::string::npos);
  }
}

TEST_CASE("index fit with full rank collapses to least squares") {
  const RegressionDesign d = noisy_var_design(120, 29);
  const mlrhar::FitResult ols = mlrhar::fit_ols(d);
  const mlrhar::FitResult mri = mlrhar::fit_mri(d, 2);
  CHECK(rel_diff(mri.tensor, ols.tensor) < 1e-8);
  CHECK(mri.method == FitMethod::MRI);
}

TEST_CASE("index fit recovers a noiseless shared-row-space model") {
  // A_l = b_l u2^T: mode-2 rank one by construction.
  Eigen::VectorXd u2(3);
  u2 << 0.6, -0.64, 0.48;
  u2.normalize();
  Tensor3 truth(3, 3, 2);
  truth.set_slice3(0, random_matrix(3, 1, 31) * u2.transpose());
  truth.set_slice3(1, random_matrix(3, 1, 32) * u2.transpose());
  const RegressionDesign d = noiseless_design(truth, 100, 33);

  const mlrhar::FitResult fit = mlrhar::fit_mri(d, 1);
  CHECK(rel_diff(fit.tensor, truth) < 1e-6);
  CHECK(fit.final_loss < 1e-10);
}

TEST_CASE("index fit matches an exhaustive angle-grid optimum") {
  const RegressionDesign d = noisy_var_design(150, 37);
  const mlrhar::FitResult fit = mlrhar::fit_mri(d, 1);

  // Brute force over the one-dimensional row space u2 = (cos t, sin t):
  // given u2 the loading step is plain least squares on the index variables.
  double best = std::numeric_limits<double>::infinity();
  const Index grid = 4000;
  for (Index g = 0; g < grid; ++g) {
    const double theta = std::numbers::pi * static_cast<double>(g) / static_cast<double>(grid);
    Eigen::Vector2d u(std::cos(theta), std::sin(theta));
    Eigen::MatrixXd z(d.samples(), 2);
    z.col(0) = d.predictors.leftCols(2) * u;
    z.col(1) = d.predictors.rightCols(2) * u;
    const Eigen::Matrix2d gram_z = z.transpose() * z;
    const Eigen::MatrixXd cross_z = d.responses.transpose() * z;  // 2 x 2
    const Eigen::MatrixXd b = gram_z.ldlt().solve(cross_z.transpose()).transpose();
    const double l =
        (d.responses - z * b.transpose()).squaredNorm() / static_cast<double>(d.t);
    best = std::min(best, l);
  }
  CHECK(fit.final_loss == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("index fit never does worse than truncating the least squares estimate") {
  const RegressionDesign d = noisy_var_design(130, 41);
  const mlrhar::FitResult ols = mlrhar::fit_ols(d);
  const Tensor3 projected =
      mlrhar::fold(mlrhar::truncate_rank(matricize(ols.tensor, 2), 1), 2, 2, 2, 2);
  const mlrhar::FitResult mri = mlrhar::fit_mri(d, 1);
  CHECK(mri.final_loss <= mlrhar::loss(d, projected) + 1e-12);
}

TEST_CASE("projected gradient descent contracts on well-specified noiseless data") {
  const mlrhar::VarCoefficients truth = mlrhar::random_lowrank_var(5, 6, {2, 2, 3}, 1.0, 43);
  const RegressionDesign d = noiseless_design(truth.tensor, 300, 44);

  mlrhar::PgdConfig cfg;
  cfg.ranks = {2, 2, 3};
  cfg.max_iterations = 20;
  cfg.tolerance = 0.0;
  cfg.record_iterates = true;
  const mlrhar::FitResult fit = mlrhar::fit_mlr(d, cfg);
  REQUIRE(fit.iterates.size() == 20);

  int improving = 0, counted = 0;
  double prev = 1.0;  // relative error of the zero initializer
  for (const Tensor3& it : fit.iterates) {
    const double err = rel_diff(it, truth.tensor);
    if (prev < 1e-13) break;  // converged to machine precision already
    ++counted;
    if (err < prev) ++improving;
    prev = err;
  }
  CHECK(improving >= (counted * 9) / 10);
  CHECK(rel_diff(fit.tensor, truth.tensor) < 1e-3);
  CHECK(fit.warning.empty());
}

TEST_CASE("zero responses keep the zero initializer fixed") {
  const Eigen::MatrixXd x = random_matrix(40, 6, 47);
  const RegressionDesign d = mlrhar::design_from_moments(
      x.transpose() * x, Eigen::MatrixXd::Zero(2, 6), Eigen::MatrixXd::Zero(2, 2), 43, 2, 3);
  mlrhar::PgdConfig cfg;
  cfg.ranks = {1, 1, 1};
  const mlrhar::FitResult fit = mlrhar::fit_mlr(d, cfg);
  CHECK(fit.tensor.norm() == 0.0);
  CHECK(fit.converged);
  CHECK(fit.final_loss == 0.0);
}

TEST_CASE("full running ranks make the first iterate a plain gradient step") {
  const RegressionDesign d = noisy_var_design(90, 53);
  mlrhar::PgdConfig cfg;
  cfg.ranks = {2, 2, 2};
  cfg.running_ranks = Ranks{2, 2, 2};
  cfg.step_size = 1e-3;
  cfg.max_iterations = 1;
  cfg.record_iterates = true;
  const mlrhar::FitResult fit = mlrhar::fit_mlr(d, cfg);
  REQUIRE(fit.iterates.size() == 1);

  const Eigen::MatrixXd expected = (2.0 * 1e-3 / static_cast<double>(d.t)) * d.cross;
  CHECK((fit.iterates[0].mode1() - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("running-rank certification passes along the descent path") {
  const mlrhar::VarCoefficients truth = mlrhar::random_lowrank_var(4, 5, {2, 2, 2}, 0.8, 59);
  const RegressionDesign d = noiseless_design(truth.tensor, 200, 60);
  mlrhar::PgdConfig cfg;
  cfg.ranks = {2, 2, 2};
  cfg.running_ranks = Ranks{3, 3, 3};
  cfg.certify_ranks = true;
  cfg.max_iterations = 50;
  const mlrhar::FitResult fit = mlrhar::fit_mlr(d, cfg);
  CHECK(fit.running_loss >= 0.0);
  CHECK(fit.final_loss >= fit.running_loss - 1e-12);

  mlrhar::PgdConfig bad = cfg;
  bad.running_ranks = Ranks{1, 1, 1};  // below the target ranks
  CHECK_THROWS_AS((void)mlrhar::fit_mlr(d, bad), std::invalid_argument);
}

TEST_CASE("nested constraint sets order the attained losses") {
  const RegressionDesign d = noisy_var_design(140, 61);
  const double ols = mlrhar::fit_ols(d).final_loss;
  const double mri = mlrhar::fit_mri(d, 1).final_loss;

  mlrhar::PgdConfig cfg;
  cfg.ranks = {1, 1, 2};
  cfg.max_iterations = 2000;
  cfg.tolerance = 1e-12;
  const double mlr = mlrhar::fit_mlr(d, cfg).final_loss;

  CHECK(ols <= mri + 1e-12);
  CHECK(mri <= mlr + 1e-10);
}

TEST_CASE("suggested step size is two thirds of the inverse curvature bound") {
  const RegressionDesign d = noisy_var_design(100, 67);
  const double lmax = oracle::singular_values(d.gram)(0) / static_cast<double>(d.t);
  CHECK(mlrhar::suggested_step_size(d) == doctest::Approx(2.0 / (3.0 * lmax)).epsilon(1e-6));
}

TEST_CASE("parameter counts follow the manifold dimension formula") {
  CHECK(mlrhar::model_dimension(5, 22, {2, 2, 3}) == 81);
  CHECK(mlrhar::model_dimension(2, 2, {2, 2, 2}) == 8);  // full rank: n*n*p
  CHECK(mlrhar::model_dimension(3, 4, {1, 1, 1}) == 1 + 2 + 2 + 3);
  CHECK_THROWS_AS((void)mlrhar::model_dimension(3, 4, {4, 1, 1}), std::invalid_argument);
}

TEST_CASE("rank selection with the penalty off picks the smallest loss") {
  mlrhar::VarCoefficients coeffs;
  coeffs.tensor = Tensor3(2, 2, 2);
  Eigen::MatrixXd a1(2, 2);
  a1 << 0.5, 0.2, 0.1, 0.4;
  coeffs.tensor.set_slice3(0, a1);
  coeffs.tensor.set_slice3(1, 0.15 * Eigen::MatrixXd::Identity(2, 2));
  coeffs.intercept = Eigen::VectorXd::Zero(2);
  const mlrhar::RealizedPanel panel = mlrhar::generate_var(
      coeffs, mlrhar::InnovationSpec{Eigen::MatrixXd::Identity(2, 2)}, 300, 71);

  mlrhar::PgdConfig tmpl;
  tmpl.max_iterations = 300;
  const std::vector<Ranks> grid{{1, 1, 1}, {2, 2, 2}};
  const mlrhar::RankSelection sel = mlrhar::select_ranks_bic(panel, 2, 0.0, grid, tmpl);
  CHECK(sel.ranks == Ranks{2, 2, 2});
  REQUIRE(sel.table.size() == 2);
  CHECK(sel.table[1].second < sel.table[0].second);

  const mlrhar::RankSelection single =
      mlrhar::select_ranks_bic(panel, 2, 1e-4, {{2, 1, 1}}, tmpl);
  CHECK(single.ranks == Ranks{2, 1, 1});

  CHECK_THROWS_AS((void)mlrhar::select_ranks_bic(panel, 2, 0.0, {}, tmpl),
                  std::invalid_argument);
}

TEST_CASE("rank selection ties break toward the smaller model") {
  // All-zero responses: every candidate fits exactly, so the parameter count
  // and then lexicographic order must decide.
  const mlrhar::RealizedPanel panel = panel_from_series(Eigen::MatrixXd::Zero(30, 2));
  const std::vector<Ranks> grid{{2, 1, 1}, {1, 1, 1}, {1, 2, 1}};
  const mlrhar::RankSelection sel = mlrhar::select_ranks_bic(panel, 2, 1e-4, grid);
  CHECK(sel.ranks == Ranks{1, 1, 1});
}

TEST_CASE("dependence diagnostics on white noise reduce to the innovation spectrum") {
  mlrhar::VarCoefficients coeffs;
  coeffs.tensor = Tensor3(2, 2, 2);
  coeffs.intercept = Eigen::VectorXd::Zero(2);
  const mlrhar::InnovationSpec innov{Eigen::Vector2d(2.0, 0.5).asDiagonal().toDenseMatrix()};
  const mlrhar::DiagnosticsReport rep =
      mlrhar::dependence_diagnostics(coeffs, innov, {1, 1, 1});
  CHECK(rep.mu_min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.mu_max == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.kappa_l == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.kappa_u == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rep.suggested_step == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("dependence extrema of a scalar lag-one model sit at the endpoints") {
  mlrhar::VarCoefficients coeffs;
  coeffs.tensor = Tensor3(1, 1, 1);
  coeffs.tensor(0, 0, 0) = 0.5;
  coeffs.intercept = Eigen::VectorXd::Zero(1);
  const mlrhar::InnovationSpec innov{Eigen::MatrixXd::Identity(1, 1)};
  const mlrhar::DiagnosticsReport rep =
      mlrhar::dependence_diagnostics(coeffs, innov, {1, 1, 1});
  // |1 - 0.5 e^{i theta}|^2 ranges over [0.25, 2.25].
  CHECK(rep.mu_min == doctest::Approx(0.25).epsilon(1e-3));
  CHECK(rep.mu_max == doctest::Approx(2.25).epsilon(1e-3));
  CHECK(rep.d_m == 1);
  CHECK(rep.grid_points == 720);
  CHECK(rep.grid_resolution == doctest::Approx(2.0 * std::numbers::pi / 720.0));
}

TEST_CASE("plug-in and model asymptotic inputs expose the documented moments") {
  const RegressionDesign d = noisy_var_design(120, 73);
  const mlrhar::FitResult ols = mlrhar::fit_ols(d);
  const mlrhar::AsymptoticInput plug = mlrhar::plugin_asymptotic_input(d, ols.tensor);
  CHECK((plug.gamma_star - d.gram / static_cast<double>(d.samples())).cwiseAbs().maxCoeff() <
        1e-12);
  const Eigen::MatrixXd resid =
      d.responses - d.predictors * ols.tensor.mode1().transpose();
  const Eigen::MatrixXd sigma = resid.transpose() * resid / static_cast<double>(d.samples());
  CHECK((plug.sigma_eps - sigma).cwiseAbs().maxCoeff() < 1e-10);

  mlrhar::VarCoefficients coeffs;
  coeffs.tensor = Tensor3(2, 2, 1);
  coeffs.tensor.set_slice3(0, 0.5 * Eigen::MatrixXd::Identity(2, 2));
  coeffs.intercept = Eigen::VectorXd::Zero(2);
  const mlrhar::InnovationSpec innov{Eigen::MatrixXd::Identity(2, 2)};
  const mlrhar::AsymptoticInput model = mlrhar::model_asymptotic_input(coeffs, innov);
  CHECK((model.gamma_star - mlrhar::stationary_autocovariance(coeffs, innov.sigma))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("tucker jacobian columns match finite differences of the reconstruction") {
  const mlrhar::VarCoefficients truth = mlrhar::random_lowrank_var(3, 4, {2, 2, 2}, 1.0, 79);
  const mlrhar::TuckerFactors tf = hosvd(truth.tensor, {2, 2, 2});
  const Eigen::MatrixXd h = mlrhar::mlr_jacobian(tf);

  const Index nc = 2 * 2 * 2, n = 3, p = 4;
  REQUIRE(h.cols() == nc + n * 2 + n * 2 + p * 2);

  auto reconstruct_vec = [&](const Eigen::VectorXd& theta) {
    mlrhar::TuckerFactors f = tf;
    Index at = 0;
    f.core = Tensor3::from_data(2, 2, 2, theta.segment(at, nc));
    at += nc;
    f.u1 = Eigen::Map<const Eigen::MatrixXd>(theta.data() + at, n, 2);
    at += n * 2;
    f.u2 = Eigen::Map<const Eigen::MatrixXd>(theta.data() + at, n, 2);
    at += n * 2;
    f.u3 = Eigen::Map<const Eigen::MatrixXd>(theta.data() + at, p, 2);
    const Eigen::MatrixXd m = f.reconstruct().mode1();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()));
  };

  Eigen::VectorXd theta(h.cols());
  Index at = 0;
  theta.segment(at, nc) = tf.core.data();
  at += nc;
  theta.segment(at, n * 2) = Eigen::Map<const Eigen::VectorXd>(tf.u1.data(), n * 2);
  at += n * 2;
  theta.segment(at, n * 2) = Eigen::Map<const Eigen::VectorXd>(tf.u2.data(), n * 2);
  at += n * 2;
  theta.segment(at, p * 2) = Eigen::Map<const Eigen::VectorXd>(tf.u3.data(), p * 2);

  const double step = 1e-6;
  for (Index c = 0; c < h.cols(); ++c) {
    Eigen::VectorXd up = theta, down = theta;
    up(c) += step;
    down(c) -= step;
    const Eigen::VectorXd fd = (reconstruct_vec(up) - reconstruct_vec(down)) / (2.0 * step);
    CHECK((h.col(c) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("index jacobian columns match finite differences of the reconstruction") {
  const mlrhar::VarCoefficients truth = mlrhar::random_lowrank_var(3, 4, {3, 2, 3}, 1.0, 83);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matricize(truth.tensor, 2), Eigen::ComputeThinU);
  const Eigen::MatrixXd u2 = svd.matrixU().leftCols(2);
  const Eigen::MatrixXd r = mlrhar::mri_jacobian(truth.tensor, u2);

  const Index n = 3, p = 4, r2 = 2;
  REQUIRE(r.cols() == n * r2 * p + n * r2);
  const Tensor3 h = mode_multiply(truth.tensor, u2.transpose(), 2);

  auto reconstruct_vec = [&](const Eigen::VectorXd& theta) {
    const Tensor3 b = Tensor3::from_data(n, r2, p, theta.head(n * r2 * p));
    const Eigen::MatrixXd u = Eigen::Map<const Eigen::MatrixXd>(theta.data() + n * r2 * p, n, r2);
    const Eigen::MatrixXd m = mode_multiply(b, u, 2).mode1();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()));
  };

  Eigen::VectorXd theta(r.cols());
  theta.head(n * r2 * p) = h.data();
  theta.tail(n * r2) = Eigen::Map<const Eigen::VectorXd>(u2.data(), n * r2);

  const double step = 1e-6;
  for (Index c = 0; c < r.cols(); ++c) {
    Eigen::VectorXd up = theta, down = theta;
    up(c) += step;
    down(c) -= step;
    const Eigen::VectorXd fd = (reconstruct_vec(up) - reconstruct_vec(down)) / (2.0 * step);
    CHECK((r.col(c) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("asymptotic covariance of white noise least squares is the identity") {
  mlrhar::VarCoefficients coeffs;
  coeffs.tensor = Tensor3(2, 2, 1);
  coeffs.intercept = Eigen::VectorXd::Zero(2);
  const mlrhar::InnovationSpec innov{Eigen::MatrixXd::Identity(2, 2)};
  const Eigen::MatrixXd sigma =
      mlrhar::asymptotic_covariance(coeffs, innov, FitMethod::OLS, {2, 2, 1});
  CHECK((sigma - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("full-rank projections collapse the constrained covariances onto least squares") {
  const mlrhar::VarCoefficients coeffs = mlrhar::random_lowrank_var(3, 2, {3, 3, 2}, 0.6, 89);
  const mlrhar::InnovationSpec innov{Eigen::MatrixXd::Identity(3, 3)};
  const Ranks full{3, 3, 2};
  const Eigen::MatrixXd ols =
      mlrhar::asymptotic_covariance(coeffs, innov, FitMethod::OLS, full);
  const Eigen::MatrixXd mlr =
      mlrhar::asymptotic_covariance(coeffs, innov, FitMethod::MLR, full);
  const Eigen::MatrixXd mri =
      mlrhar::asymptotic_covariance(coeffs, innov, FitMethod::MRI, full);
  const double scale = ols.cwiseAbs().maxCoeff();
  CHECK((mlr - ols).cwiseAbs().maxCoeff() < 1e-8 * scale);
  CHECK((mri - ols).cwiseAbs().maxCoeff() < 1e-8 * scale);
}

TEST_CASE("constrained covariances are ordered below the least squares one") {
  const mlrhar::VarCoefficients coeffs = mlrhar::random_lowrank_var(4, 6, {2, 2, 3}, 0.8, 97);
  const mlrhar::InnovationSpec innov{Eigen::MatrixXd::Identity(4, 4)};
  const Ranks ranks{2, 2, 3};
  const Eigen::MatrixXd ols =
      mlrhar::asymptotic_covariance(coeffs, innov, FitMethod::OLS, ranks);
  const Eigen::MatrixXd mri =
      mlrhar::asymptotic_covariance(coeffs, innov, FitMethod::MRI, ranks);
  const Eigen::MatrixXd mlr =
      mlrhar::asymptotic_covariance(coeffs, innov, FitMethod::MLR, ranks);

  auto min_eig = [](const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  };
  const double scale = ols.cwiseAbs().maxCoeff();
  CHECK(min_eig(ols - mri) >= -1e-8 * scale);
  CHECK(min_eig(mri - mlr) >= -1e-8 * scale);
  CHECK(min_eig(mlr) >= -1e-8 * scale);
  CHECK((mlr - mlr.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tucker gauge rotations leave the covariance untouched") {
  const mlrhar::VarCoefficients coeffs = mlrhar::random_lowrank_var(3, 4, {2, 2, 2}, 0.7, 101);
  const mlrhar::InnovationSpec innov{Eigen::MatrixXd::Identity(3, 3)};
  const Ranks ranks{2, 2, 2};
  const mlrhar::TuckerFactors tf = hosvd(coeffs.tensor, ranks);

  const double angle = 0.7;
  Eigen::Matrix2d q;
  q << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  mlrhar::TuckerFactors rotated = tf;
  rotated.u1 = tf.u1 * q;
  rotated.core = mode_multiply(tf.core, Eigen::MatrixXd(q.transpose()), 1);
  rotated.u3 = tf.u3 * q;
  rotated.core = mode_multiply(rotated.core, Eigen::MatrixXd(q.transpose()), 3);

  const Eigen::MatrixXd base =
      mlrhar::asymptotic_covariance(coeffs, innov, FitMethod::MLR, ranks, tf);
  const Eigen::MatrixXd other =
      mlrhar::asymptotic_covariance(coeffs, innov, FitMethod::MLR, ranks, rotated);
  CHECK((base - other).cwiseAbs().maxCoeff() < 1e-6 * base.cwiseAbs().maxCoeff());
}

TEST_CASE("top asymptotic eigenvalue agrees between the dense and projected routes") {
  const mlrhar::VarCoefficients coeffs = mlrhar::random_lowrank_var(3, 3, {2, 2, 2}, 0.7, 103);
  const mlrhar::InnovationSpec innov{Eigen::MatrixXd::Identity(3, 3)};
  const mlrhar::AsymptoticInput input = mlrhar::model_asymptotic_input(coeffs, innov);
  const Ranks ranks{2, 2, 2};

  for (FitMethod method : {FitMethod::OLS, FitMethod::MRI, FitMethod::MLR}) {
    const Eigen::MatrixXd sigma =
        mlrhar::asymptotic_covariance(coeffs.tensor, input, method, ranks);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma, Eigen::EigenvaluesOnly);
    const double dense = es.eigenvalues().maxCoeff();
    const double fast = mlrhar::asymptotic_variance_max_eig(coeffs.tensor, input, method, ranks);
    CHECK(fast == doctest::Approx(dense).epsilon(1e-6));
  }
}
