#include "mlrhar/numeric.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace mlrhar {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  require(m.rows() == m.cols(), "spectral_radius: matrix must be square");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  ensure(es.info() == Eigen::Success, "spectral_radius: eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  require(a.rows() == a.cols() && q.rows() == q.cols() && a.rows() == q.rows(),
          "solve_discrete_lyapunov: dimension mismatch");
  ensure(spectral_radius(a) < 1.0, "solve_discrete_lyapunov: spectral radius must be < 1");
  Eigen::MatrixXd x = q;
  Eigen::MatrixXd ak = a;
  // X = sum_k A^k Q (A^k)^T; squaring A doubles the number of summed terms.
  for (int iter = 0; iter < 128; ++iter) {
    const Eigen::MatrixXd incr = ak * x * ak.transpose();
    x += incr;
    if (incr.norm() <= 1e-15 * (1.0 + x.norm())) break;
    ak = (ak * ak).eval();
  }
  return 0.5 * (x + x.transpose());  // symmetrize away round-off drift
}

Eigen::MatrixXd pinv_psd(const Eigen::MatrixXd& m, double tol_scale) {
  require(m.rows() == m.cols(), "pinv_psd: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  ensure(es.info() == Eigen::Success, "pinv_psd: eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cutoff = tol_scale * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > cutoff) inv(i) = 1.0 / ev(i);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m, double clamp_tol) {
  require(m.rows() == m.cols(), "sqrt_psd: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  ensure(es.info() == Eigen::Success, "sqrt_psd: eigendecomposition failed");
  const double floor = -clamp_tol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  ensure(es.eigenvalues().minCoeff() >= floor, "sqrt_psd: matrix is not positive semidefinite");
  Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double max_eig_projected(const Eigen::MatrixXd& h, const Eigen::MatrixXd& j, double pinv_tol) {
  require(h.rows() == j.rows() && j.rows() == j.cols(), "max_eig_projected: dimension mismatch");
  const Eigen::MatrixXd m = h.transpose() * j * h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  ensure(es.info() == Eigen::Success, "max_eig_projected: eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double cutoff = pinv_tol * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  // H M^+ H^T and M^{-1/2} V^T (H^T H) V M^{-1/2} share nonzero eigenvalues,
  // so the problem shrinks from rows(H) to cols(H).
  std::vector<Index> keep;
  for (Index i = 0; i < ev.size(); ++i)
    if (ev(i) > cutoff) keep.push_back(i);
  if (keep.empty()) return 0.0;
  Eigen::MatrixXd vs(h.cols(), static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    vs.col(static_cast<Index>(k)) = es.eigenvectors().col(keep[k]) / std::sqrt(ev(keep[k]));
  const Eigen::MatrixXd core = vs.transpose() * (h.transpose() * h) * vs;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(0.5 * (core + core.transpose()));
  ensure(es2.info() == Eigen::Success, "max_eig_projected: reduced eigendecomposition failed");
  return std::max(0.0, es2.eigenvalues().maxCoeff());
}

LinearFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = x.mean(), my = y.mean();
  const double sxx = (x.array() - mx).square().sum();
  require(sxx > 0.0, "fit_line: x values are all identical");
  const double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double ss_tot = (y.array() - my).square().sum();
  const Eigen::ArrayXd resid = y.array() - (f.intercept + f.slope * x.array());
  const double ss_res = resid.square().sum();
  f.r_squared = ss_tot <= 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  (void)n;
  return f;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string to_hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace mlrhar
