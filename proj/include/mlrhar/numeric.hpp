#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "mlrhar/common.hpp"

namespace mlrhar {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

double spectral_radius(const Eigen::MatrixXd& m);

// Solves X = A X A^T + Q for symmetric Q, requiring spectral_radius(A) < 1.
// Doubling iteration; converges quadratically.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q);

// Moore-Penrose pseudo-inverse of a symmetric PSD matrix. Eigenvalues below
// tol_scale * lambda_max are treated as zero.
Eigen::MatrixXd pinv_psd(const Eigen::MatrixXd& m, double tol_scale = 1e-10);

// Symmetric PSD square root; small negative eigenvalues are clamped to zero.
Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m, double clamp_tol = 1e-10);

// Largest eigenvalue of H (H^T J H)^+ H^T without forming the full product.
// J must be symmetric PSD of size matching H's rows.
double max_eig_projected(const Eigen::MatrixXd& h, const Eigen::MatrixXd& j, double pinv_tol = 1e-10);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares line through (x_i, y_i) with intercept.
LinearFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// FNV-1a 64-bit hash; used for config hashes and output checksums in manifests.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);
std::string to_hex(std::uint64_t v);

}  // namespace mlrhar
