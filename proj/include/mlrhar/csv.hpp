#pragma once

#include <string>
#include <vector>

#include "mlrhar/diffusion.hpp"
#include "mlrhar/estimators.hpp"
#include "mlrhar/evaluation.hpp"

namespace mlrhar {

// Panels travel as long-form CSV: header `day,asset,value`, one row per
// (day, asset) with 1-based indices, '.' decimal separator, UTF-8. The reader
// also accepts wide form (one column per asset, optional name header) when
// asked. Parse errors carry the offending line number.
void write_panel_csv(const std::string& path, const RealizedPanel& panel);
RealizedPanel read_panel_csv(const std::string& path, bool wide = false);

// High-frequency log prices in the same long form; the day column holds the
// 0-based observation index (the opening price, then steps_per_day rows per
// day).
void write_prices_csv(const std::string& path, const HighFreqPanel& panel);

// Coefficient tensors as their N x (N P) mode-1 unfolding, preceded by a
// single comment line `# N=<n> P=<p>`.
void write_coefficients_csv(const std::string& path, const Tensor3& coeffs);
Tensor3 read_coefficients_csv(const std::string& path);

// Plain numeric matrix, one row per line. Used for covariance dumps.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& matrix);

// Fit output: coefficients at <stem>.csv plus a JSON sidecar at <stem>.json
// carrying method, ranks, iterations, loss trace, convergence flag and any
// warning. Returns the paths written.
std::vector<std::string> write_fit_result(const std::string& stem, const FitResult& fit);

// Experiment output: summary table at <stem>_table.csv (notes as leading
// comment lines) and one <stem>_curve_NN.csv per curve with the curve name in
// a comment and x,y rows. Returns the paths written.
std::vector<std::string> write_report(const std::string& stem, const ExperimentReport& report);

// FNV-1a 64-bit digest of a file's bytes as 16 hex characters; used by run
// manifests so reruns can be compared without diffing payloads.
std::string file_checksum(const std::string& path);

}  // namespace mlrhar
