#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mlrhar/common.hpp"

namespace mlrhar {

// Dense order-3 tensor. Storage is column-major with the first index fastest
// (offset = i1 + i2*p1 + i3*p1*p2), so the mode-1 matricization is a zero-copy
// view of the buffer.
//
// Matricization convention, used consistently everywhere: the mode-k unfolding
// has rows indexed by i_k and columns indexed by the remaining modes in
// increasing mode order, lower mode fastest (for mode 2 the column index is
// i1 + i3*p1, for mode 3 it is i1 + i2*p1). Under this convention a tensor of
// lag matrices A_1..A_P stored as slices satisfies
//   mode-1: (A_1, ..., A_P)      mode-2: (A_1^T, ..., A_P^T)
//   mode-3: rows vec(A_l)^T,
// and Tucker reconstruction unfolds as U1 * G_(1) * (U3 kron U2)^T.
class Tensor3 {
 public:
  Tensor3() : p1_(0), p2_(0), p3_(0) {}

  Tensor3(Index p1, Index p2, Index p3) : p1_(p1), p2_(p2), p3_(p3) {
    require(p1 >= 0 && p2 >= 0 && p3 >= 0, "Tensor3: negative dimension");
    data_ = Eigen::VectorXd::Zero(p1 * p2 * p3);
  }

  static Tensor3 from_data(Index p1, Index p2, Index p3, Eigen::VectorXd data);

  Index dim(int mode) const;
  Index dim1() const { return p1_; }
  Index dim2() const { return p2_; }
  Index dim3() const { return p3_; }
  Index size() const { return data_.size(); }

  double operator()(Index i, Index j, Index k) const { return data_(offset(i, j, k)); }
  double& operator()(Index i, Index j, Index k) { return data_(offset(i, j, k)); }

  const Eigen::VectorXd& data() const { return data_; }

  // Zero-copy mode-1 unfolding, p1 x (p2*p3).
  Eigen::Map<const Eigen::MatrixXd> mode1() const {
    return {data_.data(), p1_, p2_ * p3_};
  }

  // Third-index slice (p1 x p2), contiguous in storage.
  Eigen::Map<const Eigen::MatrixXd> slice3(Index k) const {
    require(k >= 0 && k < p3_, "Tensor3::slice3: index out of range");
    return {data_.data() + k * p1_ * p2_, p1_, p2_};
  }
  void set_slice3(Index k, const Eigen::MatrixXd& m);

  double norm() const { return data_.norm(); }
  bool all_finite() const { return data_.allFinite(); }

  Tensor3& operator+=(const Tensor3& o);
  Tensor3& operator-=(const Tensor3& o);
  Tensor3& operator*=(double s);
  friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
  friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
  friend Tensor3 operator*(double s, Tensor3 t) { return t *= s; }

 private:
  Index offset(Index i, Index j, Index k) const {
    require(i >= 0 && i < p1_ && j >= 0 && j < p2_ && k >= 0 && k < p3_,
            "Tensor3: index out of range");
    return i + j * p1_ + k * p1_ * p2_;
  }

  Index p1_, p2_, p3_;
  Eigen::VectorXd data_;
};

// mode must be 1, 2 or 3 in all of the following.
Eigen::MatrixXd matricize(const Tensor3& t, int mode);

// Inverse of matricize for the given target dimensions.
Tensor3 fold(const Eigen::MatrixXd& m, int mode, Index p1, Index p2, Index p3);

// Mode product: result_(mode) = u * t_(mode); u must have dim(mode) columns.
Tensor3 mode_multiply(const Tensor3& t, const Eigen::MatrixXd& u, int mode);

// Best rank-r approximation via truncated SVD. Descending singular values with
// keep-first tie handling; r >= min(rows, cols) returns the input unchanged.
Eigen::MatrixXd truncate_rank(const Eigen::MatrixXd& m, Index r);

// Sequential mode-1, mode-2, mode-3 rank truncation of the matricizations.
Tensor3 project_tucker(const Tensor3& t, const Ranks& ranks);

struct TuckerFactors {
  Tensor3 core;          // r1 x r2 x r3
  Eigen::MatrixXd u1, u2, u3;  // orthonormal columns, p_i x r_i

  Tensor3 reconstruct() const;
  Ranks ranks() const { return {core.dim1(), core.dim2(), core.dim3()}; }
};

// Higher-order SVD: factor i holds the top r_i left singular vectors of the
// mode-i unfolding, core = t x1 u1^T x2 u2^T x3 u3^T. Deterministic sign
// convention: the largest-magnitude entry of each factor column is positive.
TuckerFactors hosvd(const Tensor3& t, const Ranks& ranks);

// Multilinear ranks: per mode, singular values above rel_tol * largest.
Ranks multilinear_ranks(const Tensor3& t, double rel_tol = 1e-8);

// Flips singular-vector columns so each column's largest-magnitude entry is
// positive (first occurrence wins on ties).
Eigen::MatrixXd fix_singular_vector_signs(Eigen::MatrixXd u);

// Permutation relating vec(matricize(t, from)) to vec(matricize(t, to)) for
// fixed dimensions: apply() maps the source vec to the target vec.
class ModePermutation {
 public:
  ModePermutation(std::vector<Index> dest, Index n) : dest_(std::move(dest)), n_(n) {}

  Index size() const { return n_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  // Applies the permutation to matrix rows: row p of m becomes row dest[p].
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& m) const;
  // Dense matrix form T with T * vec_from = vec_to (for small test instances).
  Eigen::MatrixXd matrix() const;

 private:
  std::vector<Index> dest_;
  Index n_;
};

ModePermutation mode_permutation(int from_mode, int to_mode, Index p1, Index p2, Index p3);

}  // namespace mlrhar
