#include "mlrhar/tensor.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace mlrhar {

namespace {

void check_mode(int mode) { require(mode >= 1 && mode <= 3, "mode must be 1, 2 or 3"); }

// Row index and column index of element (i1,i2,i3) in the mode-k unfolding.
inline Index unfold_row(int mode, Index i1, Index i2, Index i3) {
  return mode == 1 ? i1 : (mode == 2 ? i2 : i3);
}

inline Index unfold_col(int mode, Index i1, Index i2, Index i3, Index p1, Index p2) {
  switch (mode) {
    case 1: return i2 + i3 * p2;
    case 2: return i1 + i3 * p1;
    default: return i1 + i2 * p1;
  }
}

Eigen::BDCSVD<Eigen::MatrixXd> thin_svd(const Eigen::MatrixXd& m) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ensure(svd.info() == Eigen::Success, "SVD did not converge");
  return svd;
}

}  // namespace

Tensor3 Tensor3::from_data(Index p1, Index p2, Index p3, Eigen::VectorXd data) {
  require(p1 >= 0 && p2 >= 0 && p3 >= 0, "Tensor3: negative dimension");
  require(data.size() == p1 * p2 * p3, "Tensor3: data length does not match dimensions");
  require(data.allFinite(), "Tensor3: non-finite entry");
  Tensor3 t;
  t.p1_ = p1;
  t.p2_ = p2;
  t.p3_ = p3;
  t.data_ = std::move(data);
  return t;
}

Index Tensor3::dim(int mode) const {
  check_mode(mode);
  return mode == 1 ? p1_ : (mode == 2 ? p2_ : p3_);
}

void Tensor3::set_slice3(Index k, const Eigen::MatrixXd& m) {
  require(k >= 0 && k < p3_, "Tensor3::set_slice3: index out of range");
  require(m.rows() == p1_ && m.cols() == p2_, "Tensor3::set_slice3: slice shape mismatch");
  require(m.allFinite(), "Tensor3::set_slice3: non-finite entry");
  Eigen::Map<Eigen::MatrixXd>(data_.data() + k * p1_ * p2_, p1_, p2_) = m;
}

Tensor3& Tensor3::operator+=(const Tensor3& o) {
  require(p1_ == o.p1_ && p2_ == o.p2_ && p3_ == o.p3_, "Tensor3: dimension mismatch");
  data_ += o.data_;
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& o) {
  require(p1_ == o.p1_ && p2_ == o.p2_ && p3_ == o.p3_, "Tensor3: dimension mismatch");
  data_ -= o.data_;
  return *this;
}

Tensor3& Tensor3::operator*=(double s) {
  require(std::isfinite(s), "Tensor3: non-finite scalar");
  data_ *= s;
  return *this;
}

Eigen::MatrixXd matricize(const Tensor3& t, int mode) {
  check_mode(mode);
  const Index p1 = t.dim1(), p2 = t.dim2(), p3 = t.dim3();
  if (mode == 1) return t.mode1();
  if (mode == 3) {
    // mode-3 columns run over (i1, i2) which is exactly the storage order of a
    // slice, so the unfolding is the transposed p1*p2 x p3 reshape.
    return Eigen::Map<const Eigen::MatrixXd>(t.data().data(), p1 * p2, p3).transpose();
  }
  Eigen::MatrixXd out(p2, p1 * p3);
  for (Index k = 0; k < p3; ++k) out.middleCols(k * p1, p1) = t.slice3(k).transpose();
  return out;
}

Tensor3 fold(const Eigen::MatrixXd& m, int mode, Index p1, Index p2, Index p3) {
  check_mode(mode);
  require(m.allFinite(), "fold: non-finite entry");
  const Index rows = mode == 1 ? p1 : (mode == 2 ? p2 : p3);
  const Index cols = mode == 1 ? p2 * p3 : (mode == 2 ? p1 * p3 : p1 * p2);
  require(m.rows() == rows && m.cols() == cols, "fold: matrix shape does not match target dimensions");
  Tensor3 t(p1, p2, p3);
  if (mode == 1) {
    Eigen::VectorXd data = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    return Tensor3::from_data(p1, p2, p3, std::move(data));
  }
  if (mode == 3) {
    Eigen::MatrixXd mt = m.transpose();
    Eigen::VectorXd data = Eigen::Map<const Eigen::VectorXd>(mt.data(), mt.size());
    return Tensor3::from_data(p1, p2, p3, std::move(data));
  }
  for (Index k = 0; k < p3; ++k) t.set_slice3(k, m.middleCols(k * p1, p1).transpose());
  return t;
}

Tensor3 mode_multiply(const Tensor3& t, const Eigen::MatrixXd& u, int mode) {
  check_mode(mode);
  require(u.cols() == t.dim(mode), "mode_multiply: matrix columns must equal tensor dimension");
  require(u.allFinite(), "mode_multiply: non-finite entry");
  const Index q = u.rows();
  if (mode == 1) {
    Eigen::MatrixXd res = u * t.mode1();
    return fold(res, 1, q, t.dim2(), t.dim3());
  }
  if (mode == 2) {
    Eigen::MatrixXd res = u * matricize(t, 2);
    return fold(res, 2, t.dim1(), q, t.dim3());
  }
  Eigen::MatrixXd res = u * matricize(t, 3);
  return fold(res, 3, t.dim1(), t.dim2(), q);
}

Eigen::MatrixXd truncate_rank(const Eigen::MatrixXd& m, Index r) {
  require(r >= 0, "truncate_rank: negative rank");
  require(m.allFinite(), "truncate_rank: non-finite entry");
  if (r == 0) return Eigen::MatrixXd::Zero(m.rows(), m.cols());
  if (r >= std::min(m.rows(), m.cols())) return m;
  auto svd = thin_svd(m);
  return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
}

Tensor3 project_tucker(const Tensor3& t, const Ranks& ranks) {
  for (int mode = 1; mode <= 3; ++mode)
    require(ranks[mode - 1] >= 1 && ranks[mode - 1] <= t.dim(mode),
            "project_tucker: rank out of range for mode " + std::to_string(mode));
  Tensor3 out =
      fold(truncate_rank(t.mode1(), ranks[0]), 1, t.dim1(), t.dim2(), t.dim3());
  out = fold(truncate_rank(matricize(out, 2), ranks[1]), 2, t.dim1(), t.dim2(), t.dim3());
  out = fold(truncate_rank(matricize(out, 3), ranks[2]), 3, t.dim1(), t.dim2(), t.dim3());
  return out;
}

Tensor3 TuckerFactors::reconstruct() const {
  Tensor3 t = mode_multiply(core, u1, 1);
  t = mode_multiply(t, u2, 2);
  return mode_multiply(t, u3, 3);
}

Eigen::MatrixXd fix_singular_vector_signs(Eigen::MatrixXd u) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0.0) u.col(j) = -u.col(j);
  }
  return u;
}

TuckerFactors hosvd(const Tensor3& t, const Ranks& ranks) {
  for (int mode = 1; mode <= 3; ++mode)
    require(ranks[mode - 1] >= 1 && ranks[mode - 1] <= t.dim(mode),
            "hosvd: rank out of range for mode " + std::to_string(mode));
  TuckerFactors f;
  f.u1 = fix_singular_vector_signs(thin_svd(t.mode1()).matrixU().leftCols(ranks[0]));
  f.u2 = fix_singular_vector_signs(thin_svd(matricize(t, 2)).matrixU().leftCols(ranks[1]));
  f.u3 = fix_singular_vector_signs(thin_svd(matricize(t, 3)).matrixU().leftCols(ranks[2]));
  Tensor3 core = mode_multiply(t, f.u1.transpose(), 1);
  core = mode_multiply(core, f.u2.transpose(), 2);
  f.core = mode_multiply(core, f.u3.transpose(), 3);
  return f;
}

Ranks multilinear_ranks(const Tensor3& t, double rel_tol) {
  Ranks r{0, 0, 0};
  for (int mode = 1; mode <= 3; ++mode) {
    Eigen::MatrixXd m = matricize(t, mode);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    ensure(svd.info() == Eigen::Success, "multilinear_ranks: SVD did not converge");
    const Eigen::VectorXd& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    Index count = 0;
    for (Index i = 0; i < s.size(); ++i)
      if (smax > 0.0 && s(i) > rel_tol * smax) ++count;
    r[mode - 1] = count;
  }
  return r;
}

Eigen::VectorXd ModePermutation::apply(const Eigen::VectorXd& v) const {
  require(v.size() == n_, "ModePermutation::apply: length mismatch");
  Eigen::VectorXd out(n_);
  for (Index p = 0; p < n_; ++p) out(dest_[p]) = v(p);
  return out;
}

Eigen::MatrixXd ModePermutation::apply_rows(const Eigen::MatrixXd& m) const {
  require(m.rows() == n_, "ModePermutation::apply_rows: row count mismatch");
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Index p = 0; p < n_; ++p) out.row(dest_[p]) = m.row(p);
  return out;
}

Eigen::MatrixXd ModePermutation::matrix() const {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n_, n_);
  for (Index p = 0; p < n_; ++p) t(dest_[p], p) = 1.0;
  return t;
}

ModePermutation mode_permutation(int from_mode, int to_mode, Index p1, Index p2, Index p3) {
  check_mode(from_mode);
  check_mode(to_mode);
  require(p1 >= 0 && p2 >= 0 && p3 >= 0, "mode_permutation: negative dimension");
  const Index n = p1 * p2 * p3;
  const Index rows_from = from_mode == 1 ? p1 : (from_mode == 2 ? p2 : p3);
  const Index rows_to = to_mode == 1 ? p1 : (to_mode == 2 ? p2 : p3);
  std::vector<Index> dest(static_cast<std::size_t>(n));
  for (Index i3 = 0; i3 < p3; ++i3)
    for (Index i2 = 0; i2 < p2; ++i2)
      for (Index i1 = 0; i1 < p1; ++i1) {
        const Index src = unfold_row(from_mode, i1, i2, i3) +
                          unfold_col(from_mode, i1, i2, i3, p1, p2) * rows_from;
        const Index dst = unfold_row(to_mode, i1, i2, i3) +
                          unfold_col(to_mode, i1, i2, i3, p1, p2) * rows_to;
        dest[static_cast<std::size_t>(src)] = dst;
      }
  return {std::move(dest), n};
}

}  // namespace mlrhar
