#pragma once

#include <Eigen/Dense>

namespace robreg {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

/// Kronecker product A ⊗ B; (A⊗B)((i·rb)+k, (j·cb)+l) = A(i,j)·B(k,l).
template <typename DA, typename DB>
MatrixX<typename DA::Scalar> kron(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  MatrixX<typename DA::Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Row-major vectorisation (β₁₁, …, β₁ₚ, …, β_qp). With this ordering
/// vec(A·B·C) = (A ⊗ Cᵀ)·vec(B).
template <typename Derived>
VectorX<typename Derived::Scalar> vec_rowmajor(const Eigen::MatrixBase<Derived>& m) {
  const MatrixX<typename Derived::Scalar> t = m.transpose();
  return Eigen::Map<const VectorX<typename Derived::Scalar>>(t.data(), t.size());
}

template <typename Derived>
MatrixX<typename Derived::Scalar> unvec_rowmajor(const Eigen::MatrixBase<Derived>& v, Index rows,
                                                 Index cols) {
  using M = MatrixX<typename Derived::Scalar>;
  const VectorX<typename Derived::Scalar> tmp = v;
  return Eigen::Map<const M>(tmp.data(), cols, rows).transpose();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// (m + mᵀ)/2
template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

}  // namespace robreg
