#pragma once

#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "robreg/error.hpp"
#include "robreg/linalg.hpp"

namespace robreg {

/// Paired design (n×p) and response (n×q) matrices, one observation per row.
template <typename Scalar>
struct BasicDataSet {
  MatrixX<Scalar> x;
  MatrixX<Scalar> y;

  BasicDataSet() = default;
  BasicDataSet(MatrixX<Scalar> x_, MatrixX<Scalar> y_) : x(std::move(x_)), y(std::move(y_)) {
    require(x.rows() >= 1 && x.cols() >= 1 && y.cols() >= 1, Errc::invalid_argument,
            "data set needs n >= 1, p >= 1, q >= 1");
    require(x.rows() == y.rows(), Errc::dimension_mismatch, "x and y row counts differ");
    require(x.allFinite() && y.allFinite(), Errc::non_finite, "data set has non-finite entries");
  }

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
  Index q() const { return y.cols(); }

  BasicDataSet subset(const std::vector<Index>& rows) const {
    MatrixX<Scalar> xs(static_cast<Index>(rows.size()), p());
    MatrixX<Scalar> ys(static_cast<Index>(rows.size()), q());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      xs.row(static_cast<Index>(k)) = x.row(rows[k]);
      ys.row(static_cast<Index>(k)) = y.row(rows[k]);
    }
    return {std::move(xs), std::move(ys)};
  }
};

using DataSet = BasicDataSet<double>;

struct ModelParams {
  Matrix beta;                 // q×p
  std::optional<Matrix> sigma; // q×q SPD

  void validate() const;
};

/// Step-size law c_γ·n^{−γ}, averaging power w, ridge penalty and the
/// budgets shared by every solver.
struct EstimatorConfig {
  double c_gamma = 1.0;
  double gamma = 0.75;
  double w = 2.0;
  double ridge_lambda = 0.0;
  int max_iter = 200;
  double tol = 1e-8;
  double denom_floor = 1e-12;

  void validate() const;
};

struct Fit {
  Matrix beta_hat;
  std::optional<Matrix> sigma_hat;
  std::vector<double> loss_trace;
  int iterations = 0;
  double elapsed_seconds = 0.0;
  bool converged = true;
};

struct Residuals {
  Matrix eps;  // n×q, row i = Yᵢ − β̂Xᵢ
};

// ---------------------------------------------------------------------------
// Kernels. All take β as q×p and an optional Σ⁻¹ (nullptr = Euclidean).

template <typename DV, typename DM>
typename DV::Scalar mahalanobis_norm(const Eigen::MatrixBase<DV>& v,
                                     const Eigen::MatrixBase<DM>& sigma_inv) {
  using std::sqrt;
  require(sigma_inv.rows() == v.size() && sigma_inv.cols() == v.size(), Errc::dimension_mismatch,
          "mahalanobis_norm: sigma_inv must be q×q");
  require(v.allFinite() && sigma_inv.allFinite(), Errc::non_finite,
          "mahalanobis_norm: non-finite input");
  const typename DV::Scalar quad = v.dot(sigma_inv * v);
  return sqrt(quad > 0 ? quad : typename DV::Scalar(0));
}

/// Per-row residual norms ‖Eᵢ‖ or ‖Eᵢ‖_{Σ⁻¹}. Both metrics run through the
/// same reduction so Σ⁻¹ = I reproduces the Euclidean values bit for bit.
template <typename Derived>
VectorX<typename Derived::Scalar> row_norms(const Eigen::MatrixBase<Derived>& eps,
                                            const MatrixX<typename Derived::Scalar>* sigma_inv) {
  using S = typename Derived::Scalar;
  using std::sqrt;
  const MatrixX<S> e = eps;
  MatrixX<S> weighted;
  if (sigma_inv) {
    require(sigma_inv->rows() == e.cols() && sigma_inv->cols() == e.cols(),
            Errc::dimension_mismatch, "sigma_inv must be q×q");
    weighted.noalias() = e * (*sigma_inv);
  } else {
    weighted = e;
  }
  VectorX<S> out(e.rows());
  for (Index i = 0; i < e.rows(); ++i) {
    const S quad = weighted.row(i).dot(e.row(i));
    out(i) = sqrt(quad > 0 ? quad : S(0));
  }
  return out;
}

template <typename Scalar, typename DB>
void check_beta(const BasicDataSet<Scalar>& data, const Eigen::MatrixBase<DB>& beta,
                const std::type_identity_t<MatrixX<Scalar>>* sigma_inv) {
  require(beta.rows() == data.q() && beta.cols() == data.p(), Errc::dimension_mismatch,
          "beta must be q×p");
  require(beta.allFinite(), Errc::non_finite, "beta has non-finite entries");
  if (sigma_inv) {
    require(sigma_inv->rows() == data.q() && sigma_inv->cols() == data.q(),
            Errc::dimension_mismatch, "sigma_inv must be q×q");
    require(sigma_inv->allFinite(), Errc::non_finite, "sigma_inv has non-finite entries");
  }
}

/// Y − XβT in the data's scalar type.
template <typename Scalar, typename DB>
MatrixX<Scalar> residual_matrix(const BasicDataSet<Scalar>& data, const Eigen::MatrixBase<DB>& beta) {
  check_beta(data, beta, nullptr);
  MatrixX<Scalar> eps = data.y;
  eps.noalias() -= data.x * beta.transpose();
  return eps;
}

template <typename DB>
Residuals residuals(const DataSet& data, const Eigen::MatrixBase<DB>& beta) {
  return Residuals{residual_matrix(data, beta)};
}

/// (1/n)·Σᵢ ‖Yᵢ − βXᵢ‖_∗ + λ‖β‖_F, summed in row order.
template <typename Scalar, typename DB>
Scalar empirical_loss(const BasicDataSet<Scalar>& data, const Eigen::MatrixBase<DB>& beta,
                      const std::type_identity_t<MatrixX<Scalar>>* sigma_inv = nullptr,
                      std::type_identity_t<Scalar> lambda = 0) {
  require(lambda >= 0, Errc::invalid_argument, "lambda must be >= 0");
  check_beta(data, beta, sigma_inv);
  const VectorX<Scalar> norms = row_norms(residual_matrix(data, beta), sigma_inv);
  Scalar sum = 0;
  for (Index i = 0; i < norms.size(); ++i) sum += norms(i);
  return sum / static_cast<Scalar>(data.n()) + lambda * beta.norm();
}

/// −(1/n)·Σᵢ W·rᵢXᵢᵀ/‖rᵢ‖_∗ + λβ/‖β‖_F with W = I or Σ⁻¹; rows with
/// ‖rᵢ‖_∗ < denom_floor contribute 0 and the penalty term vanishes at β = 0.
template <typename Scalar, typename DB>
MatrixX<Scalar> empirical_subgradient(const BasicDataSet<Scalar>& data,
                                      const Eigen::MatrixBase<DB>& beta,
                                      const std::type_identity_t<MatrixX<Scalar>>* sigma_inv = nullptr,
                                      std::type_identity_t<Scalar> lambda = 0,
                                      std::type_identity_t<Scalar> denom_floor = Scalar(1e-12)) {
  require(lambda >= 0, Errc::invalid_argument, "lambda must be >= 0");
  check_beta(data, beta, sigma_inv);
  const MatrixX<Scalar> eps = residual_matrix(data, beta);
  const VectorX<Scalar> norms = row_norms(eps, sigma_inv);
  VectorX<Scalar> wts(norms.size());
  for (Index i = 0; i < norms.size(); ++i) wts(i) = norms(i) < denom_floor ? Scalar(0) : 1 / norms(i);
  MatrixX<Scalar> grad = -(eps.transpose() * wts.asDiagonal() * data.x) / static_cast<Scalar>(data.n());
  if (sigma_inv) grad = (*sigma_inv) * grad;
  const Scalar bn = beta.norm();
  if (lambda > 0 && bn > 0) grad += (lambda / bn) * beta;
  return grad;
}

// ---------------------------------------------------------------------------
// CSV: header x1..xp,y1..yq then one observation per line.

DataSet read_csv(std::istream& in);
DataSet load_csv(const std::string& path);
void write_csv(std::ostream& out, const DataSet& data);

}  // namespace robreg
