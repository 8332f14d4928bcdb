#include "robreg/offline.hpp"

#include <cmath>
#include <limits>

namespace robreg {
namespace {

void check_design(const DataSet& data) {
  const Matrix gram = data.x.transpose() * data.x;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  require(hi > 0 && lo > 1e-10 * hi, Errc::degenerate_design,
          "sum of X_i X_i^T is not numerically positive definite");
}

void check_sigma_inv(const DataSet& data, const Matrix& sigma_inv) {
  require(sigma_inv.rows() == data.q() && sigma_inv.cols() == data.q(), Errc::dimension_mismatch,
          "sigma_inv must be q×q");
  require(sigma_inv.allFinite(), Errc::non_finite, "sigma_inv has non-finite entries");
  require(sigma_inv.llt().info() == Eigen::Success, Errc::invalid_argument,
          "sigma_inv is not positive definite");
}

Vector floored_weights(const Vector& norms, double floor) {
  return norms.unaryExpr([floor](double r) { return 1.0 / std::max(r, floor); });
}

double mean_of(const Vector& v) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += v(i);
  return s / static_cast<double>(v.size());
}

Vector norms_at(const DataSet& data, const Matrix& beta, const Matrix* sigma_inv) {
  return row_norms(residuals(data, beta).eps, sigma_inv);
}

/// β = A·L⁻¹ for the weights w.
Matrix weighted_solve(const DataSet& data, const Vector& w) {
  const Matrix wx = w.asDiagonal() * data.x;
  const Matrix a = data.y.transpose() * wx;   // q×p
  const Matrix l = data.x.transpose() * wx;   // p×p
  Eigen::LLT<Matrix> llt(l);
  require(llt.info() == Eigen::Success, Errc::singular_weight_matrix,
          "weighted Gram matrix is not positive definite");
  Matrix beta_t = llt.solve(a.transpose());
  require(beta_t.allFinite(), Errc::singular_weight_matrix, "weighted Gram solve produced non-finite values");
  return beta_t.transpose();
}

bool small_change(const Matrix& prev, const Matrix& next, double tol) {
  const double delta = (next - prev).norm();
  const double scale = next.norm();
  return delta <= tol * scale || (scale == 0.0 && delta == 0.0);
}

struct Point {
  double loss;
  Vector norms;
};

/// Moves beta to `next`, halving the step while the loss goes up by more
/// than rounding. Once a residual sits at the denominator floor the map need
/// not descend; false when no halving helps, beta unchanged.
template <typename Eval>
bool descend(Matrix& beta, Matrix next, Point& cur, const Eval& eval) {
  const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(cur.loss);
  for (int half = 0; half <= 40; ++half) {
    Point cand = eval(next);
    if (cand.loss <= cur.loss + slack) {
      beta = std::move(next);
      cur = std::move(cand);
      return true;
    }
    next = 0.5 * (beta + next);
  }
  return false;
}

FixpointReport run_fixpoint(const DataSet& data, const Matrix* sigma_inv,
                            const EstimatorConfig& config, std::optional<Matrix> init) {
  config.validate();
  check_design(data);
  FixpointReport rep;
  Matrix beta = init ? std::move(*init) : least_squares_start(data);
  check_beta(data, beta, sigma_inv);

  const auto eval = [&](const Matrix& b) {
    Vector nr = norms_at(data, b, sigma_inv);
    const double g = mean_of(nr);
    return Point{g, std::move(nr)};
  };
  Point cur = eval(beta);
  rep.loss_trace.push_back(cur.loss);
  for (int t = 1; t <= config.max_iter; ++t) {
    Matrix next = weighted_solve(data, floored_weights(cur.norms, config.denom_floor));
    const Matrix prev = beta;
    const bool moved = descend(beta, std::move(next), cur, eval);
    rep.loss_trace.push_back(cur.loss);
    rep.iterations = t;
    if (!moved || small_change(prev, beta, config.tol)) {
      rep.converged = true;
      break;
    }
  }
  rep.beta_hat = std::move(beta);
  return rep;
}

}  // namespace

Matrix least_squares_start(const DataSet& data) {
  const Matrix gram = data.x.transpose() * data.x;
  Eigen::LDLT<Matrix> ldlt(gram);
  require(ldlt.info() == Eigen::Success, Errc::degenerate_design, "Gram matrix factorisation failed");
  const Matrix xty = data.x.transpose() * data.y;  // p×q
  return ldlt.solve(xty).transpose();
}

Matrix fixpoint_map(const DataSet& data, const Matrix& beta, const Matrix* sigma_inv,
                    double denom_floor) {
  check_beta(data, beta, sigma_inv);
  return weighted_solve(data, floored_weights(norms_at(data, beta, sigma_inv), denom_floor));
}

Matrix fixpoint_gradient_step(const DataSet& data, const Matrix& beta, const Matrix* sigma_inv,
                              double denom_floor) {
  const Vector w = floored_weights(norms_at(data, beta, sigma_inv), denom_floor);
  const Matrix l = data.x.transpose() * w.asDiagonal() * data.x / static_cast<double>(data.n());
  // floor < every residual norm here, so the subgradient uses the same weights
  Matrix grad = empirical_subgradient(data, beta, sigma_inv, 0.0, denom_floor);
  if (sigma_inv) grad = sigma_inv->llt().solve(grad);
  const Matrix step = l.llt().solve(grad.transpose()).transpose();
  return beta - step;
}

FixpointReport fixpoint_ols(const DataSet& data, const EstimatorConfig& config,
                            std::optional<Matrix> init) {
  return run_fixpoint(data, nullptr, config, std::move(init));
}

FixpointReport fixpoint_wls(const DataSet& data, const Matrix& sigma_inv,
                            const EstimatorConfig& config, std::optional<Matrix> init) {
  check_sigma_inv(data, sigma_inv);
  return run_fixpoint(data, &sigma_inv, config, std::move(init));
}

FixpointReport fixpoint_ridge(const DataSet& data, const Matrix& sigma_inv, double lambda,
                              const EstimatorConfig& config, std::optional<Matrix> init) {
  config.validate();
  require(lambda > 0, Errc::invalid_argument, "ridge lambda must be > 0");
  check_design(data);
  check_sigma_inv(data, sigma_inv);
  const Index p = data.p();
  const Index q = data.q();
  const double n = static_cast<double>(data.n());

  FixpointReport rep;
  const Matrix zero = Matrix::Zero(q, p);
  const Matrix grad_at_zero = empirical_subgradient(data, zero, &sigma_inv, 0.0, config.denom_floor);
  if (grad_at_zero.norm() <= lambda) {
    // 0 satisfies the optimality condition of the penalised problem
    rep.beta_hat = zero;
    rep.loss_trace.push_back(empirical_loss(data, zero, &sigma_inv, lambda));
    rep.converged = true;
    return rep;
  }

  Matrix beta = init ? std::move(*init) : least_squares_start(data);
  check_beta(data, beta, &sigma_inv);
  bool perturbed = false;
  const auto escape_zero = [&](Matrix& b) {
    if (b.norm() > 0) return;
    require(!perturbed, Errc::zero_iterate, "ridge iterate collapsed to 0 after perturbation");
    perturbed = true;
    b = -1e-6 * grad_at_zero / grad_at_zero.norm();
  };
  escape_zero(beta);

  const auto eval = [&](const Matrix& b) {
    Vector nr = norms_at(data, b, &sigma_inv);
    const double g = mean_of(nr) + lambda * b.norm();
    return Point{g, std::move(nr)};
  };
  Point cur = eval(beta);
  rep.loss_trace.push_back(cur.loss);
  // M_t = Σ⁻¹ ⊗ L + c·I acts as X ↦ Σ⁻¹XL + cX on q×p matrices, so it is
  // inverted in the eigenbases of Σ⁻¹ (fixed) and L (per iteration)
  Eigen::SelfAdjointEigenSolver<Matrix> sig_es(sigma_inv);
  require(sig_es.info() == Eigen::Success, Errc::invalid_argument, "sigma_inv eigendecomposition failed");
  const Matrix& sig_vec = sig_es.eigenvectors();
  const Vector& sig_val = sig_es.eigenvalues();
  for (int t = 1; t <= config.max_iter; ++t) {
    const Vector w = floored_weights(cur.norms, config.denom_floor);
    const Matrix eps = residuals(data, beta).eps;
    const Matrix wx = w.asDiagonal() * data.x;
    const Matrix l = data.x.transpose() * wx / n;
    const double shift = lambda / beta.norm();
    const Matrix grad = -(sigma_inv * (eps.transpose() * wx)) / n + shift * beta;
    Eigen::SelfAdjointEigenSolver<Matrix> l_es(l);
    require(l_es.info() == Eigen::Success, Errc::singular_weight_matrix, "weighted Gram eigendecomposition failed");
    Matrix g = sig_vec.transpose() * grad * l_es.eigenvectors();
    for (Index k = 0; k < q; ++k)
      for (Index j = 0; j < p; ++j) {
        const double m = sig_val(k) * l_es.eigenvalues()(j) + shift;
        require(m > 0, Errc::singular_weight_matrix, "ridge preconditioner is not positive definite");
        g(k, j) /= m;
      }
    Matrix next = beta - sig_vec * g * l_es.eigenvectors().transpose();
    require(next.allFinite(), Errc::singular_weight_matrix, "ridge step produced non-finite values");
    escape_zero(next);

    const Matrix prev = beta;
    const bool moved = descend(beta, std::move(next), cur, eval);
    rep.loss_trace.push_back(cur.loss);
    rep.iterations = t;
    if (!moved || small_change(prev, beta, config.tol)) {
      rep.converged = true;
      break;
    }
  }
  rep.beta_hat = std::move(beta);
  return rep;
}

}  // namespace robreg
