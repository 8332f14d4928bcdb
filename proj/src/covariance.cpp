#include "robreg/covariance.hpp"

#include <vector>

#include "robreg/online.hpp"
#include "robreg/random.hpp"

namespace robreg {

void McmOptions::validate() const {
  require(mc_samples >= 1000, Errc::invalid_argument, "mc_samples must be >= 1000");
  require(calib_max_iter > 0, Errc::invalid_argument, "calib_max_iter must be > 0");
  require(calib_tol > 0, Errc::invalid_argument, "calib_tol must be > 0");
}

Vector geometric_median(const Matrix& points, const EstimatorConfig& config) {
  config.validate();
  require(points.rows() >= 1 && points.cols() >= 1, Errc::invalid_argument,
          "geometric_median needs at least one point");
  require(points.allFinite(), Errc::non_finite, "geometric_median: non-finite points");
  Vector m = points.colwise().mean().transpose();
  Vector w(points.rows());
  for (int t = 0; t < config.max_iter; ++t) {
    for (Index i = 0; i < points.rows(); ++i)
      w(i) = 1.0 / std::max((points.row(i).transpose() - m).norm(), config.denom_floor);
    const Vector next = points.transpose() * w / w.sum();
    const double delta = (next - m).norm();
    m = next;
    if (delta <= config.tol * std::max(m.norm(), config.denom_floor)) break;
  }
  return m;
}

namespace {

Matrix mcm_weiszfeld(const Matrix& e, const EstimatorConfig& config) {
  const Index n = e.rows();
  Matrix v = e.transpose() * e / static_cast<double>(n);
  const Vector sq_norms = e.rowwise().squaredNorm();
  Vector w(n);
  for (int t = 0; t < config.max_iter; ++t) {
    // ‖eeᵀ − V‖_F² = ‖e‖⁴ − 2eᵀVe + ‖V‖_F²
    const Matrix ev = e * v;
    const double vnorm2 = v.squaredNorm();
    for (Index i = 0; i < n; ++i) {
      const double d2 = sq_norms(i) * sq_norms(i) - 2.0 * ev.row(i).dot(e.row(i)) + vnorm2;
      w(i) = 1.0 / std::max(std::sqrt(std::max(d2, 0.0)), config.denom_floor);
    }
    Matrix next = symmetrized(e.transpose() * w.asDiagonal() * e / w.sum());
    const double delta = (next - v).norm();
    v = std::move(next);
    if (delta <= config.tol * std::max(v.norm(), config.denom_floor)) break;
  }
  return v;
}

Matrix mcm_averaged_sgd(const Matrix& z, bool center, const EstimatorConfig& config) {
  const Index q = z.cols();
  Vector m = Vector::Zero(q);
  Vector m_bar = Vector::Zero(q);
  Matrix v = Matrix::Zero(q, q);
  Matrix v_bar = Matrix::Zero(q, q);
  Vector e(q);
  Matrix diff(q, q);
  for (Index k = 0; k < z.rows(); ++k) {
    const double g = step_size(static_cast<long>(k) + 1, config);
    const double avg = 1.0 / static_cast<double>(k + 1);
    if (center) {
      e = z.row(k).transpose() - m;
      const double en = e.norm();
      if (en >= config.denom_floor) m += (g / en) * e;
      m_bar += avg * (m - m_bar);
      e = z.row(k).transpose() - m_bar;
    } else {
      e = z.row(k).transpose();
    }
    diff.noalias() = e * e.transpose();
    diff -= v;
    const double dn = diff.norm();
    if (dn >= config.denom_floor) v += (g / dn) * diff;
    v_bar += avg * (v - v_bar);
  }
  return symmetrized(v_bar);
}

}  // namespace

Matrix mcm(const Residuals& residuals, const McmOptions& options, const EstimatorConfig& config) {
  config.validate();
  const Matrix& eps = residuals.eps;
  require(eps.cols() >= 1, Errc::invalid_argument, "mcm: residuals have no columns");
  require(eps.rows() >= eps.cols(), Errc::degenerate_residuals, "mcm needs N >= q residual rows");
  require(eps.allFinite(), Errc::non_finite, "mcm: non-finite residuals");

  if (options.algorithm == McmAlgorithm::averaged_sgd)
    return mcm_averaged_sgd(eps, options.center_with_median, config);

  if (!options.center_with_median) return mcm_weiszfeld(eps, config);
  const Vector med = geometric_median(eps, config);
  return mcm_weiszfeld(eps.rowwise() - med.transpose(), config);
}

namespace {

/// Squared draws U², one draw per column. They depend only on (q, count,
/// seed), which CV folds and the methods of one replicate share, so each
/// thread keeps its last set.
const Matrix& calibration_draws(Index q, int count, std::uint64_t seed) {
  struct Cache {
    Index q = -1;
    int count = -1;
    std::uint64_t seed = 0;
    Matrix u;
  };
  thread_local Cache cache;
  if (cache.q != q || cache.count != count || cache.seed != seed) {
    cache.u = standard_normal_rows(count, q, seed, streams::block_base + (streams::calibration << 16))
                  .transpose()
                  .cwiseAbs2();
    cache.q = q;
    cache.count = count;
    cache.seed = seed;
  }
  return cache.u;
}

}  // namespace

Calibration calibrate_eigenvalues(const Vector& delta, const McmOptions& options, std::uint64_t seed) {
  options.validate();
  const Index q = delta.size();
  require(q >= 2, Errc::invalid_argument, "calibrate_eigenvalues needs q >= 2");
  require(delta.allFinite() && delta.minCoeff() > 0, Errc::invalid_argument,
          "calibrate_eigenvalues needs positive eigenvalues");

  const Matrix& u2 = calibration_draws(q, options.mc_samples, seed);
  const Index draws = u2.cols();
  const Index blocks = (draws + kMonteCarloBlock - 1) / kMonteCarloBlock;
  const double delta_sq = delta.squaredNorm();

  Calibration out;
  out.lambda = delta;
  std::vector<double> h_sum(static_cast<std::size_t>(blocks));
  Matrix u2h_sum(q, blocks);
  for (int it = 1; it <= options.calib_max_iter; ++it) {
    // same weight as calibration_weight, for a block of draws at once
    const Vector dl = delta.cwiseProduct(out.lambda);
    parallel_for(blocks, [&](Index b) {
      const Index lo = b * kMonteCarloBlock;
      const Index len = std::min(draws, lo + kMonteCarloBlock) - lo;
      const auto blk = u2.middleCols(lo, len);
      const Vector mass = blk.transpose() * out.lambda;
      const Vector cross = blk.transpose() * dl;
      const Vector h = (delta_sq - 2.0 * cross.array() + mass.array().square()).max(1e-300).rsqrt().matrix();
      h_sum[static_cast<std::size_t>(b)] = h.sum();
      u2h_sum.col(b) = blk * h;
    });
    double eh = 0.0;
    Vector eu2h = Vector::Zero(q);
    for (Index b = 0; b < blocks; ++b) {
      eh += h_sum[static_cast<std::size_t>(b)];
      eu2h += u2h_sum.col(b);
    }
    const Vector next = delta.cwiseProduct(Vector::Constant(q, eh).cwiseQuotient(eu2h));
    const double change = ((next - out.lambda).cwiseAbs().cwiseQuotient(out.lambda)).maxCoeff();
    out.lambda = next;
    out.iterations = it;
    if (change < options.calib_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

CovarianceEstimate estimate_sigma(const Residuals& residuals, const McmOptions& options,
                                  const EstimatorConfig& config, std::uint64_t seed) {
  CovarianceEstimate est;
  est.v_mcm = mcm(residuals, options, config);
  Eigen::SelfAdjointEigenSolver<Matrix> es(est.v_mcm);
  require(es.info() == Eigen::Success, Errc::degenerate_residuals, "MCM eigendecomposition failed");
  est.eigvecs = es.eigenvectors();
  est.delta_raw = es.eigenvalues().cwiseMax(config.denom_floor);

  const Calibration cal = calibrate_eigenvalues(est.delta_raw, options, seed);
  est.lambda_cal = cal.lambda;
  est.calibration_converged = cal.converged;
  est.sigma_hat = symmetrized(est.eigvecs * est.lambda_cal.asDiagonal() * est.eigvecs.transpose());
  est.sigma_inv_hat =
      symmetrized(est.eigvecs * est.lambda_cal.cwiseInverse().asDiagonal() * est.eigvecs.transpose());
  return est;
}

}  // namespace robreg
