#include "robreg/asymptotics.hpp"

#include <cmath>
#include <vector>

#include "robreg/random.hpp"

namespace robreg {
namespace {

void check_inputs(const Matrix& sigma, const Matrix& exx) {
  require(sigma.rows() == sigma.cols() && exx.rows() == exx.cols(), Errc::dimension_mismatch,
          "sigma and E[XX^T] must be square");
  require(sigma.allFinite() && exx.allFinite(), Errc::non_finite, "non-finite covariance input");
  require(sigma.rows() >= 3, Errc::invalid_argument, "asymptotic covariance needs q >= 3");
  require(sigma.llt().info() == Eigen::Success, Errc::invalid_argument, "sigma is not positive definite");
  require(exx.llt().info() == Eigen::Success, Errc::invalid_argument, "E[XX^T] is not positive definite");
}

Matrix spd_inverse(const Matrix& m) {
  return symmetrized(m.llt().solve(Matrix::Identity(m.rows(), m.cols())));
}

}  // namespace

double chi_inverse_moment(int q) {
  require(q >= 2, Errc::invalid_argument, "chi inverse moment diverges for q < 2");
  const double a = 0.5 * (q - 1);
  const double b = 0.5 * q;
  return std::exp(std::lgamma(a) - std::lgamma(b)) / std::sqrt(2.0);
}

double wls_variance_factor(int q) {
  require(q >= 2, Errc::invalid_argument, "variance factor needs q >= 2");
  const double qd = q;
  const double log_ratio = std::lgamma(0.5 * qd) - std::lgamma(0.5 * (qd - 1));
  return 2.0 * qd / ((qd - 1) * (qd - 1)) * std::exp(2.0 * log_ratio);
}

AsymptoticCovariance wls_asymptotic_cov(const Matrix& sigma, const Matrix& exx) {
  check_inputs(sigma, exx);
  AsymptoticCovariance out;
  out.kind = AsymptoticKind::wls;
  out.matrix = symmetrized(wls_variance_factor(static_cast<int>(sigma.rows())) * kron(sigma, spd_inverse(exx)));
  return out;
}

Matrix ols_noise_factor(const Matrix& sigma, long mc_samples, std::uint64_t seed) {
  require(mc_samples >= 10000, Errc::invalid_argument, "ols asymptotic covariance needs >= 1e4 draws");
  const Index q = sigma.rows();
  // ε = P·Λ^{1/2}·u; flipping the sign of one coordinate of Λ^{1/2}u leaves the
  // law unchanged, so H and M are diagonal in the basis P and only their
  // diagonals are estimated.
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sigma));
  require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0, Errc::invalid_argument,
          "sigma must be symmetric positive definite");
  const Vector root = es.eigenvalues().cwiseSqrt();
  const Index blocks = (mc_samples + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<Vector> h_part(static_cast<std::size_t>(blocks));
  std::vector<Vector> m_part(static_cast<std::size_t>(blocks));
  parallel_for(blocks, [&](Index b) {
    const Index lo = b * kMonteCarloBlock;
    const Index count = std::min<Index>(mc_samples - lo, kMonteCarloBlock);
    auto eng = make_engine(seed, streams::block_base + (streams::asymptotic << 16) + static_cast<std::uint64_t>(b));
    std::normal_distribution<double> nd;
    Vector h = Vector::Zero(q);
    Vector m = Vector::Zero(q);
    Vector e2(q);
    for (Index k = 0; k < count; ++k) {
      for (Index j = 0; j < q; ++j) {
        const double e = root(j) * nd(eng);
        e2(j) = e * e;
      }
      const double r2 = e2.sum();
      const double r = std::sqrt(r2);
      m += e2 / r2;
      h.array() += (1.0 - e2.array() / r2) / r;
    }
    h_part[static_cast<std::size_t>(b)] = h;
    m_part[static_cast<std::size_t>(b)] = m;
  });
  Vector h = Vector::Zero(q);
  Vector m = Vector::Zero(q);
  for (Index b = 0; b < blocks; ++b) {
    h += h_part[static_cast<std::size_t>(b)];
    m += m_part[static_cast<std::size_t>(b)];
  }
  h /= static_cast<double>(mc_samples);
  m /= static_cast<double>(mc_samples);
  require(h.minCoeff() > 0, Errc::singular_h, "Monte Carlo estimate of H is not invertible");
  const Vector f = m.cwiseQuotient(h.cwiseAbs2());
  return symmetrized(es.eigenvectors() * f.asDiagonal() * es.eigenvectors().transpose());
}

AsymptoticCovariance ols_asymptotic_cov(const Matrix& sigma, const Matrix& exx, long mc_samples,
                                        std::uint64_t seed) {
  check_inputs(sigma, exx);
  AsymptoticCovariance out;
  out.kind = AsymptoticKind::ols;
  out.mc_samples_used = mc_samples;
  out.matrix = symmetrized(kron(ols_noise_factor(sigma, mc_samples, seed), spd_inverse(exx)));
  return out;
}

VarianceRatioReport variance_ratio_report(const Matrix& sigma, const Matrix& exx, long mc_samples,
                                          std::uint64_t seed) {
  VarianceRatioReport rep;
  rep.wls = wls_asymptotic_cov(sigma, exx);
  rep.ols = ols_asymptotic_cov(sigma, exx, mc_samples, seed);
  rep.ratios = rep.wls.matrix.diagonal().cwiseQuotient(rep.ols.matrix.diagonal());
  const Matrix diff = symmetrized(rep.ols.matrix - rep.wls.matrix);
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
  rep.min_eig_difference = es.eigenvalues().minCoeff();
  rep.trace_ols = rep.ols.matrix.trace();
  rep.difference_psd = rep.min_eig_difference >= -1e-6 * rep.trace_ols;
  return rep;
}

}  // namespace robreg
