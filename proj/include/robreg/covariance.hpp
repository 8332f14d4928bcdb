#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "robreg/core.hpp"

namespace robreg {

enum class McmAlgorithm { weiszfeld, averaged_sgd };

struct McmOptions {
  McmAlgorithm algorithm = McmAlgorithm::weiszfeld;
  bool center_with_median = true;
  int mc_samples = 100000;
  int calib_max_iter = 500;
  double calib_tol = 1e-6;

  void validate() const;
};

/// Robust Σ estimate: MCM V, its spectrum P·diag(δ)·Pᵀ, calibrated eigenvalues
/// and the reconstructed Σ̂ = P·diag(λ)·Pᵀ, Σ̂⁻¹ = P·diag(1/λ)·Pᵀ.
struct CovarianceEstimate {
  Matrix v_mcm;
  Matrix eigvecs;
  Vector delta_raw;
  Vector lambda_cal;
  Matrix sigma_hat;
  Matrix sigma_inv_hat;
  bool calibration_converged = true;
};

/// Weiszfeld iteration for the geometric median of the rows of `points`.
Vector geometric_median(const Matrix& points, const EstimatorConfig& config);

/// Median Covariation Matrix of the residual rows: the Frobenius geometric
/// median of ε̃ᵢε̃ᵢᵀ (ε̃ᵢ optionally centred at the geometric median).
/// Output is exactly symmetric.
Matrix mcm(const Residuals& residuals, const McmOptions& options, const EstimatorConfig& config);

struct Calibration {
  Vector lambda;
  int iterations = 0;
  bool converged = false;
};

/// Monte Carlo weight h(δ,λ,U) = 1/‖diag(δ) − ZZᵀ‖_F with Zⱼ = √λⱼ·Uⱼ, i.e.
/// [Σⱼ(δⱼ − λⱼUⱼ²)² + 2Σ_{j<k} λⱼλₖUⱼ²Uₖ²]^{−1/2}, for one draw U.
template <typename DU>
double calibration_weight(const Vector& delta, const Vector& lambda, const Eigen::MatrixBase<DU>& u) {
  double cross = 0.0;  // Σ δⱼλⱼUⱼ²
  double mass = 0.0;   // Σ λⱼUⱼ²
  for (Index j = 0; j < delta.size(); ++j) {
    const double z2 = lambda(j) * u(j) * u(j);
    cross += delta(j) * z2;
    mass += z2;
  }
  const double sq = delta.squaredNorm() - 2.0 * cross + mass * mass;
  return 1.0 / std::sqrt(std::max(sq, 1e-300));
}

/// Solves λ = δ ∘ E[h] ⊘ E[U²h] by fixed-point iteration from λ⁽⁰⁾ = δ with
/// `mc_samples` common-random-number draws fixed by `seed`.
Calibration calibrate_eigenvalues(const Vector& delta, const McmOptions& options, std::uint64_t seed);

/// mcm → symmetric eigendecomposition (clamped at denom_floor) →
/// calibrate_eigenvalues → Σ̂ and Σ̂⁻¹.
CovarianceEstimate estimate_sigma(const Residuals& residuals, const McmOptions& options,
                                  const EstimatorConfig& config, std::uint64_t seed);

}  // namespace robreg
