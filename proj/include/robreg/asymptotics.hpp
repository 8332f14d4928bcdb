#pragma once

#include <cstdint>

#include "robreg/core.hpp"

namespace robreg {

enum class AsymptoticKind { ols, wls };

/// Limiting covariance of √n(vec(β̂) − vec(β*)), ordered (q-side) ⊗ (p-side)
/// to match the row-major vectorisation.
struct AsymptoticCovariance {
  Matrix matrix;  // pq×pq
  AsymptoticKind kind = AsymptoticKind::wls;
  long mc_samples_used = 0;
};

/// E[1/‖U‖] for U ~ N(0, I_q): Γ((q−1)/2) / (√2·Γ(q/2)). Diverges for q = 1.
double chi_inverse_moment(int q);

/// c_q = 2q/(q−1)² · [Γ(q/2)/Γ((q−1)/2)]²
double wls_variance_factor(int q);

/// c_q · Σ ⊗ E[XXᵀ]⁻¹ (requires q ≥ 3).
AsymptoticCovariance wls_asymptotic_cov(const Matrix& sigma, const Matrix& exx);

/// Monte Carlo estimate of H⁻¹MH⁻¹ ⊗ E[XXᵀ]⁻¹ with H = E[(I − V_ε)/‖ε‖],
/// M = E[V_ε], V_ε = εεᵀ/‖ε‖², ε ~ N(0, Σ).
AsymptoticCovariance ols_asymptotic_cov(const Matrix& sigma, const Matrix& exx, long mc_samples,
                                        std::uint64_t seed);

/// Only the q×q OLS factor H⁻¹MH⁻¹, estimated in the eigenbasis of Σ where H and M are diagonal.
Matrix ols_noise_factor(const Matrix& sigma, long mc_samples, std::uint64_t seed);

struct VarianceRatioReport {
  Vector ratios;               // diag(wls) ⊘ diag(ols), length pq
  double min_eig_difference;   // λ_min(ols − wls)
  double trace_ols;
  bool difference_psd;         // min_eig_difference ≥ −1e-6·trace_ols
  AsymptoticCovariance ols;
  AsymptoticCovariance wls;
};

VarianceRatioReport variance_ratio_report(const Matrix& sigma, const Matrix& exx, long mc_samples,
                                          std::uint64_t seed);

}  // namespace robreg
