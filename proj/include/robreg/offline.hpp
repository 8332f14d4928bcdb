#pragma once

#include <optional>

#include "robreg/core.hpp"

namespace robreg {

struct FixpointReport {
  Matrix beta_hat;
  std::vector<double> loss_trace;  // loss at the start point, then after each iteration
  int iterations = 0;
  bool converged = false;
};

/// Weiszfeld-type map T(β) = [Σ YᵢXᵢᵀ/rᵢ(β)]·[Σ XᵢXᵢᵀ/rᵢ(β)]⁻¹ with
/// rᵢ(β) = max(‖Yᵢ − βXᵢ‖_∗, denom_floor).
Matrix fixpoint_map(const DataSet& data, const Matrix& beta, const Matrix* sigma_inv,
                    double denom_floor);

/// Same step written as β − ∇G_n(β)·L⁻¹ (Euclidean) or β − Σ·∇G_{n,Σ}(β)·L⁻¹;
/// kept as a separate route to cross-check fixpoint_map.
Matrix fixpoint_gradient_step(const DataSet& data, const Matrix& beta, const Matrix* sigma_inv,
                              double denom_floor);

/// Naive least-squares start used by all fixed-point solvers.
Matrix least_squares_start(const DataSet& data);

/// All three solvers halve a step that would raise the loss and stop once
/// halving no longer helps, so loss_trace never increases.
FixpointReport fixpoint_ols(const DataSet& data, const EstimatorConfig& config,
                            std::optional<Matrix> init = std::nullopt);

FixpointReport fixpoint_wls(const DataSet& data, const Matrix& sigma_inv,
                            const EstimatorConfig& config,
                            std::optional<Matrix> init = std::nullopt);

/// Preconditioned descent on G_{n,Σ,λ}:
/// vec(β_{t+1}) = vec(β_t) − M_t⁻¹·vec(∇G_{n,Σ,λ}(β_t)),
/// M_t = Σ⁻¹ ⊗ (1/n)Σᵢ XᵢXᵢᵀ/rᵢ + (λ/‖β_t‖_F)·I_{pq}, with row-major vec.
FixpointReport fixpoint_ridge(const DataSet& data, const Matrix& sigma_inv, double lambda,
                              const EstimatorConfig& config,
                              std::optional<Matrix> init = std::nullopt);

}  // namespace robreg
