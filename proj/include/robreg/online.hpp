#pragma once

#include "robreg/core.hpp"

namespace robreg {

/// Current SGD iterate β_n, its log-weighted average β̄_n and the running
/// weight sum Σ_{k=0}^{n} (log(k+1))^w.
struct OnlineState {
  Matrix beta_current;
  Matrix beta_averaged;
  long step_index = 0;
  double weight_sum = 0.0;

  /// State at n = 0 with β_0 = β̄_0 = beta0.
  static OnlineState start(Matrix beta0, double w);
};

/// γ_n = c_γ·n^{−γ}
double step_size(long n, const EstimatorConfig& config);

/// ω_k = (log(k+1))^w with 0^0 = 1, so w = 0 is plain averaging.
double averaging_weight(long k, double w);

/// Single-observation recursion with preallocated scratch. `sigma_inv`
/// selects the Mahalanobis metric and can be swapped mid-stream.
class OnlineEstimator {
 public:
  OnlineEstimator(Index p, Index q, const EstimatorConfig& config);
  OnlineEstimator(OnlineState state, const EstimatorConfig& config);

  void set_sigma_inv(std::optional<Matrix> sigma_inv);
  const std::optional<Matrix>& sigma_inv() const { return sigma_inv_; }

  template <typename DX, typename DY>
  void update(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) {
    x_ = x;
    y_ = y;
    step();
  }

  const OnlineState& state() const { return state_; }
  OnlineState release() { return std::move(state_); }

 private:
  void step();

  EstimatorConfig config_;
  OnlineState state_;
  std::optional<Matrix> sigma_inv_;
  Vector x_, y_, r_, wr_;
};

/// One step of the (optionally Mahalanobis, optionally ridge-penalised)
/// stochastic gradient recursion followed by the weighted-average update.
OnlineState online_step(OnlineState state, const Vector& x, const Vector& y,
                        const Matrix* sigma_inv, const EstimatorConfig& config);

/// Single pass over the rows of `data` in order from β_0 = 0; returns β̄_n.
/// loss_trace holds the loss of β̄_k on the first k rows at k = 1, 2, 4, …
/// followed by the full-data loss of the final average.
Fit fit_online(const DataSet& data, const Matrix* sigma_inv, const EstimatorConfig& config);

}  // namespace robreg
