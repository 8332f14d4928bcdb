#include "robreg/online.hpp"

#include <chrono>
#include <cmath>

namespace robreg {

OnlineState OnlineState::start(Matrix beta0, double w) {
  OnlineState s;
  s.beta_averaged = beta0;
  s.beta_current = std::move(beta0);
  s.step_index = 0;
  s.weight_sum = averaging_weight(0, w);
  return s;
}

double step_size(long n, const EstimatorConfig& config) {
  return config.c_gamma * std::pow(static_cast<double>(n), -config.gamma);
}

double averaging_weight(long k, double w) {
  if (w == 0.0) return 1.0;
  return std::pow(std::log(static_cast<double>(k) + 1.0), w);
}

OnlineEstimator::OnlineEstimator(Index p, Index q, const EstimatorConfig& config)
    : OnlineEstimator(OnlineState::start(Matrix::Zero(q, p), config.w), config) {}

OnlineEstimator::OnlineEstimator(OnlineState state, const EstimatorConfig& config)
    : config_(config), state_(std::move(state)) {
  config_.validate();
  const Index q = state_.beta_current.rows();
  const Index p = state_.beta_current.cols();
  require(q > 0 && p > 0, Errc::invalid_argument, "online state has empty beta");
  require(state_.beta_averaged.rows() == q && state_.beta_averaged.cols() == p,
          Errc::dimension_mismatch, "averaged iterate shape differs from current iterate");
  x_.resize(p);
  y_.resize(q);
  r_.resize(q);
  wr_.resize(q);
}

void OnlineEstimator::set_sigma_inv(std::optional<Matrix> sigma_inv) {
  if (sigma_inv) {
    const Index q = state_.beta_current.rows();
    require(sigma_inv->rows() == q && sigma_inv->cols() == q, Errc::dimension_mismatch,
            "sigma_inv must be q×q");
    require(sigma_inv->allFinite(), Errc::non_finite, "sigma_inv has non-finite entries");
  }
  sigma_inv_ = std::move(sigma_inv);
}

void OnlineEstimator::step() {
  Matrix& beta = state_.beta_current;
  require(x_.size() == beta.cols() && y_.size() == beta.rows(), Errc::dimension_mismatch,
          "observation does not match beta shape");
  require(x_.allFinite() && y_.allFinite(), Errc::non_finite, "non-finite observation");

  const long next = state_.step_index + 1;
  const double gamma_n = step_size(next, config_);

  r_ = y_;
  r_.noalias() -= beta * x_;
  if (sigma_inv_) {
    wr_.noalias() = (*sigma_inv_) * r_;
  } else {
    wr_ = r_;
  }
  const double quad = r_.dot(wr_);
  const double rnorm = std::sqrt(quad > 0 ? quad : 0.0);

  if (config_.ridge_lambda > 0) {
    const double bnorm = beta.norm();
    if (bnorm > 0) beta *= 1.0 - gamma_n * config_.ridge_lambda / bnorm;
  }
  if (rnorm >= config_.denom_floor) beta.noalias() += (gamma_n / rnorm) * wr_ * x_.transpose();
  require(beta.allFinite(), Errc::non_finite, "online iterate diverged");

  const double omega = averaging_weight(next, config_.w);
  state_.weight_sum += omega;
  if (state_.weight_sum > 0) {
    state_.beta_averaged += (omega / state_.weight_sum) * (beta - state_.beta_averaged);
  } else {
    state_.beta_averaged = beta;
  }
  state_.step_index = next;
}

OnlineState online_step(OnlineState state, const Vector& x, const Vector& y,
                        const Matrix* sigma_inv, const EstimatorConfig& config) {
  OnlineEstimator est(std::move(state), config);
  if (sigma_inv) est.set_sigma_inv(*sigma_inv);
  est.update(x, y);
  return est.release();
}

Fit fit_online(const DataSet& data, const Matrix* sigma_inv, const EstimatorConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  OnlineEstimator est(data.p(), data.q(), config);
  if (sigma_inv) est.set_sigma_inv(*sigma_inv);

  Fit fit;
  Index checkpoint = 1;
  for (Index i = 0; i < data.n(); ++i) {
    est.update(data.x.row(i).transpose(), data.y.row(i).transpose());
    if (i + 1 == checkpoint && checkpoint < data.n()) {
      const DataSet prefix(data.x.topRows(checkpoint), data.y.topRows(checkpoint));
      fit.loss_trace.push_back(
          empirical_loss(prefix, est.state().beta_averaged, sigma_inv, config.ridge_lambda));
      checkpoint *= 2;
    }
  }
  fit.beta_hat = est.state().beta_averaged;
  fit.loss_trace.push_back(empirical_loss(data, fit.beta_hat, sigma_inv, config.ridge_lambda));
  fit.iterations = static_cast<int>(data.n());
  fit.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return fit;
}

}  // namespace robreg
