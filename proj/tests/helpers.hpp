#pragma once

#include <optional>
#include <random>

#include "oracles.hpp"
#include "robreg/core.hpp"

namespace testing_support {

struct Synthetic {
  robreg::DataSet data;
  Eigen::MatrixXd beta;
  Eigen::MatrixXd sigma;
};

/// Y = βX + noise·Lε with L the Cholesky factor of sigma (identity by default).
inline Synthetic gaussian_data(Eigen::Index n, Eigen::Index p, Eigen::Index q, std::uint64_t seed,
                               double noise = 1.0, Eigen::MatrixXd sigma = {}) {
  std::mt19937_64 eng(seed);
  if (sigma.size() == 0) sigma = Eigen::MatrixXd::Identity(q, q);
  Eigen::MatrixXd beta = oracle::random_matrix(q, p, eng);
  Eigen::MatrixXd x = oracle::random_matrix(n, p, eng);
  const Eigen::MatrixXd l = sigma.llt().matrixL();
  Eigen::MatrixXd eps = oracle::random_matrix(n, q, eng) * l.transpose();
  Eigen::MatrixXd y = x * beta.transpose() + noise * eps;
  return {robreg::DataSet(std::move(x), std::move(y)), std::move(beta), std::move(sigma)};
}

/// Error code thrown by f, or nullopt when it returns normally.
template <typename F>
std::optional<robreg::Errc> thrown_code(F&& f) {
  try {
    f();
  } catch (const robreg::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Permutes the rows of X and Y jointly.
inline robreg::DataSet permuted(const robreg::DataSet& d, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d.n()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<Eigen::Index>(i);
  std::mt19937_64 eng(seed);
  std::shuffle(idx.begin(), idx.end(), eng);
  Eigen::MatrixXd x(d.n(), d.p());
  Eigen::MatrixXd y(d.n(), d.q());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = d.x.row(idx[i]);
    y.row(static_cast<Eigen::Index>(i)) = d.y.row(idx[i]);
  }
  return robreg::DataSet(std::move(x), std::move(y));
}

inline double mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace testing_support
