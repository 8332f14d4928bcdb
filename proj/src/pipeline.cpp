#include "robreg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>

#include "robreg/offline.hpp"
#include "robreg/online.hpp"
#include "robreg/random.hpp"

namespace robreg {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_lambda(double lambda) {
  require(std::isfinite(lambda) && lambda >= 0, Errc::invalid_argument, "lambda must be finite and >= 0");
}

Matrix gram(const DataSet& data) {
  Matrix g = Matrix::Zero(data.p(), data.p());
  g.selfadjointView<Eigen::Lower>().rankUpdate(data.x.transpose());
  return g.selfadjointView<Eigen::Lower>();
}

Fit from_report(FixpointReport rep) {
  Fit f;
  f.beta_hat = std::move(rep.beta_hat);
  f.loss_trace = std::move(rep.loss_trace);
  f.iterations = rep.iterations;
  f.converged = rep.converged;
  return f;
}

Matrix spd_inverse(const Matrix& s) {
  Eigen::LLT<Matrix> llt(symmetrized(s));
  require(llt.info() == Eigen::Success, Errc::invalid_argument, "covariance is not positive definite");
  return symmetrized(llt.solve(Matrix::Identity(s.rows(), s.cols())));
}

/// Robust or naive fit with a fixed metric and penalty.
Fit solve_fixed(const DataSet& data, Solver solver, const Matrix* sigma_inv, double lambda,
                const EstimatorConfig& config) {
  switch (solver) {
    case Solver::naive:
      return sigma_inv ? naive_wls(data, *sigma_inv, lambda) : naive_ols(data, lambda);
    case Solver::online: {
      EstimatorConfig c = config;
      c.ridge_lambda = lambda;
      return fit_online(data, sigma_inv, c);
    }
    case Solver::offline:
      break;
  }
  if (lambda > 0) {
    const Matrix eye = Matrix::Identity(data.q(), data.q());
    return from_report(fixpoint_ridge(data, sigma_inv ? *sigma_inv : eye, lambda, config));
  }
  if (sigma_inv) return from_report(fixpoint_wls(data, *sigma_inv, config));
  return from_report(fixpoint_ols(data, config));
}

/// Step (1) and (2): Euclidean fit and the Σ̂ derived from it.
struct FirstPass {
  Fit fit;
  Matrix sigma;
  Matrix sigma_inv;
};

FirstPass first_pass(const DataSet& data, const PipelineOptions& options, double lambda1,
                     const EstimatorConfig& config, std::uint64_t seed) {
  FirstPass fp;
  fp.fit = solve_fixed(data, options.solver, nullptr, lambda1, config);
  if (options.known_sigma) {
    fp.sigma = *options.known_sigma;
    fp.sigma_inv = spd_inverse(fp.sigma);
  } else if (options.solver == Solver::naive) {
    fp.sigma = *fp.fit.sigma_hat;
    fp.sigma_inv = spd_inverse(fp.sigma);
  } else {
    const CovarianceEstimate est = estimate_sigma(residuals(data, fp.fit.beta_hat), options.mcm, config, seed);
    fp.sigma = est.sigma_hat;
    fp.sigma_inv = est.sigma_inv_hat;
  }
  return fp;
}

double held_out_loss(const DataSet& test, const Matrix& beta, Solver solver, const Matrix* sigma_inv) {
  const Vector norms = row_norms(residuals(test, beta).eps, sigma_inv);
  if (solver == Solver::naive) return norms.squaredNorm() / static_cast<double>(test.n());
  double sum = 0.0;
  for (Index i = 0; i < norms.size(); ++i) sum += norms(i);
  return sum / static_cast<double>(test.n());
}

}  // namespace

void PipelineOptions::validate() const {
  mcm.validate();
  require(cv_folds >= 2, Errc::invalid_argument, "cv_folds must be >= 2");
  if (ridge.mode == Ridge::Mode::fixed) check_lambda(ridge.value);
  if (lambda_grid) {
    for (std::size_t i = 0; i < lambda_grid->size(); ++i) {
      require((*lambda_grid)[i] > 0 && std::isfinite((*lambda_grid)[i]), Errc::invalid_argument,
              "lambda_grid entries must be positive");
      require(i == 0 || (*lambda_grid)[i] > (*lambda_grid)[i - 1], Errc::invalid_argument,
              "lambda_grid must be strictly increasing");
    }
  }
  if (known_sigma) {
    require(known_sigma->rows() == known_sigma->cols(), Errc::dimension_mismatch, "known_sigma must be square");
    ModelParams{Matrix::Zero(known_sigma->rows(), 1), *known_sigma}.validate();
  }
}

void StreamingOptions::validate() const {
  mcm.validate();
  require(alpha > 0 && alpha < 1, Errc::invalid_argument, "alpha must lie in (0, 1)");
  require(recalibration_period >= 0, Errc::invalid_argument, "recalibration_period must be >= 0");
}

Matrix empirical_covariance(const Matrix& eps) {
  require(eps.rows() >= 1, Errc::invalid_argument, "empirical_covariance needs at least one row");
  const Matrix centred = eps.rowwise() - eps.colwise().mean();
  return symmetrized(centred.transpose() * centred / static_cast<double>(eps.rows()));
}

Fit naive_ols(const DataSet& data, double lambda) {
  check_lambda(lambda);
  const auto t0 = Clock::now();
  Matrix g = gram(data);
  g.diagonal().array() += static_cast<double>(data.n()) * lambda;
  Eigen::LDLT<Matrix> ldlt(g);
  const double scale = std::max(g.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  require(ldlt.info() == Eigen::Success && ldlt.isPositive() &&
              ldlt.vectorD().minCoeff() > 1e-12 * scale,
          Errc::degenerate_design, "naive_ols: Gram matrix is singular");
  Fit f;
  // β̂ᵀ = (XᵀX + nλI)⁻¹XᵀY
  f.beta_hat = ldlt.solve(data.x.transpose() * data.y).transpose();
  f.sigma_hat = empirical_covariance(residuals(data, f.beta_hat).eps);
  f.loss_trace.push_back(empirical_loss(data, f.beta_hat));
  f.iterations = 1;
  f.elapsed_seconds = seconds_since(t0);
  return f;
}

Fit naive_wls(const DataSet& data, const Matrix& sigma_inv, double lambda) {
  check_lambda(lambda);
  check_beta(data, Matrix::Zero(data.q(), data.p()), &sigma_inv);
  const auto t0 = Clock::now();
  const Index p = data.p();
  const Index q = data.q();
  Matrix lhs = kron(sigma_inv, gram(data));
  lhs.diagonal().array() += static_cast<double>(data.n()) * lambda;
  const Vector rhs = vec_rowmajor(sigma_inv * data.y.transpose() * data.x);
  Eigen::LDLT<Matrix> ldlt(symmetrized(lhs));
  const double scale = std::max(lhs.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  require(ldlt.info() == Eigen::Success && ldlt.isPositive() &&
              ldlt.vectorD().minCoeff() > 1e-12 * scale,
          Errc::degenerate_design, "naive_wls: normal equations are singular");
  Fit f;
  f.beta_hat = unvec_rowmajor(ldlt.solve(rhs), q, p);
  f.sigma_hat = empirical_covariance(residuals(data, f.beta_hat).eps);
  f.loss_trace.push_back(empirical_loss(data, f.beta_hat, &sigma_inv));
  f.iterations = 1;
  f.elapsed_seconds = seconds_since(t0);
  return f;
}

Fit fit_pipeline(const DataSet& data, const PipelineOptions& options, const EstimatorConfig& config,
                 std::uint64_t seed) {
  options.validate();
  config.validate();
  require(data.n() >= std::max(data.p(), data.q()) + 1, Errc::invalid_argument,
          "fit_pipeline needs n >= max(p, q) + 1");
  if (options.known_sigma)
    require(options.known_sigma->rows() == data.q(), Errc::dimension_mismatch, "known_sigma must be q×q");
  const auto t0 = Clock::now();

  double lambda = 0.0;
  if (options.ridge.mode == Ridge::Mode::fixed) lambda = options.ridge.value;
  if (options.ridge.mode == Ridge::Mode::automatic)
    lambda = cross_validate_lambda(data, options, config, seed).lambda;

  // the ridge penalty goes on whichever fit is returned
  const double lambda1 = options.use_mahalanobis ? 0.0 : lambda;
  FirstPass fp = first_pass(data, options, lambda1, config, seed);

  Fit out;
  if (options.use_mahalanobis) {
    out = solve_fixed(data, options.solver, &fp.sigma_inv, lambda, config);
    out.iterations += fp.fit.iterations;
    out.converged = out.converged && fp.fit.converged;
  } else {
    out = std::move(fp.fit);
  }
  out.sigma_hat = fp.sigma;
  out.elapsed_seconds = seconds_since(t0);
  return out;
}

Fit fit_streaming(const DataSet& stream, const StreamingOptions& options, const EstimatorConfig& config,
                  std::uint64_t seed) {
  options.validate();
  config.validate();
  const Index n = stream.n();
  const Index q = stream.q();
  const auto warm = static_cast<Index>(std::ceil(options.alpha * static_cast<double>(n)));
  require(warm >= q + 1 && warm < n, Errc::insufficient_warmup,
          "streaming warm-up needs q + 1 <= ceil(alpha n) < n");
  const Index period = options.recalibration_period > 0 ? options.recalibration_period : warm;
  require(!options.recalibrate || period >= q + 1, Errc::insufficient_warmup,
          "recalibration_period must be >= q + 1");
  const auto t0 = Clock::now();

  OnlineEstimator est(stream.p(), q, config);
  for (Index i = 0; i < warm; ++i) est.update(stream.x.row(i).transpose(), stream.y.row(i).transpose());

  Residuals warm_res;
  warm_res.eps = stream.y.topRows(warm);
  warm_res.eps.noalias() -= stream.x.topRows(warm) * est.state().beta_averaged.transpose();
  CovarianceEstimate cov = estimate_sigma(warm_res, options.mcm, config, seed);
  est.set_sigma_inv(cov.sigma_inv_hat);
  Matrix sigma_hat = cov.sigma_hat;

  std::deque<Vector> buffer;
  Vector r(q);
  for (Index i = warm; i < n; ++i) {
    if (options.recalibrate) {
      r = stream.y.row(i).transpose() - est.state().beta_averaged * stream.x.row(i).transpose();
      buffer.push_back(r);
      if (static_cast<Index>(buffer.size()) > period) buffer.pop_front();
    }
    est.update(stream.x.row(i).transpose(), stream.y.row(i).transpose());
    if (options.recalibrate && (i - warm + 1) % period == 0) {
      Residuals res;
      res.eps.resize(static_cast<Index>(buffer.size()), q);
      for (std::size_t k = 0; k < buffer.size(); ++k) res.eps.row(static_cast<Index>(k)) = buffer[k].transpose();
      cov = estimate_sigma(res, options.mcm, config, seed);
      est.set_sigma_inv(cov.sigma_inv_hat);
      sigma_hat = cov.sigma_hat;
    }
  }

  Fit f;
  f.beta_hat = est.state().beta_averaged;
  f.sigma_hat = sigma_hat;
  f.iterations = static_cast<int>(n);
  f.loss_trace.push_back(empirical_loss(stream, f.beta_hat, &cov.sigma_inv_hat));
  f.converged = cov.calibration_converged;
  f.elapsed_seconds = seconds_since(t0);
  return f;
}

std::vector<double> default_lambda_grid(const DataSet& data) {
  std::vector<double> abs_y(static_cast<std::size_t>(data.y.size()));
  for (Index i = 0; i < data.y.size(); ++i) abs_y[static_cast<std::size_t>(i)] = std::abs(data.y.data()[i]);
  const auto mid = abs_y.begin() + static_cast<std::ptrdiff_t>(abs_y.size() / 2);
  std::nth_element(abs_y.begin(), mid, abs_y.end());
  const double scale = *mid > 0 ? *mid : 1.0;
  std::vector<double> grid(20);
  for (int k = 0; k < 20; ++k) grid[static_cast<std::size_t>(k)] = scale * std::pow(10.0, -4.0 + 5.0 * k / 19.0);
  return grid;
}

CvResult cross_validate_lambda(const DataSet& data, const PipelineOptions& options,
                               const EstimatorConfig& config, std::uint64_t seed) {
  options.validate();
  config.validate();
  CvResult out;
  out.grid = options.lambda_grid ? *options.lambda_grid : default_lambda_grid(data);
  require(!out.grid.empty(), Errc::empty_grid, "lambda grid is empty");
  const Index n = data.n();
  const int k_folds = options.cv_folds;
  require(n >= k_folds, Errc::invalid_argument, "cross-validation needs n >= cv_folds");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto eng = make_engine(seed, streams::cv_shuffle);
  std::shuffle(order.begin(), order.end(), eng);

  const std::size_t grid_size = out.grid.size();
  Matrix losses(k_folds, static_cast<Index>(grid_size));
  parallel_for(k_folds, [&](Index k) {
    const Index lo = k * n / k_folds;
    const Index hi = (k + 1) * n / k_folds;
    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
    for (Index i = 0; i < n; ++i)
      (i >= lo && i < hi ? test_rows : train_rows).push_back(order[static_cast<std::size_t>(i)]);
    const DataSet train = data.subset(train_rows);
    const DataSet test = data.subset(test_rows);

    const Matrix* metric = nullptr;
    FirstPass fp;
    if (options.use_mahalanobis) {
      fp = first_pass(train, options, 0.0, config, seed);
      metric = &fp.sigma_inv;
    }
    for (std::size_t g = 0; g < grid_size; ++g) {
      const Fit f = solve_fixed(train, options.solver, metric, out.grid[g], config);
      losses(k, static_cast<Index>(g)) = held_out_loss(test, f.beta_hat, options.solver, metric);
    }
  });

  out.cv_loss.resize(grid_size);
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid_size; ++g) {
    double s = 0.0;
    for (int k = 0; k < k_folds; ++k) s += losses(k, static_cast<Index>(g));
    out.cv_loss[g] = s / k_folds;
    if (out.cv_loss[g] < out.cv_loss[best]) best = g;
  }
  out.lambda = out.grid[best];
  return out;
}

OutlierScores outlier_scores(const DataSet& data, const Fit& fit) {
  require(fit.sigma_hat.has_value(), Errc::missing_sigma, "outlier_scores needs sigma_hat");
  const Matrix sigma_inv = spd_inverse(*fit.sigma_hat);
  check_beta(data, fit.beta_hat, &sigma_inv);
  OutlierScores s;
  s.scores = row_norms(residuals(data, fit.beta_hat).eps, &sigma_inv).cwiseAbs2();
  return s;
}

int lda_classify(const Fit& fit, const Vector& y_new) {
  require(fit.sigma_hat.has_value(), Errc::missing_sigma, "lda_classify needs sigma_hat");
  require(y_new.size() == fit.beta_hat.rows(), Errc::dimension_mismatch, "y_new must have length q");
  const Matrix sigma_inv = spd_inverse(*fit.sigma_hat);
  int best = 0;
  double best_dist = 0.0;
  for (Index k = 0; k < fit.beta_hat.cols(); ++k) {
    const double d = mahalanobis_norm(y_new - fit.beta_hat.col(k), sigma_inv);
    if (k == 0 || d < best_dist) {
      best = static_cast<int>(k);
      best_dist = d;
    }
  }
  return best + 1;
}

// ---------------------------------------------------------------------------

namespace {

struct KindName {
  MethodKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {MethodKind::naive_ols, "naive-ols"},     {MethodKind::offline_ols, "offline-ols"},
    {MethodKind::online_ols, "online-ols"},   {MethodKind::naive_wls, "naive-wls"},
    {MethodKind::offline_wls, "offline-wls"}, {MethodKind::online_wls, "online-wls"},
};

}  // namespace

std::string MethodSpec::name() const {
  std::string out;
  for (const auto& kn : kKindNames)
    if (kn.kind == kind) out = kn.name;
  switch (ridge.mode) {
    case Ridge::Mode::none:
      break;
    case Ridge::Mode::automatic:
      out += "+ridge";
      break;
    case Ridge::Mode::fixed: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "+ridge=%g", ridge.value);
      out += buf;
      break;
    }
  }
  return out;
}

MethodSpec MethodSpec::parse(std::string_view text) {
  MethodSpec m;
  const auto plus = text.find('+');
  const std::string_view base = text.substr(0, plus);
  bool found = false;
  for (const auto& kn : kKindNames) {
    if (kn.name == base) {
      m.kind = kn.kind;
      found = true;
    }
  }
  require(found, Errc::parse_error, "unknown method '" + std::string(text) + "'");
  if (plus == std::string_view::npos) return m;
  const std::string_view suffix = text.substr(plus + 1);
  if (suffix == "ridge") {
    m.ridge = Ridge::automatic();
    return m;
  }
  require(suffix.rfind("ridge=", 0) == 0, Errc::parse_error, "bad method suffix in '" + std::string(text) + "'");
  const std::string value(suffix.substr(6));
  char* end = nullptr;
  const double lambda = std::strtod(value.c_str(), &end);
  require(!value.empty() && end == value.c_str() + value.size() && std::isfinite(lambda) && lambda >= 0,
          Errc::parse_error, "bad ridge value in '" + std::string(text) + "'");
  m.ridge = Ridge::fixed(lambda);
  return m;
}

PipelineOptions pipeline_options_for(const MethodSpec& method, const McmOptions& mcm) {
  PipelineOptions o;
  o.mcm = mcm;
  o.ridge = method.ridge;
  switch (method.kind) {
    case MethodKind::naive_ols: o.solver = Solver::naive; o.use_mahalanobis = false; break;
    case MethodKind::offline_ols: o.solver = Solver::offline; o.use_mahalanobis = false; break;
    case MethodKind::online_ols: o.solver = Solver::online; o.use_mahalanobis = false; break;
    case MethodKind::naive_wls: o.solver = Solver::naive; o.use_mahalanobis = true; break;
    case MethodKind::offline_wls: o.solver = Solver::offline; o.use_mahalanobis = true; break;
    case MethodKind::online_wls: o.solver = Solver::online; o.use_mahalanobis = true; break;
  }
  return o;
}

Fit fit_method(const DataSet& data, const MethodSpec& method, const EstimatorConfig& config,
               std::uint64_t seed, const McmOptions& mcm) {
  return fit_pipeline(data, pipeline_options_for(method, mcm), config, seed);
}

}  // namespace robreg
