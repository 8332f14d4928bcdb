#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robreg/core.hpp"
#include "robreg/covariance.hpp"

namespace robreg {

enum class Solver { naive, offline, online };

/// Ridge setting: none, a fixed λ, or λ chosen by K-fold cross-validation.
struct Ridge {
  enum class Mode { none, fixed, automatic };
  Mode mode = Mode::none;
  double value = 0.0;

  static Ridge off() { return {}; }
  static Ridge fixed(double lambda) { return {Mode::fixed, lambda}; }
  static Ridge automatic() { return {Mode::automatic, 0.0}; }
};

struct PipelineOptions {
  Solver solver = Solver::offline;
  bool use_mahalanobis = true;
  Ridge ridge;
  McmOptions mcm;
  int cv_folds = 10;
  std::optional<std::vector<double>> lambda_grid;  // nullopt: default_lambda_grid
  std::optional<Matrix> known_sigma;               // skips Σ estimation when set

  void validate() const;
};

struct StreamingOptions {
  double alpha = 0.1;
  bool recalibrate = false;         // false: "Initialized WLS", true: "Full WLS"
  long recalibration_period = 0;    // 0: ⌈αn⌉
  McmOptions mcm;

  void validate() const;
};

struct OutlierScores {
  Vector scores;  // ‖Yᵢ − β̂Xᵢ‖²_{Σ̂⁻¹}
};

struct CvResult {
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> cv_loss;
};

/// β̂ = (Σ YᵢXᵢᵀ)(Σ XᵢXᵢᵀ + nλI)⁻¹; sigma_hat is the empirical residual covariance.
Fit naive_ols(const DataSet& data, double lambda);

/// Minimiser of Σ‖Yᵢ − βXᵢ‖²_{Σ⁻¹} + nλ‖β‖²_F, solved through the pq×pq
/// normal equations (Σ⁻¹ ⊗ XᵀX + nλI)·vec(β) = vec(Σ⁻¹YᵀX).
Fit naive_wls(const DataSet& data, const Matrix& sigma_inv, double lambda);

/// Empirical covariance (divisor n) of centred residual rows.
Matrix empirical_covariance(const Matrix& eps);

/// Two-pass procedure: robust Euclidean fit, Σ̂ from the MCM of its
/// residuals, then (optionally) a Mahalanobis re-fit with Σ̂⁻¹.
/// The ridge penalty comes from options.ridge; config.ridge_lambda is ignored.
Fit fit_pipeline(const DataSet& data, const PipelineOptions& options,
                 const EstimatorConfig& config, std::uint64_t seed);

/// Streaming WLS: online OLS on the first ⌈αn⌉ rows, Σ̂ from their residuals,
/// then online WLS on the rest (optionally re-estimating Σ̂ periodically
/// from a rolling residual buffer).
Fit fit_streaming(const DataSet& stream, const StreamingOptions& options,
                  const EstimatorConfig& config, std::uint64_t seed);

std::vector<double> default_lambda_grid(const DataSet& data);

CvResult cross_validate_lambda(const DataSet& data, const PipelineOptions& options,
                               const EstimatorConfig& config, std::uint64_t seed);

OutlierScores outlier_scores(const DataSet& data, const Fit& fit);

/// Nearest class centre (columns of β̂) in the Σ̂⁻¹ metric; 1-based.
int lda_classify(const Fit& fit, const Vector& y_new);

// ---------------------------------------------------------------------------
// Named estimation procedures used by the simulation harness and the CLI.

enum class MethodKind { naive_ols, offline_ols, online_ols, naive_wls, offline_wls, online_wls };

struct MethodSpec {
  MethodKind kind = MethodKind::offline_ols;
  Ridge ridge;

  std::string name() const;
  /// "offline-wls", "naive-ols+ridge", "online-ols+ridge=0.1", …
  static MethodSpec parse(std::string_view text);
};

PipelineOptions pipeline_options_for(const MethodSpec& method, const McmOptions& mcm = {});

Fit fit_method(const DataSet& data, const MethodSpec& method, const EstimatorConfig& config,
               std::uint64_t seed, const McmOptions& mcm = {});

}  // namespace robreg
