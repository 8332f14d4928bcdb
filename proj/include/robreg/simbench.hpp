#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "robreg/core.hpp"
#include "robreg/pipeline.hpp"

namespace robreg {

enum class Task { regression, lda, streaming };

struct OutlierKind {
  enum class Type { student, dirac, uniform_cube };
  Type type = Type::student;
  double param = 1.0;  // df, mu or half-width

  static OutlierKind student(double df) { return {Type::student, df}; }
  static OutlierKind dirac(double mu) { return {Type::dirac, mu}; }
  static OutlierKind uniform_cube(double half_width) { return {Type::uniform_cube, half_width}; }

  /// "student:1", "dirac:3", "cube:20"
  static OutlierKind parse(std::string_view text);
  std::string name() const;
};

struct ScenarioSpec {
  Task task = Task::regression;
  Index n = 1000;
  Index p = 5;
  Index q = 20;
  double outlier_fraction = 0.0;
  OutlierKind outliers;
  int replicates = 20;
  std::uint64_t seed = 0;
  double mu_sep = 2.0;       // LDA class separation
  double noise_scale = 1.0;  // multiplies every noise draw; 0 gives noiseless data
  double alpha = 0.1;        // streaming warm-up fraction
  bool recalibrate = false;  // streaming: Full WLS instead of Initialized WLS

  void validate() const;
};

std::string_view task_name(Task task);

/// One simulated data set with its ground truth.
struct SimData {
  DataSet data;
  ModelParams truth;
  std::vector<bool> outlier_mask;
  std::vector<int> labels;  // LDA only, 1-based
};

/// Quantities held fixed across replicates: β, Σ and X.
struct Fixture {
  Matrix beta;
  Matrix sigma;
  Matrix sigma_chol;
  Matrix x;
  std::vector<int> labels;
};

Fixture make_fixture(const ScenarioSpec& spec);

/// Fresh noise (and outlier mask) for replicate `replicate` on top of `fixture`.
SimData generate_replicate(const ScenarioSpec& spec, const Fixture& fixture, int replicate);

SimData generate_regression(const ScenarioSpec& spec);
SimData generate_lda(const ScenarioSpec& spec);

struct MetricSet {
  std::optional<double> mse_beta;
  std::optional<double> mse_sigma;
  std::optional<double> mse_y;
  std::optional<double> auc;
  std::optional<double> ari;
  std::optional<double> elapsed_seconds;
};

/// Mann–Whitney AUC of `scores` against `positive`, ties counted ½;
/// absent when one class is empty.
std::optional<double> auc(const Vector& scores, const std::vector<bool>& positive);

/// Pair-counting adjusted Rand index; 1 when both partitions are trivial and equal.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

MetricSet metrics(const SimData& sim, const Fit& fit);

struct ResultRow {
  double fraction = 0.0;
  std::string method;
  int replicate = 0;
  MetricSet metrics;
  std::optional<std::string> error;
};

struct ResultTable {
  ScenarioSpec spec;  // fraction of the first sweep entry
  std::vector<ResultRow> rows;

  /// Long format: task,n,p,q,fraction,outliers,seed,method,replicate,metric,value.
  void write_csv(std::ostream& out, bool include_timing) const;
  std::string to_json(bool include_timing) const;
  /// Median of each metric per (method, fraction).
  void write_summary(std::ostream& out) const;

  /// Values of `metric` for (method, fraction), failed runs skipped.
  std::vector<double> values(std::string_view method, double fraction, std::string_view metric) const;
};

std::optional<double> metric_value(const MetricSet& m, std::string_view metric);

/// For every replicate: regenerate the noise, run every method and record
/// its metrics. Streaming scenarios ignore `methods` and run fit_streaming.
ResultTable run_experiment(const ScenarioSpec& spec, const std::vector<MethodSpec>& methods,
                           const EstimatorConfig& config, const McmOptions& mcm = {});

/// run_experiment for each fraction in turn, rows concatenated.
ResultTable run_sweep(const ScenarioSpec& spec, const std::vector<double>& fractions,
                      const std::vector<MethodSpec>& methods, const EstimatorConfig& config,
                      const McmOptions& mcm = {});

double median(std::vector<double> values);

}  // namespace robreg
