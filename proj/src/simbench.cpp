#include "robreg/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>

#include <json.hpp>

#include "robreg/random.hpp"

namespace robreg {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr std::string_view kMetricNames[] = {"mse_beta", "mse_sigma", "mse_y", "auc", "ari", "elapsed_seconds"};

Matrix random_sigma(Index q, std::mt19937_64& eng) {
  std::normal_distribution<double> nd;
  Vector u(q);
  for (Index j = 0; j < q; ++j) u(j) = nd(eng);
  Matrix s = u * u.transpose();
  s.diagonal().array() += 1.0;
  return s;
}

std::string run_name(const ScenarioSpec& spec) {
  return spec.recalibrate ? "full-wls" : "initialized-wls";
}

}  // namespace

OutlierKind OutlierKind::parse(std::string_view text) {
  const auto colon = text.find(':');
  require(colon != std::string_view::npos, Errc::parse_error,
          "outlier kind must look like student:df, dirac:mu or cube:w");
  const std::string_view kind = text.substr(0, colon);
  const std::string value(text.substr(colon + 1));
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  require(!value.empty() && end == value.c_str() + value.size() && std::isfinite(v), Errc::parse_error,
          "bad outlier parameter in '" + std::string(text) + "'");
  if (kind == "student") {
    require(v > 0, Errc::parse_error, "student df must be > 0");
    return student(v);
  }
  if (kind == "dirac") return dirac(v);
  if (kind == "cube") {
    require(v > 0, Errc::parse_error, "cube half-width must be > 0");
    return uniform_cube(v);
  }
  throw Error(Errc::parse_error, "unknown outlier kind '" + std::string(kind) + "'");
}

std::string OutlierKind::name() const {
  char buf[64];
  const char* k = type == Type::student ? "student" : type == Type::dirac ? "dirac" : "cube";
  std::snprintf(buf, sizeof buf, "%s:%g", k, param);
  return buf;
}

std::string_view task_name(Task task) {
  switch (task) {
    case Task::regression: return "regression";
    case Task::lda: return "lda";
    case Task::streaming: return "streaming";
  }
  return "regression";
}

void ScenarioSpec::validate() const {
  require(n >= 1 && p >= 1 && q >= 1, Errc::invalid_argument, "scenario dimensions must be positive");
  require(outlier_fraction >= 0 && outlier_fraction <= 0.5, Errc::invalid_argument,
          "outlier fraction must lie in [0, 0.5]");
  require(replicates >= 1, Errc::invalid_argument, "replicates must be >= 1");
  require(std::isfinite(noise_scale) && noise_scale >= 0, Errc::invalid_argument, "noise_scale must be >= 0");
  require(std::isfinite(mu_sep), Errc::invalid_argument, "mu_sep must be finite");
  require(std::isfinite(outliers.param), Errc::invalid_argument, "outlier parameter must be finite");
  if (outliers.type != OutlierKind::Type::dirac)
    require(outliers.param > 0, Errc::invalid_argument, "outlier parameter must be > 0");
  if (task == Task::lda) require(p == 3, Errc::invalid_argument, "lda scenarios have p = 3");
  if (task == Task::streaming) require(alpha > 0 && alpha < 1, Errc::invalid_argument, "alpha must lie in (0, 1)");
}

Fixture make_fixture(const ScenarioSpec& spec) {
  spec.validate();
  Fixture fx;
  auto sigma_eng = make_engine(spec.seed, streams::sigma);
  fx.sigma = random_sigma(spec.q, sigma_eng);
  fx.sigma_chol = fx.sigma.llt().matrixL();

  if (spec.task == Task::lda) {
    fx.beta.resize(spec.q, 3);
    fx.beta.col(0).setConstant(-spec.mu_sep);
    fx.beta.col(1).setZero();
    fx.beta.col(2).setConstant(spec.mu_sep);
    fx.x = Matrix::Zero(spec.n, 3);
    fx.labels.resize(static_cast<std::size_t>(spec.n));
    for (Index i = 0; i < spec.n; ++i) {
      const auto k = static_cast<int>(3 * i / spec.n);
      fx.x(i, k) = 1.0;
      fx.labels[static_cast<std::size_t>(i)] = k + 1;
    }
    return fx;
  }

  auto beta_eng = make_engine(spec.seed, streams::beta);
  auto design_eng = make_engine(spec.seed, streams::design);
  std::normal_distribution<double> nd;
  fx.beta.resize(spec.q, spec.p);
  for (Index i = 0; i < spec.q; ++i)
    for (Index j = 0; j < spec.p; ++j) fx.beta(i, j) = nd(beta_eng);
  fx.x.resize(spec.n, spec.p);
  for (Index i = 0; i < spec.n; ++i)
    for (Index j = 0; j < spec.p; ++j) fx.x(i, j) = nd(design_eng);
  return fx;
}

SimData generate_replicate(const ScenarioSpec& spec, const Fixture& fixture, int replicate) {
  spec.validate();
  const Index n = spec.n;
  const Index q = spec.q;
  auto eng = make_engine(spec.seed, streams::replicate_base + static_cast<std::uint64_t>(replicate));
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  std::normal_distribution<double> nd;

  OutlierKind kind = spec.outliers;
  if (spec.task == Task::lda && kind.type != OutlierKind::Type::uniform_cube) kind = OutlierKind::uniform_cube(20.0);
  std::student_t_distribution<double> td(kind.type == OutlierKind::Type::student ? kind.param : 1.0);
  std::uniform_real_distribution<double> cube(-kind.param, kind.param);

  Matrix eps(n, q);
  Vector u(q);
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    const bool outlier = unif01(eng) < spec.outlier_fraction;
    mask[static_cast<std::size_t>(i)] = outlier;
    if (!outlier) {
      for (Index j = 0; j < q; ++j) u(j) = nd(eng);
      eps.row(i) = (fixture.sigma_chol * u).transpose();
      continue;
    }
    switch (kind.type) {
      case OutlierKind::Type::student:
        for (Index j = 0; j < q; ++j) eps(i, j) = td(eng);
        break;
      case OutlierKind::Type::dirac:
        eps.row(i).setConstant(kind.param);
        break;
      case OutlierKind::Type::uniform_cube:
        for (Index j = 0; j < q; ++j) eps(i, j) = cube(eng);
        break;
    }
  }
  if (spec.noise_scale != 1.0) eps *= spec.noise_scale;

  Matrix y = fixture.x * fixture.beta.transpose() + eps;
  SimData sim{DataSet(fixture.x, std::move(y)), ModelParams{fixture.beta, fixture.sigma}, std::move(mask),
              fixture.labels};
  return sim;
}

SimData generate_regression(const ScenarioSpec& spec) {
  return generate_replicate(spec, make_fixture(spec), 0);
}

SimData generate_lda(const ScenarioSpec& spec) {
  require(spec.task == Task::lda, Errc::invalid_argument, "generate_lda needs an lda scenario");
  return generate_replicate(spec, make_fixture(spec), 0);
}

std::optional<double> auc(const Vector& scores, const std::vector<bool>& positive) {
  require(static_cast<std::size_t>(scores.size()) == positive.size(), Errc::dimension_mismatch,
          "auc: scores and labels differ in length");
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores(static_cast<Index>(a)) < scores(static_cast<Index>(b)); });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores(static_cast<Index>(order[j + 1])) == scores(static_cast<Index>(order[i]))) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double n_pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (positive[i]) {
      n_pos += 1.0;
      rank_sum += rank[i];
    }
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  require(a.size() == b.size(), Errc::dimension_mismatch, "ari: labelings differ in length");
  const auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca;
  std::map<int, double> cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
  }
  double index = 0.0;
  for (const auto& [k, v] : joint) index += choose2(v);
  double sa = 0.0;
  double sb = 0.0;
  for (const auto& [k, v] : ca) sa += choose2(v);
  for (const auto& [k, v] : cb) sb += choose2(v);
  const double total = choose2(static_cast<double>(a.size()));
  if (total == 0.0) return 1.0;
  const double expected = sa * sb / total;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

MetricSet metrics(const SimData& sim, const Fit& fit) {
  const DataSet& data = sim.data;
  const Matrix& beta = sim.truth.beta;
  require(fit.beta_hat.rows() == beta.rows() && fit.beta_hat.cols() == beta.cols(), Errc::dimension_mismatch,
          "metrics: beta_hat has the wrong shape");
  require(sim.outlier_mask.size() == static_cast<std::size_t>(data.n()), Errc::dimension_mismatch,
          "metrics: mask length differs from n");
  const auto pq = static_cast<double>(beta.size());
  MetricSet m;
  m.mse_beta = (fit.beta_hat - beta).squaredNorm() / pq;
  m.elapsed_seconds = fit.elapsed_seconds;
  if (fit.sigma_hat && sim.truth.sigma) {
    const auto q2 = static_cast<double>(beta.rows() * beta.rows());
    m.mse_sigma = (*fit.sigma_hat - *sim.truth.sigma).squaredNorm() / q2;
  }

  const Matrix eps = residuals(data, fit.beta_hat).eps;
  double sq = 0.0;
  double clean = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    if (sim.outlier_mask[static_cast<std::size_t>(i)]) continue;
    sq += eps.row(i).squaredNorm();
    clean += 1.0;
  }
  if (clean > 0) m.mse_y = sq / (clean * static_cast<double>(data.q()));

  if (fit.sigma_hat) {
    m.auc = auc(outlier_scores(data, fit).scores, sim.outlier_mask);
    if (!sim.labels.empty()) {
      std::vector<int> truth;
      std::vector<int> pred;
      for (Index i = 0; i < data.n(); ++i) {
        if (sim.outlier_mask[static_cast<std::size_t>(i)]) continue;
        truth.push_back(sim.labels[static_cast<std::size_t>(i)]);
        pred.push_back(lda_classify(fit, data.y.row(i).transpose()));
      }
      if (!truth.empty()) m.ari = adjusted_rand_index(truth, pred);
    }
  }
  return m;
}

std::optional<double> metric_value(const MetricSet& m, std::string_view metric) {
  if (metric == "mse_beta") return m.mse_beta;
  if (metric == "mse_sigma") return m.mse_sigma;
  if (metric == "mse_y") return m.mse_y;
  if (metric == "auc") return m.auc;
  if (metric == "ari") return m.ari;
  if (metric == "elapsed_seconds") return m.elapsed_seconds;
  throw Error(Errc::invalid_argument, "unknown metric '" + std::string(metric) + "'");
}

double median(std::vector<double> values) {
  require(!values.empty(), Errc::invalid_argument, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<double> ResultTable::values(std::string_view method, double fraction, std::string_view metric) const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.method != method || r.fraction != fraction || r.error) continue;
    if (const auto v = metric_value(r.metrics, metric)) out.push_back(*v);
  }
  return out;
}

void ResultTable::write_csv(std::ostream& out, bool include_timing) const {
  out << "task,n,p,q,fraction,outliers,seed,method,replicate,metric,value\n";
  const std::string prefix = std::string(task_name(spec.task)) + "," + std::to_string(spec.n) + "," +
                             std::to_string(spec.p) + "," + std::to_string(spec.q) + ",";
  for (const auto& r : rows) {
    const std::string head = prefix + fmt(r.fraction) + "," + spec.outliers.name() + "," +
                             std::to_string(spec.seed) + "," + r.method + "," + std::to_string(r.replicate) + ",";
    if (r.error) {
      out << head << "failed,1\n";
      continue;
    }
    for (const auto name : kMetricNames) {
      if (name == "elapsed_seconds" && !include_timing) continue;
      if (const auto v = metric_value(r.metrics, name)) out << head << name << "," << fmt(*v) << "\n";
    }
  }
}

std::string ResultTable::to_json(bool include_timing) const {
  nlohmann::json j;
  j["scenario"] = {
      {"task", task_name(spec.task)}, {"n", spec.n}, {"p", spec.p}, {"q", spec.q},
      {"outliers", spec.outliers.name()}, {"replicates", spec.replicates},
      {"seed", spec.seed}, {"mu_sep", spec.mu_sep}, {"noise_scale", spec.noise_scale},
  };
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row = {{"fraction", r.fraction}, {"method", r.method}, {"replicate", r.replicate}};
    if (r.error) {
      row["error"] = *r.error;
    } else {
      nlohmann::json m = nlohmann::json::object();
      for (const auto name : kMetricNames) {
        if (name == "elapsed_seconds" && !include_timing) continue;
        if (const auto v = metric_value(r.metrics, name)) m[std::string(name)] = *v;
      }
      row["metrics"] = std::move(m);
    }
    arr.push_back(std::move(row));
  }
  j["rows"] = std::move(arr);
  return j.dump(2);
}

void ResultTable::write_summary(std::ostream& out) const {
  std::vector<std::pair<std::string, double>> keys;
  for (const auto& r : rows) {
    const std::pair<std::string, double> k{r.method, r.fraction};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %8s %12s %12s %12s %8s %8s %6s\n", "method", "fraction", "mse_beta",
                "mse_sigma", "mse_y", "auc", "ari", "failed");
  out << line;
  for (const auto& [method, fraction] : keys) {
    int failed = 0;
    for (const auto& r : rows)
      if (r.method == method && r.fraction == fraction && r.error) ++failed;
    std::string cells[5];
    const std::string_view names[5] = {"mse_beta", "mse_sigma", "mse_y", "auc", "ari"};
    for (int k = 0; k < 5; ++k) {
      const auto vals = values(method, fraction, names[k]);
      char buf[32];
      if (vals.empty()) std::snprintf(buf, sizeof buf, "-");
      else std::snprintf(buf, sizeof buf, k < 3 ? "%.4g" : "%.4f", median(vals));
      cells[k] = buf;
    }
    std::snprintf(line, sizeof line, "%-24s %8.3f %12s %12s %12s %8s %8s %6d\n", method.c_str(), fraction,
                  cells[0].c_str(), cells[1].c_str(), cells[2].c_str(), cells[3].c_str(), cells[4].c_str(), failed);
    out << line;
  }
}

ResultTable run_experiment(const ScenarioSpec& spec, const std::vector<MethodSpec>& methods,
                           const EstimatorConfig& config, const McmOptions& mcm) {
  spec.validate();
  config.validate();
  const bool streaming = spec.task == Task::streaming;
  require(streaming || !methods.empty(), Errc::invalid_argument, "run_experiment needs at least one method");
  const Fixture fixture = make_fixture(spec);
  const std::size_t per_rep = streaming ? 1 : methods.size();
  std::vector<ResultRow> rows(static_cast<std::size_t>(spec.replicates) * per_rep);

  parallel_for(spec.replicates, [&](Index b) {
    const SimData sim = generate_replicate(spec, fixture, static_cast<int>(b));
    const std::uint64_t fit_seed = spec.seed + static_cast<std::uint64_t>(b);
    for (std::size_t k = 0; k < per_rep; ++k) {
      ResultRow& row = rows[static_cast<std::size_t>(b) * per_rep + k];
      row.fraction = spec.outlier_fraction;
      row.replicate = static_cast<int>(b);
      row.method = streaming ? run_name(spec) : methods[k].name();
      try {
        Fit fit;
        if (streaming) {
          StreamingOptions so;
          so.alpha = spec.alpha;
          so.recalibrate = spec.recalibrate;
          so.mcm = mcm;
          fit = fit_streaming(sim.data, so, config, fit_seed);
        } else {
          fit = fit_method(sim.data, methods[k], config, fit_seed, mcm);
        }
        row.metrics = metrics(sim, fit);
      } catch (const Error& e) {
        row.error = e.what();
      }
    }
  });

  ResultTable table;
  table.spec = spec;
  table.rows = std::move(rows);
  return table;
}

ResultTable run_sweep(const ScenarioSpec& spec, const std::vector<double>& fractions,
                      const std::vector<MethodSpec>& methods, const EstimatorConfig& config,
                      const McmOptions& mcm) {
  require(!fractions.empty(), Errc::invalid_argument, "run_sweep needs at least one fraction");
  ResultTable table;
  table.spec = spec;
  table.spec.outlier_fraction = fractions.front();
  for (const double f : fractions) {
    ScenarioSpec s = spec;
    s.outlier_fraction = f;
    ResultTable part = run_experiment(s, methods, config, mcm);
    for (auto& r : part.rows) table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace robreg
