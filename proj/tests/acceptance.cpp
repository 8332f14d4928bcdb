// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "robreg/asymptotics.hpp"
#include "robreg/covariance.hpp"
#include "robreg/offline.hpp"
#include "robreg/online.hpp"
#include "robreg/pipeline.hpp"
#include "robreg/simbench.hpp"

using namespace robreg;
using testing_support::gaussian_data;
using testing_support::mse;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.str().empty()) detail << "; ";
    detail << what << (ok ? "" : " [x]");
  }
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<void(Outcome&)> body;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Matrix spiked(Index q, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  const Matrix u = oracle::random_matrix(q, 1, eng);
  return u * u.transpose() + Matrix::Identity(q, q);
}

Vector vec_rows(const Matrix& m) {
  Vector v(m.size());
  for (Index k = 0; k < m.rows(); ++k)
    for (Index j = 0; j < m.cols(); ++j) v(k * m.cols() + j) = m(k, j);
  return v;
}

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t t = 1; t < trace.size(); ++t)
    if (trace[t] > trace[t - 1] + 1e-12) return false;
  return true;
}

double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log(x[k]) / x.size();
    my += std::log(y[k]) / x.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (std::log(x[k]) - mx) * (std::log(y[k]) - my);
    sxx += (std::log(x[k]) - mx) * (std::log(x[k]) - mx);
  }
  return sxy / sxx;
}

double mc_chi_inverse(int q, long draws, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd;
  double s = 0.0;
  for (long i = 0; i < draws; ++i) {
    double r2 = 0.0;
    for (int j = 0; j < q; ++j) {
      const double u = nd(eng);
      r2 += u * u;
    }
    s += 1.0 / std::sqrt(r2);
  }
  return s / static_cast<double>(draws);
}

ScenarioSpec paper_design(Index n, int replicates, OutlierKind kind) {
  ScenarioSpec s;
  s.n = n;
  s.p = 5;
  s.q = 20;
  s.replicates = replicates;
  s.outliers = kind;
  s.seed = 2024;
  return s;
}

std::vector<MethodSpec> parse_methods(std::initializer_list<const char*> names) {
  std::vector<MethodSpec> out;
  for (const char* n : names) out.push_back(MethodSpec::parse(n));
  return out;
}

// ---------------------------------------------------------------------------

void noiseless_recovery(Outcome& o) {
  const auto small = gaussian_data(200, 3, 5, 11, 0.0);
  const FixpointReport off = fixpoint_ols(small.data, EstimatorConfig{});
  const double err = (off.beta_hat - small.beta).norm();
  o.check(err <= 1e-8, "offline ‖Δ‖_F " + fmt(err));

  const auto big = gaussian_data(10000, 3, 5, 13, 0.0);
  const Fit on = fit_online(big.data, nullptr, EstimatorConfig{});
  const double m = mse(on.beta_hat, big.beta);
  o.check(m <= 1e-2, "online MSE " + fmt(m));
}

void naive_equivalence(Outcome& o) {
  std::mt19937_64 eng(21);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const auto d = gaussian_data(100 + 10 * rep, 3, 4, 100 + static_cast<std::uint64_t>(rep), 1.0, spiked(4, 200 + rep));
    const Matrix sinv = oracle::random_spd(4, eng).inverse();
    const Matrix a = naive_ols(d.data, 0.0).beta_hat;
    const Matrix b = naive_wls(d.data, sinv, 0.0).beta_hat;
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  o.check(worst <= 1e-10, "max |OLS − WLS| " + fmt(worst));
}

void descent_traces(Outcome& o) {
  std::mt19937_64 eng(31);
  std::uniform_int_distribution<int> nn(20, 200), pp(1, 4), qq(2, 6);
  std::uniform_real_distribution<double> lam(0.01, 1.0);
  std::student_t_distribution<double> cauchy(1.0);
  int bad_ols = 0, bad_wls = 0, bad_ridge = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const Index n = nn(eng), p = pp(eng), q = qq(eng);
    Matrix x = oracle::random_matrix(n, p, eng);
    const Matrix beta = oracle::random_matrix(q, p, eng);
    Matrix y = x * beta.transpose();
    const bool heavy = inst % 2 == 1;
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < q; ++k) {
        std::normal_distribution<double> nd;
        y(i, k) += heavy ? cauchy(eng) : nd(eng);
      }
    const DataSet d(std::move(x), std::move(y));
    const Matrix sinv = oracle::random_spd(q, eng).inverse();
    EstimatorConfig c;
    c.max_iter = 100;
    c.tol = 1e-300;
    // a far start makes the first steps do real work
    const Matrix far = 25.0 * Matrix::Ones(q, p);
    bad_ols += !non_increasing(fixpoint_ols(d, c, far).loss_trace);
    bad_wls += !non_increasing(fixpoint_wls(d, sinv, c, far).loss_trace);
    bad_ridge += !non_increasing(fixpoint_ridge(d, sinv, lam(eng), c, far).loss_trace);
  }
  o.check(bad_ols == 0, "ols violations " + std::to_string(bad_ols) + "/50");
  o.check(bad_wls == 0, "wls violations " + std::to_string(bad_wls) + "/50");
  o.check(bad_ridge == 0, "ridge violations " + std::to_string(bad_ridge) + "/50");
}

void oracle_losses(Outcome& o) {
  const auto d = gaussian_data(50, 2, 3, 41, 1.0, spiked(3, 42));
  const Matrix sinv = d.sigma.inverse();
  EstimatorConfig c;
  c.max_iter = 2000;
  c.tol = 1e-12;
  const double g_ols = empirical_loss(d.data, fixpoint_ols(d.data, c).beta_hat);
  const double g_wls = empirical_loss(d.data, fixpoint_wls(d.data, sinv, c).beta_hat, &sinv);
  const double g_ridge = empirical_loss(d.data, fixpoint_ridge(d.data, sinv, 0.1, c).beta_hat, &sinv, 0.1);
  const double o_ols = oracle::descent_minimum(d.data.x, d.data.y, nullptr, 0.0);
  const double o_wls = oracle::descent_minimum(d.data.x, d.data.y, &sinv, 0.0);
  const double o_ridge = oracle::descent_minimum(d.data.x, d.data.y, &sinv, 0.1);
  o.check(std::abs(g_ols - o_ols) <= 1e-4, "ols gap " + fmt(g_ols - o_ols));
  o.check(std::abs(g_wls - o_wls) <= 1e-4, "wls gap " + fmt(g_wls - o_wls));
  o.check(std::abs(g_ridge - o_ridge) <= 1e-4, "ridge gap " + fmt(g_ridge - o_ridge));
}

void robustness_ordering(Outcome& o) {
  const ScenarioSpec s = paper_design(1000, 20, OutlierKind::student(1.0));
  const auto methods = parse_methods({"naive-ols", "offline-ols", "offline-wls"});
  const ResultTable t = run_sweep(s, {0.0, 0.28}, methods, EstimatorConfig{});
  const double naive = median(t.values("naive-ols", 0.28, "mse_beta"));
  for (const char* robust : {"offline-ols", "offline-wls"}) {
    const double clean = median(t.values(robust, 0.0, "mse_beta"));
    const double heavy = median(t.values(robust, 0.28, "mse_beta"));
    o.check(naive >= 10.0 * heavy, std::string(robust) + " naive/robust@28% " + fmt(naive / heavy));
    o.check(heavy <= 3.0 * clean, std::string(robust) + " robust 28%/0% " + fmt(heavy / clean));
  }
}

void wls_normality(Outcome& o) {
  const Index n = 10000, p = 2, q = 5;
  const int reps = 200;
  const Matrix sigma = spiked(q, 61);
  const Matrix sinv = sigma.inverse();
  Matrix z(reps, p * q);
  for (int b = 0; b < reps; ++b) {
    const auto d = gaussian_data(n, p, q, 6000 + static_cast<std::uint64_t>(b), 1.0, sigma);
    const Matrix beta_hat = fixpoint_wls(d.data, sinv, EstimatorConfig{}).beta_hat;
    z.row(b) = std::sqrt(static_cast<double>(n)) * vec_rows(beta_hat - d.beta).transpose();
  }
  const Matrix zc = z.rowwise() - z.colwise().mean();
  const Vector emp = (zc.transpose() * zc).diagonal() / static_cast<double>(reps - 1);
  const Vector theory = wls_asymptotic_cov(sigma, Matrix::Identity(p, p)).matrix.diagonal();
  const double rel = (emp - theory).norm() / theory.norm();
  const double worst = (emp.array() / theory.array() - 1.0).abs().maxCoeff();
  o.check(rel <= 0.15, "relative diagonal error " + fmt(rel));
  o.detail << "; per-entry max " << fmt(worst);
}

void chi_moments(Outcome& o) {
  std::uint64_t seed = 71;
  for (const int q : {2, 3, 10, 20}) {
    const double gap = std::abs(mc_chi_inverse(q, 10000000, seed++) - chi_inverse_moment(q));
    o.check(gap <= 1e-3, "q=" + std::to_string(q) + " gap " + fmt(gap));
  }
}

void ols_wls_psd(Outcome& o) {
  std::mt19937_64 eng(81);
  int not_psd = 0, ratio_fail = 0;
  double worst_ratio = 0.0, mean_ratio = 0.0, worst_eig = 1e300;
  for (int k = 0; k < 20; ++k) {
    const Matrix u = oracle::random_matrix(20, 1, eng);
    const Matrix sigma = u * u.transpose() + Matrix::Identity(20, 20);
    const VarianceRatioReport rep = variance_ratio_report(sigma, Matrix::Identity(5, 5), 1000000, 800 + k);
    not_psd += !rep.difference_psd;
    ratio_fail += rep.ratios.maxCoeff() >= 1.0;
    worst_ratio = std::max(worst_ratio, rep.ratios.maxCoeff());
    worst_eig = std::min(worst_eig, rep.min_eig_difference / rep.trace_ols);
    mean_ratio += rep.ratios.mean() / 20.0;
  }
  o.check(not_psd == 0, "non-PSD " + std::to_string(not_psd) + "/20, min eig/trace " + fmt(worst_eig));
  o.check(ratio_fail == 0, "max ratio " + fmt(worst_ratio) + ", mean " + fmt(mean_ratio));
}

void outlier_detection(Outcome& o) {
  const ScenarioSpec s = paper_design(1000, 10, OutlierKind::student(1.0));
  const ResultTable t = run_sweep(s, {0.02, 0.16, 0.28}, parse_methods({"naive-ols", "offline-ols"}), EstimatorConfig{});
  const double r2 = median(t.values("offline-ols", 0.02, "auc"));
  const double r16 = median(t.values("offline-ols", 0.16, "auc"));
  const double r28 = median(t.values("offline-ols", 0.28, "auc"));
  const double n28 = median(t.values("naive-ols", 0.28, "auc"));
  o.check(r16 >= 0.95 * r2, "robust AUC 2% " + fmt(r2) + " -> 16% " + fmt(r16));
  o.check(r28 >= n28, "at 28% robust " + fmt(r28) + " vs naive " + fmt(n28));
}

void lda(Outcome& o) {
  ScenarioSpec s;
  s.task = Task::lda;
  s.n = 600;
  s.p = 3;
  s.q = 20;
  s.mu_sep = 2.0;
  s.outlier_fraction = 0.5;
  s.outliers = OutlierKind::uniform_cube(20.0);
  s.replicates = 10;
  s.seed = 2024;
  const ResultTable t = run_experiment(s, parse_methods({"naive-ols", "offline-ols"}), EstimatorConfig{});
  const double naive = median(t.values("naive-ols", 0.5, "ari"));
  const double robust = median(t.values("offline-ols", 0.5, "ari"));
  o.check(robust > naive, "robust ARI " + fmt(robust) + " vs naive " + fmt(naive));
  o.check(robust > 1.0 / 3.0, "robust ARI > 1/3");
}

void dirac_setting(Outcome& o) {
  const ScenarioSpec s = paper_design(1000, 5, OutlierKind::dirac(3.0));
  const auto methods = parse_methods({"naive-ols", "offline-ols", "online-ols", "naive-wls", "offline-wls",
                                      "online-wls", "naive-ols+ridge", "offline-ols+ridge", "online-ols+ridge",
                                      "naive-wls+ridge", "offline-wls+ridge", "online-wls+ridge"});
  const std::vector<double> fractions{0.0, 0.02, 0.03, 0.05, 0.09, 0.16, 0.28};
  const ResultTable t = run_sweep(s, fractions, methods, EstimatorConfig{});
  std::size_t failed_runs = 0;
  for (const auto& row : t.rows) failed_runs += row.error.has_value();
  o.check(failed_runs == 0, "failed runs " + std::to_string(failed_runs));
  for (const auto& m : methods) {
    double worst = 0.0;
    for (const double f : fractions)
      for (const double v : t.values(m.name(), f, "mse_beta")) worst = std::max(worst, v);
    o.check(worst <= 0.5, m.name() + " max " + fmt(worst));
  }
}

void timing(Outcome& o) {
  ScenarioSpec s = paper_design(10000, 1, OutlierKind::student(1.0));
  s.outlier_fraction = 0.28;
  const SimData sim = generate_regression(s);
  double off = 1e300, on = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    auto t0 = Clock::now();
    (void)fixpoint_ols(sim.data, EstimatorConfig{});
    off = std::min(off, since(t0));
    t0 = Clock::now();
    (void)fit_online(sim.data, nullptr, EstimatorConfig{});
    on = std::min(on, since(t0));
  }
  o.check(on <= 0.5 * off, "estimation online " + fmt(on) + " s vs offline " + fmt(off) + " s, ratio " + fmt(on / off));
  // whole procedures, Σ̂ included, for reference
  const double full_off = fit_method(sim.data, MethodSpec::parse("offline-ols"), EstimatorConfig{}, 1).elapsed_seconds;
  const double full_on = fit_method(sim.data, MethodSpec::parse("online-ols"), EstimatorConfig{}, 1).elapsed_seconds;
  o.detail << "; with Σ̂: online " << fmt(full_on) << " s, offline " << fmt(full_off) << " s";
}

void mcm_alignment(Outcome& o) {
  const Index q = 20;
  const Matrix sigma = spiked(q, 131);
  std::mt19937_64 eng(132);
  const Matrix l = sigma.llt().matrixL();
  const Matrix e = oracle::random_matrix(5000, q, eng) * l.transpose();
  const Matrix v = mcm(Residuals{e}, McmOptions{}, EstimatorConfig{});
  Eigen::SelfAdjointEigenSolver<Matrix> ev(v), es(sigma);
  const double angle = oracle::principal_angle(ev.eigenvectors().col(q - 1), es.eigenvectors().col(q - 1));
  o.check(angle <= 0.1, "leading angle " + fmt(angle) + " rad");
}

void calibration_round_trip(Outcome& o) {
  const Vector truth = (Vector(3) << 1.0, 2.0, 3.0).finished();
  const Vector delta = oracle::forward_delta(truth, 1000000, 141, 40);
  McmOptions opts;
  opts.mc_samples = 1000000;
  const Calibration cal = calibrate_eigenvalues(delta, opts, 142);
  const double gap = (cal.lambda.array() / truth.array() - 1.0).abs().maxCoeff();
  std::ostringstream s;
  s << "lambda " << cal.lambda.transpose();
  o.check(gap <= 0.05, s.str() + ", max relative gap " + fmt(gap));
}

void breakdown(Outcome& o) {
  ScenarioSpec s = paper_design(1000, 1, OutlierKind::dirac(1e6));
  s.outlier_fraction = 0.4;
  const SimData sim = generate_regression(s);
  const double truth = sim.truth.beta.norm();
  const double naive = fit_method(sim.data, MethodSpec::parse("naive-ols"), EstimatorConfig{}, 1).beta_hat.norm();
  o.check(naive >= 1e3 * truth, "naive ‖β̂‖/‖β*‖ " + fmt(naive / truth));
  for (const char* m : {"offline-ols", "offline-wls"}) {
    const double r = fit_method(sim.data, MethodSpec::parse(m), EstimatorConfig{}, 1).beta_hat.norm();
    o.check(r <= 10.0 * truth, std::string(m) + " ‖β̂‖/‖β*‖ " + fmt(r / truth));
  }
  for (const char* m : {"online-ols", "online-wls"}) {
    const double r = fit_method(sim.data, MethodSpec::parse(m), EstimatorConfig{}, 1).beta_hat.norm();
    o.detail << "; " << m << " " << fmt(r / truth) << " (reported)";
  }
}

double streaming_slope(const EstimatorConfig& config, std::ostringstream& log) {
  std::vector<double> ns, ms;
  for (const Index n : {Index{1000}, Index{10000}, Index{100000}}) {
    ScenarioSpec s = paper_design(n, 5, OutlierKind::student(1.0));
    s.task = Task::streaming;
    s.outlier_fraction = 0.1;
    const ResultTable t = run_experiment(s, {}, config);
    const std::vector<double> v = t.values("initialized-wls", 0.1, "mse_beta");
    double mean = 0.0;
    for (const double x : v) mean += x / static_cast<double>(v.size());
    ns.push_back(static_cast<double>(n));
    ms.push_back(mean);
    log << "n=" << n << " MSE " << fmt(mean) << " (" << v.size() << " runs), ";
  }
  return log_slope(ns, ms);
}

void streaming_decay(Outcome& o) {
  std::ostringstream log;
  const double slope = streaming_slope(EstimatorConfig{}, log);
  o.check(std::abs(slope + 1.0) <= 0.3, log.str() + "slope " + fmt(slope));
  // larger first steps shorten the start-up transient
  EstimatorConfig wide;
  wide.c_gamma = 2.0;
  std::ostringstream log2;
  o.detail << "; c_gamma=2: slope " << fmt(streaming_slope(wide, log2)) << " (reported)";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "noiseless recovery", 5, noiseless_recovery},
      {2, "naive OLS equals naive WLS", 1, naive_equivalence},
      {3, "descent invariant", 30, descent_traces},
      {4, "oracle equivalence", 30, oracle_losses},
      {5, "robustness ordering", 300, robustness_ordering},
      {6, "WLS asymptotic normality", 600, wls_normality},
      {7, "chi inverse moment", 30, chi_moments},
      {8, "OLS minus WLS is PSD", 120, ols_wls_psd},
      {9, "outlier detection", 300, outlier_detection},
      {10, "LDA", 180, lda},
      {11, "Dirac setting", 300, dirac_setting},
      {12, "timing trend", 120, timing},
      {13, "MCM eigenvector alignment", 60, mcm_alignment},
      {14, "calibration round trip", 60, calibration_round_trip},
      {15, "breakdown", 60, breakdown},
      {16, "streaming decay", 600, streaming_decay},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = since(t0);
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " #" << c.id << " " << c.name << ": " << o.detail.str() << " ["
              << fmt(secs) << " s / " << c.budget_seconds << " s" << (in_time ? "" : ", over budget") << "]"
              << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
