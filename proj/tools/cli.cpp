#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "robreg/asymptotics.hpp"
#include "robreg/pipeline.hpp"
#include "robreg/random.hpp"
#include "robreg/serialize.hpp"
#include "robreg/simbench.hpp"

namespace robreg::cli {
namespace {

using nlohmann::json;

struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string output = "-";
  std::string config_path;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  EstimatorConfig estimator;
  int mc_samples = McmOptions{}.mc_samples;
};

struct FitArgs {
  std::string input;
  std::string method = "offline-wls";
  std::string ridge = "none";
  double alpha = 0.0;
  bool recalibrate = false;
  long period = 0;
};

struct SimArgs {
  std::string task = "regression";
  long n = 1000;
  long p = 5;
  long q = 20;
  std::vector<double> fractions{0.0};
  std::string outliers = "student:1";
  std::vector<std::string> methods{"naive-ols", "offline-ols", "online-ols", "naive-wls", "offline-wls", "online-wls"};
  std::string ridge = "none";
  int replicates = 20;
  double mu = 2.0;
  double noise_scale = 1.0;
  double alpha = 0.1;
  bool recalibrate = false;
  bool timing = false;
  std::string json_path;
};

struct AsymptArgs {
  long p = 2;
  long q = 5;
  std::string sigma = "identity";
  long mc = 100000;
  std::optional<Matrix> sigma_matrix;
  std::optional<Matrix> exx_matrix;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--output,-o", c.output, "Output path ('-' for standard output)");
  app->add_option("--config", c.config_path, "JSON file of option values; flags override it");
  app->add_option("--seed", c.seed, "Seed for every random quantity");
  app->add_option("--threads", c.threads, "Worker threads (0 = logical cores)");
  app->add_option("--c-gamma", c.estimator.c_gamma, "Step-size constant c_gamma");
  app->add_option("--gamma", c.estimator.gamma, "Step-size exponent gamma in (1/2, 1)");
  app->add_option("--w", c.estimator.w, "Averaging power w");
  app->add_option("--max-iter", c.estimator.max_iter, "Iteration budget of the fixed-point solvers");
  app->add_option("--tol", c.estimator.tol, "Relative-change tolerance of the fixed-point solvers");
  app->add_option("--mc-samples", c.mc_samples, "Monte Carlo draws for eigenvalue calibration");
}

void add_scenario(CLI::App* app, SimArgs& s) {
  app->add_option("--task", s.task, "regression, lda or streaming")
      ->check(CLI::IsMember({"regression", "lda", "streaming"}));
  app->add_option("--n", s.n, "Observations per replicate");
  app->add_option("--p", s.p, "Covariates");
  app->add_option("--q", s.q, "Responses");
  app->add_option("--fraction", s.fractions, "Outlier fractions in [0, 0.5], comma separated")->delimiter(',');
  app->add_option("--outliers", s.outliers, "student:df, dirac:mu or cube:w");
  app->add_option("--method", s.methods,
                  "naive-ols, offline-ols, online-ols, naive-wls, offline-wls, online-wls; comma separated")
      ->delimiter(',');
  app->add_option("--ridge", s.ridge, "none, a fixed lambda, or auto (cross-validated)");
  app->add_option("--replicates", s.replicates, "Replicates B per fraction");
  app->add_option("--mu", s.mu, "LDA class separation");
  app->add_option("--noise-scale", s.noise_scale, "Multiplier on every noise draw");
  app->add_option("--alpha", s.alpha, "Streaming warm-up fraction");
  app->add_flag("--recalibrate", s.recalibrate, "Streaming: refresh the covariance every alpha*n observations");
  app->add_option("--json", s.json_path, "Also write the results table as JSON");
}

Ridge parse_ridge(const std::string& text) {
  if (text == "none") return Ridge::off();
  if (text == "auto") return Ridge::automatic();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v) || v < 0)
    throw BadInput("--ridge must be none, auto or a nonnegative number, got '" + text + "'");
  return v == 0 ? Ridge::off() : Ridge::fixed(v);
}

MethodSpec parse_method(const std::string& text, const Ridge& ridge) {
  MethodSpec m = MethodSpec::parse(text);
  if (text.find('+') == std::string::npos) m.ridge = ridge;
  return m;
}

/// Writes to `path`, or to `out` when path is "-".
template <typename F>
void emit(const std::string& path, std::ostream& out, F&& write) {
  if (path == "-") {
    write(out);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw BadInput("cannot open '" + path + "' for writing");
  write(f);
  if (!f) throw BadInput("failed writing '" + path + "'");
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadInput("cannot open config file '" + path + "'");
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw BadInput("config file must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw BadInput("config file '" + path + "': " + e.what());
  }
}

/// Turns config keys not already given on the command line into flags.
std::vector<std::string> config_args(const json& cfg, CLI::App* sub, AsymptArgs* asympt) {
  std::vector<std::string> extra;
  for (const auto& [key, value] : cfg.items()) {
    if (asympt && (key == "sigma" || key == "exx") && value.is_array()) {
      auto& slot = key == "sigma" ? asympt->sigma_matrix : asympt->exx_matrix;
      slot = matrix_from_json(value);
      continue;
    }
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw BadInput("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back("--" + key);
      continue;
    }
    std::string text;
    const auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) text += (i ? "," : "") + scalar(value[i]);
    } else {
      text = scalar(value);
    }
    extra.push_back("--" + key);
    extra.push_back(text);
  }
  return extra;
}

McmOptions mcm_options(const Common& c) {
  McmOptions m;
  m.mc_samples = c.mc_samples;
  return m;
}

Task parse_task(const std::string& s) {
  if (s == "lda") return Task::lda;
  if (s == "streaming") return Task::streaming;
  return Task::regression;
}

ScenarioSpec scenario_from(const SimArgs& s, const Common& c) {
  ScenarioSpec spec;
  spec.task = parse_task(s.task);
  spec.n = s.n;
  spec.p = spec.task == Task::lda ? 3 : s.p;
  spec.q = s.q;
  spec.outliers = OutlierKind::parse(s.outliers);
  spec.replicates = s.replicates;
  spec.seed = c.seed;
  spec.mu_sep = s.mu;
  spec.noise_scale = s.noise_scale;
  spec.alpha = s.alpha;
  spec.recalibrate = s.recalibrate;
  for (const double f : s.fractions) {
    spec.outlier_fraction = f;
    spec.validate();
  }
  return spec;
}

int cmd_fit(const FitArgs& a, const Common& c, std::ostream& out) {
  if (a.input.empty()) throw BadInput("fit needs --input");
  const DataSet data = load_csv(a.input);
  Fit fit;
  std::string method;
  if (a.alpha > 0) {
    StreamingOptions so;
    so.alpha = a.alpha;
    so.recalibrate = a.recalibrate;
    so.recalibration_period = a.period;
    so.mcm = mcm_options(c);
    fit = fit_streaming(data, so, c.estimator, c.seed);
    method = a.recalibrate ? "full-wls" : "initialized-wls";
  } else {
    const MethodSpec m = parse_method(a.method, parse_ridge(a.ridge));
    fit = fit_method(data, m, c.estimator, c.seed, mcm_options(c));
    method = m.name();
  }
  json j = fit_to_json(fit);
  j["method"] = method;
  j["n"] = data.n();
  j["p"] = data.p();
  j["q"] = data.q();
  j["outlier_scores"] = vector_to_json(outlier_scores(data, fit).scores);
  emit(c.output, out, [&](std::ostream& o) { o << j.dump(2) << "\n"; });
  return kExitOk;
}

int cmd_simulate(const SimArgs& s, const Common& c, bool bench, std::ostream& out, std::ostream& err) {
  const ScenarioSpec spec = scenario_from(s, c);
  std::vector<MethodSpec> methods;
  const Ridge ridge = parse_ridge(s.ridge);
  for (const auto& m : s.methods) methods.push_back(parse_method(m, ridge));
  const bool timing = bench || s.timing;
  const ResultTable table = run_sweep(spec, s.fractions, methods, c.estimator, mcm_options(c));
  emit(c.output, out, [&](std::ostream& o) { table.write_csv(o, timing); });
  if (!s.json_path.empty()) emit(s.json_path, out, [&](std::ostream& o) { o << table.to_json(timing) << "\n"; });

  std::ostream& summary = c.output == "-" ? err : out;
  table.write_summary(summary);
  if (timing) {
    std::map<std::string, std::vector<double>> times;
    for (const auto& r : table.rows)
      if (!r.error && r.metrics.elapsed_seconds) times[r.method].push_back(*r.metrics.elapsed_seconds);
    for (const auto& [name, v] : times) {
      double sum = 0.0;
      for (const double t : v) sum += t;
      char line[128];
      std::snprintf(line, sizeof line, "%-24s mean time %.6f s over %zu runs\n", name.c_str(),
                    sum / static_cast<double>(v.size()), v.size());
      summary << line;
    }
  }
  return kExitOk;
}

int cmd_asympt(const AsymptArgs& a, const Common& c, std::ostream& out) {
  Matrix sigma;
  if (a.sigma_matrix) {
    sigma = *a.sigma_matrix;
  } else if (a.sigma == "identity") {
    sigma = Matrix::Identity(a.q, a.q);
  } else if (a.sigma == "spiked") {
    if (a.q < 1) throw BadInput("--q must be positive");
    auto eng = make_engine(c.seed, streams::sigma);
    std::normal_distribution<double> nd;
    Vector u(a.q);
    for (Index j = 0; j < a.q; ++j) u(j) = nd(eng);
    sigma = u * u.transpose();
    sigma.diagonal().array() += 1.0;
  } else {
    throw BadInput("--sigma must be identity or spiked");
  }
  const Index q = sigma.rows();
  if (q < 3) throw BadInput("asymptotic covariances need q >= 3");
  const Matrix exx = a.exx_matrix ? *a.exx_matrix : Matrix::Identity(a.p, a.p);

  const VarianceRatioReport rep = variance_ratio_report(sigma, exx, a.mc, c.seed);
  json j;
  j["q"] = q;
  j["p"] = exx.rows();
  j["c_q"] = wls_variance_factor(static_cast<int>(q));
  j["mc_samples"] = a.mc;
  j["sigma"] = matrix_to_json(sigma);
  j["exx"] = matrix_to_json(exx);
  j["wls_covariance"] = matrix_to_json(rep.wls.matrix);
  j["ols_covariance"] = matrix_to_json(rep.ols.matrix);
  j["ratios"] = vector_to_json(rep.ratios);
  j["min_eig_difference"] = rep.min_eig_difference;
  j["trace_ols"] = rep.trace_ols;
  j["difference_psd"] = rep.difference_psd;
  emit(c.output, out, [&](std::ostream& o) { o << j.dump(2) << "\n"; });
  return kExitOk;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::parse_error:
    case Errc::dimension_mismatch:
    case Errc::non_finite:
    case Errc::invalid_argument:
    case Errc::empty_grid:
      return kExitBadInput;
    default:
      return kExitSolver;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust multivariate median regression: fitting, simulation and asymptotics", "robreg"};
  app.require_subcommand(1);

  Common common;
  FitArgs fit_args;
  SimArgs sim_args;
  SimArgs bench_args;
  bench_args.n = 10000;
  bench_args.replicates = 3;
  bench_args.methods = {"online-ols", "offline-ols"};
  AsymptArgs asympt_args;

  CLI::App* fit = app.add_subcommand("fit", "Fit a model to a CSV file and write the fit as JSON");
  add_common(fit, common);
  fit->add_option("--input,-i", fit_args.input, "CSV with header x1..xp,y1..yq");
  fit->add_option("--method", fit_args.method,
                  "naive-ols, offline-ols, online-ols, naive-wls, offline-wls or online-wls");
  fit->add_option("--ridge", fit_args.ridge, "none, a fixed lambda, or auto (cross-validated)");
  fit->add_option("--alpha", fit_args.alpha, "Streaming fit with this warm-up fraction (overrides --method)");
  fit->add_flag("--recalibrate", fit_args.recalibrate, "Streaming: refresh the covariance periodically");
  fit->add_option("--period", fit_args.period, "Streaming: observations between refreshes (default ceil(alpha n))");

  CLI::App* simulate = app.add_subcommand("simulate", "Run a simulation scenario and write long-format CSV");
  add_common(simulate, common);
  add_scenario(simulate, sim_args);
  simulate->add_flag("--timing", sim_args.timing, "Include wall-clock times (output no longer reproducible)");

  CLI::App* asympt = app.add_subcommand("asympt", "Asymptotic covariances of the robust OLS and WLS estimators");
  add_common(asympt, common);
  asympt->add_option("--p", asympt_args.p, "Covariates (E[XX^T] = I unless given in --config)");
  asympt->add_option("--q", asympt_args.q, "Responses, at least 3");
  asympt->add_option("--sigma", asympt_args.sigma, "identity, or spiked (uu^T + I drawn from --seed)");
  asympt->add_option("--mc", asympt_args.mc, "Monte Carlo draws for the OLS covariance");

  CLI::App* bench = app.add_subcommand("bench", "Timing comparison of the estimators");
  add_common(bench, common);
  add_scenario(bench, bench_args);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
    CLI::App* sub = app.get_subcommands().front();
    if (!common.config_path.empty()) {
      const json cfg = load_config(common.config_path);
      const std::vector<std::string> extra =
          config_args(cfg, sub, sub == asympt ? &asympt_args : nullptr);
      if (!extra.empty()) {
        std::vector<std::string> merged{sub->get_name()};
        merged.insert(merged.end(), extra.begin(), extra.end());
        merged.insert(merged.end(), args.begin() + 1, args.end());
        std::reverse(merged.begin(), merged.end());
        app.clear();
        app.parse(merged);
      }
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "robreg: " << e.what() << "\n";
    if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
    return kExitBadInput;
  } catch (const BadInput& e) {
    err << "robreg: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const Error& e) {
    err << "robreg: " << e.what() << "\n";
    return kExitBadInput;
  }

  try {
    common.estimator.validate();
    set_thread_count(common.threads);
    if (fit->parsed()) return cmd_fit(fit_args, common, out);
    if (simulate->parsed()) return cmd_simulate(sim_args, common, false, out, err);
    if (asympt->parsed()) return cmd_asympt(asympt_args, common, out);
    return cmd_simulate(bench_args, common, true, out, err);
  } catch (const BadInput& e) {
    err << "robreg: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const Error& e) {
    err << "robreg: " << e.what() << "\n";
    return exit_code_for(e.code());
  }
}

}  // namespace robreg::cli
