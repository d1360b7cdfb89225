#include "multicause/cli.hpp"

#include "multicause/aux_linear.hpp"
#include "multicause/bootstrap.hpp"
#include "multicause/dataset.hpp"
#include "multicause/deconv.hpp"
#include "multicause/discrete.hpp"
#include "multicause/errors.hpp"
#include "multicause/factor.hpp"
#include "multicause/null_linear.hpp"
#include "multicause/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace multicause {

namespace {

using nlohmann::json;

struct CliConfig {
  std::string input;
  std::string schema;
  std::string out;
  std::string format = "json";
  int q = 0;
  std::vector<int> q_list;
  std::uint64_t seed = 20240101;
  int bootstrap = 200;
  int threads = 1;
  std::vector<std::string> iv_cols;
  // deconv
  std::string preset;
  std::vector<double> x_values;
  std::vector<double> y_grid, u_grid, z_grid;
  double eps_reg = 1e-6;
  double t_max = 10.0;
  int t_count = 1025;
  // simulate
  std::string spec;
  std::string csv_out;
  std::string replicates_out;
  // generate
  Index n = 0;
  std::string schema_out;
  // discrete
  bool allow_degenerate = false;
};

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_std(m.row(i).transpose()));
  return rows;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    return;
  }
  std::ofstream file(path);
  if (!file) throw InputError("cannot write output file: " + path);
  file << text;
  if (!text.empty() && text.back() != '\n') file << '\n';
}

Dataset load_input(const CliConfig& cfg) {
  if (cfg.input.empty()) throw InputError("--input is required");
  if (cfg.schema.empty()) throw InputError("--schema is required");
  return load_csv(cfg.input, load_schema(cfg.schema));
}

void check_format(const CliConfig& cfg) {
  if (cfg.format != "json" && cfg.format != "csv") throw InputError("--format must be json or csv");
}

void check_common(const CliConfig& cfg) {
  check_format(cfg);
  if (cfg.q < 1) throw InputError("--q must be a positive integer");
  if (cfg.bootstrap != 0 && cfg.bootstrap < 50) throw InputError("--bootstrap must be 0 or at least 50");
  if (cfg.threads < 1) throw InputError("--threads must be positive");
}

// Significance codes: "**" when the 95% interval excludes zero, "*" when the 90% one does.
std::string significance(double lo95, double hi95, double lo90, double hi90) {
  if (lo95 > 0.0 || hi95 < 0.0) return "**";
  if (lo90 > 0.0 || hi90 < 0.0) return "*";
  return "0";
}

std::vector<std::string> pick(const std::vector<std::string>& names, const std::vector<Index>& idx) {
  std::vector<std::string> out;
  for (Index i : idx) out.push_back(names[static_cast<std::size_t>(i)]);
  return out;
}

json config_json(const CliConfig& cfg, const std::string& command) {
  json j{{"command", command}, {"seed", cfg.seed}, {"threads", cfg.threads}, {"format", cfg.format}};
  if (!cfg.input.empty()) j["input"] = cfg.input;
  if (!cfg.schema.empty()) j["schema"] = cfg.schema;
  if (cfg.q > 0) j["q"] = cfg.q;
  return j;
}

json coefficient_table(const Dataset& d, const VectorXd& beta, const std::optional<BootstrapResult>& boot) {
  json rows = json::array();
  for (Index j = 0; j < beta.size(); ++j) {
    json row{{"name", d.names().treatments[static_cast<std::size_t>(j)]}, {"estimate", beta(j)}};
    if (boot) {
      row["p2.5"] = boot->lower95(j);
      row["p5"] = boot->lower90(j);
      row["p95"] = boot->upper90(j);
      row["p97.5"] = boot->upper95(j);
      row["significance"] = significance(boot->lower95(j), boot->upper95(j), boot->lower90(j), boot->upper90(j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string coefficient_csv(const json& rows) {
  std::ostringstream s;
  s.precision(10);
  s << "name,estimate,p2.5,p5,p95,p97.5,significance\n";
  for (const auto& r : rows) {
    s << r["name"].get<std::string>() << ',' << r["estimate"].get<double>();
    for (const char* key : {"p2.5", "p5", "p95", "p97.5"}) {
      s << ',';
      if (r.contains(key)) s << r[key].get<double>();
    }
    s << ',' << (r.contains("significance") ? r["significance"].get<std::string>() : std::string()) << '\n';
  }
  return s.str();
}

json factor_diagnostics(const FactorFit& fit, const Dataset& d) {
  std::vector<std::string> heywood;
  for (std::size_t i = 0; i < fit.heywood.size(); ++i)
    if (fit.heywood[i]) heywood.push_back(d.names().treatments[i]);
  json j{{"converged", fit.converged}, {"iterations", fit.iterations}, {"objective", fit.objective},
         {"heywood", heywood},         {"warnings", fit.warnings}};
  try {
    const SufficiencyTest t = sufficiency_test(fit, d.n());
    j["sufficiency"] = {{"statistic", t.statistic}, {"df", t.df}, {"p_value", t.p_value}};
  } catch (const Error& e) {
    j["sufficiency"] = {{"error", e.what()}};
  }
  return j;
}

std::vector<Index> resolve_iv_cols(const Dataset& d, const std::vector<std::string>& given) {
  std::vector<Index> out;
  if (given.empty()) {
    for (Index j = 0; j < d.r(); ++j) out.push_back(j);
    return out;
  }
  const auto& names = d.names().instruments;
  for (const auto& g : given) {
    auto it = std::find(names.begin(), names.end(), g);
    if (it != names.end()) {
      out.push_back(static_cast<Index>(it - names.begin()));
      continue;
    }
    try {
      std::size_t used = 0;
      const int v = std::stoi(g, &used);
      if (used != g.size()) throw std::invalid_argument(g);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InputError("--iv-cols: '" + g + "' is neither an instrument name nor a column index");
    }
  }
  return out;
}

int cmd_estimate_aux(const CliConfig& cfg, std::ostream& out) {
  check_common(cfg);
  const Dataset d = load_input(cfg);
  if (!d.has_z()) throw InputError("estimate-aux needs instrument columns in the schema");
  const auto iv = resolve_iv_cols(d, cfg.iv_cols);
  const int q = cfg.q;
  const AuxEstimate est = estimate_aux_subset(d, q, iv);
  std::optional<BootstrapResult> boot;
  if (cfg.bootstrap > 0)
    boot = bootstrap_ci(
        d, [&](const Dataset& s) { return estimate_aux_subset(s, q, iv).beta; }, cfg.bootstrap, cfg.seed, cfg.threads);

  json config = config_json(cfg, "estimate-aux");
  config["bootstrap"] = cfg.bootstrap;
  config["iv_cols"] = pick(d.names().instruments, iv);
  const json rows = coefficient_table(d, est.beta, boot);
  if (cfg.format == "csv") {
    emit(coefficient_csv(rows), cfg.out, out);
    return 0;
  }
  json report{{"config", config}, {"n", d.n()}, {"coefficients", rows}, {"beta", to_std(est.beta)},
              {"delta", to_std(est.delta)}};
  json diag = factor_diagnostics(est.factor, d);
  diag["rank_rcond"] = est.rank_rcond;
  if (boot) diag["bootstrap_failures"] = boot->failures;
  report["diagnostics"] = diag;
  emit(report.dump(2), cfg.out, out);
  return 0;
}

int cmd_estimate_null(const CliConfig& cfg, std::ostream& out) {
  check_common(cfg);
  const Dataset d = load_input(cfg);
  const int q = cfg.q;
  const NullEstimate est = estimate_null(d, q);
  std::optional<BootstrapResult> boot;
  if (cfg.bootstrap > 0)
    boot = bootstrap_ci(d, [&](const Dataset& s) { return estimate_null(s, q).beta; }, cfg.bootstrap, cfg.seed,
                        cfg.threads);

  json config = config_json(cfg, "estimate-null");
  config["bootstrap"] = cfg.bootstrap;
  const json rows = coefficient_table(d, est.beta, boot);
  if (cfg.format == "csv") {
    emit(coefficient_csv(rows), cfg.out, out);
    return 0;
  }
  json report{{"config", config},
              {"n", d.n()},
              {"coefficients", rows},
              {"beta", to_std(est.beta)},
              {"beta_lms", to_std(est.beta_lms)},
              {"delta", to_std(est.delta)},
              {"confounded_set", pick(d.names().treatments, est.confounded)},
              {"null_set", pick(d.names().treatments, est.null_set)}};
  json diag = factor_diagnostics(est.factor, d);
  diag["lms_objective"] = est.lms_objective;
  if (boot) diag["bootstrap_failures"] = boot->failures;
  report["diagnostics"] = diag;
  emit(report.dump(2), cfg.out, out);
  return 0;
}

int cmd_test_null(const CliConfig& cfg, std::ostream& out) {
  check_common(cfg);
  if (cfg.bootstrap < 50) throw InputError("test-null needs --bootstrap of at least 50");
  const Dataset d = load_input(cfg);
  const SharpNullTest t = test_sharp_null_linear(d, cfg.q, cfg.bootstrap, cfg.seed, {}, cfg.threads);
  if (cfg.format == "csv") {
    std::ostringstream s;
    s.precision(10);
    s << "statistic,p_value,B,failures\n" << t.statistic << ',' << t.p_value << ',' << t.B << ',' << t.failures << '\n';
    emit(s.str(), cfg.out, out);
    return 0;
  }
  json config = config_json(cfg, "test-null");
  config["bootstrap"] = cfg.bootstrap;
  json report{{"config", config},      {"statistic", t.statistic}, {"p_value", t.p_value},
              {"B", t.B},              {"failures", t.failures},
              {"confounded_set", pick(d.names().treatments, t.confounded)}};
  emit(report.dump(2), cfg.out, out);
  return 0;
}

deconv::UniformGrid grid_option(const std::vector<double>& v, deconv::UniformGrid fallback, const char* name) {
  if (v.empty()) return fallback;
  if (v.size() != 3) throw InputError(std::string("--") + name + " takes min,max,count");
  return {v[0], v[1], static_cast<int>(v[2])};
}

int cmd_deconv(const CliConfig& cfg, std::ostream& out) {
  deconv::DeconvConfig dc;
  deconv::ConditionalDensity density;
  VectorXd x;
  double y_shift = 0.0;
  json source;
  if (!cfg.preset.empty()) {
    if (cfg.preset != "linear-gaussian") throw InputError("deconv: the only preset is linear-gaussian");
    const auto model = deconv::example_model();
    dc = deconv::config_from_loading(model.alpha, model.eta, model.residual_covariance());
    density = model.conditional_density();
    x = VectorXd::Zero(model.alpha.size());
    source = {{"preset", cfg.preset}};
  } else {
    const Dataset d = load_input(cfg);
    const deconv::PlugIn plug = deconv::fit_plug_in(d);
    dc = plug.config;
    density = plug.density;
    dc.y_grid = {-8.0 * plug.y_sd, 8.0 * plug.y_sd, 161};
    dc.z_grid = {-50.0 * plug.z_sd, 50.0 * plug.z_sd, 401};
    x = plug.x_mean;
    y_shift = plug.y_mean;
    source = {{"input", cfg.input}, {"schema", cfg.schema}};
  }
  VectorXd x_raw = x;
  if (!cfg.x_values.empty()) {
    if (static_cast<Index>(cfg.x_values.size()) != x.size())
      throw InputError("--x needs " + std::to_string(x.size()) + " values");
    x_raw = Eigen::Map<const VectorXd>(cfg.x_values.data(), x.size());
  }
  // The plug-in works on centred data.
  const VectorXd x_eval = cfg.preset.empty() ? VectorXd(x_raw - x) : x_raw;
  dc.y_grid = grid_option(cfg.y_grid, dc.y_grid, "y-grid");
  dc.u_grid = grid_option(cfg.u_grid, dc.u_grid, "u-grid");
  dc.z_grid = grid_option(cfg.z_grid, dc.z_grid, "z-grid");
  dc.eps_reg = cfg.eps_reg;
  dc.t_max = cfg.t_max;
  dc.t_count = cfg.t_count;

  deconv::DensityGrid cond = deconv::deconvolve_outcome(density, x_eval, dc);
  deconv::DensityGrid marg = deconv::potential_outcome_density(cond, dc);
  for (auto& v : cond.y) v += y_shift;
  for (auto& v : marg.y) v += y_shift;

  json files = json::object();
  if (!cfg.out.empty()) {
    std::filesystem::create_directories(cfg.out);
    const auto cpath = (std::filesystem::path(cfg.out) / "conditional.csv").string();
    const auto mpath = (std::filesystem::path(cfg.out) / "marginal.csv").string();
    std::ofstream c(cpath), m(mpath);
    if (!c || !m) throw InputError("cannot write density files under " + cfg.out);
    deconv::write_csv(c, cond);
    deconv::write_csv(m, marg);
    files = {{"conditional", cpath}, {"marginal", mpath}};
  } else if (cfg.format == "csv") {
    deconv::write_csv(out, marg);
    return 0;
  }
  json report{{"config",
               {{"command", "deconv"},
                {"source", source},
                {"x", to_std(x_raw)},
                {"eps_reg", dc.eps_reg},
                {"t_max", dc.t_max},
                {"t_count", dc.t_count},
                {"y_grid", {dc.y_grid.min + y_shift, dc.y_grid.max + y_shift, dc.y_grid.count}},
                {"u_grid", {dc.u_grid.min, dc.u_grid.max, dc.u_grid.count}},
                {"z_grid", {dc.z_grid.min, dc.z_grid.max, dc.z_grid.count}}}},
              {"gamma_tilde", to_std(dc.gamma_tilde)},
              {"eta", to_std(dc.eta)},
              {"sigma_tilde", dc.sigma_tilde},
              {"truncation", dc.truncation()},
              {"imag_residue", cond.imag_residue},
              {"conditional_mass_min", cond.mass.minCoeff()},
              {"conditional_mass_max", cond.mass.maxCoeff()},
              {"marginal_mass", marg.mass(0)},
              {"files", files}};
  out << report.dump(2) << '\n';
  return 0;
}

int cmd_simulate(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
  check_format(cfg);
  if (cfg.spec.empty()) throw InputError("--spec is required");
  std::ifstream in(cfg.spec);
  if (!in) throw InputError("cannot open experiment spec: " + cfg.spec);
  std::stringstream buf;
  buf << in.rdbuf();
  sim::ExperimentSpec spec = sim::parse_experiment(buf.str());
  if (cfg.threads > 1) spec.threads = cfg.threads;
  int last = -1;
  const auto tables = sim::run_experiment(spec, [&](const std::string&, Index n, int done, int total) {
    const int pct = 100 * done / total;
    if (pct / 10 != last / 10) {
      err << "n=" << n << ": " << done << "/" << total << " replications\n";
      last = pct;
    }
  });
  if (!cfg.csv_out.empty()) {
    std::ofstream f(cfg.csv_out);
    if (!f) throw InputError("cannot write " + cfg.csv_out);
    sim::write_summary_csv(f, tables);
  }
  if (!cfg.replicates_out.empty()) {
    std::ofstream f(cfg.replicates_out);
    if (!f) throw InputError("cannot write " + cfg.replicates_out);
    sim::write_replicates_csv(f, tables);
  }
  if (cfg.format == "csv") {
    std::ostringstream s;
    sim::write_summary_csv(s, tables);
    emit(s.str(), cfg.out, out);
  } else {
    emit(sim::summary_json(spec, tables), cfg.out, out);
  }
  return 0;
}

int cmd_sufficiency(const CliConfig& cfg, std::ostream& out) {
  check_format(cfg);
  const Dataset raw = load_input(cfg);
  if (cfg.q_list.empty()) throw InputError("--q is required");
  const Dataset d = center(raw).first;
  const std::optional<MatrixXd> controls = d.has_z() ? std::optional<MatrixXd>(d.z()) : std::nullopt;
  json rows = json::array();
  for (int q : cfg.q_list) {
    json row{{"q", q}};
    try {
      const FactorFit fit = fit_factor(d.x(), q, controls);
      const SufficiencyTest t = sufficiency_test(fit, d.n());
      row["statistic"] = t.statistic;
      row["df"] = t.df;
      row["p_value"] = t.p_value;
    } catch (const Error& e) {
      row["error"] = e.what();
    }
    rows.push_back(std::move(row));
  }
  if (cfg.format == "csv") {
    std::ostringstream s;
    s.precision(10);
    s << "q,statistic,df,p_value\n";
    for (const auto& r : rows) {
      s << r["q"].get<int>() << ',';
      if (r.contains("statistic"))
        s << r["statistic"].get<double>() << ',' << r["df"].get<int>() << ',' << r["p_value"].get<double>();
      else
        s << ",,";
      s << '\n';
    }
    emit(s.str(), cfg.out, out);
    return 0;
  }
  json config = config_json(cfg, "sufficiency-test");
  config["q"] = cfg.q_list;
  config["controls"] = d.has_z();
  emit(json{{"config", config}, {"n", d.n()}, {"tests", rows}}.dump(2), cfg.out, out);
  return 0;
}

int cmd_discrete(const CliConfig& cfg, std::ostream& out) {
  if (cfg.input.empty()) throw InputError("--input is required");
  std::ifstream in(cfg.input);
  if (!in) throw InputError("cannot open joint table: " + cfg.input);
  std::stringstream buf;
  buf << in.rdbuf();
  const discrete::DiscreteJoint joint = discrete::joint_from_json(buf.str());
  discrete::MixtureOptions opts;
  opts.seed = cfg.seed;
  opts.allow_degenerate = cfg.allow_degenerate;
  const discrete::AdmissibleFit fit = discrete::identify(joint, opts);
  json report{{"config", {{"command", "discrete"}, {"input", cfg.input}, {"seed", cfg.seed},
                          {"allow_degenerate", cfg.allow_degenerate}}},
              {"p", fit.p},
              {"weights", to_std(fit.weights)},
              {"success", matrix_json(fit.success)},
              {"discrepancy", fit.discrepancy},
              {"degenerate", fit.degenerate},
              {"label_switched", fit.label_switched},
              {"potential_outcomes", matrix_json(discrete::g_formula(fit))}};
  try {
    const auto test = discrete::test_sharp_null_discrete(fit, joint.py_given_x());
    report["sharp_null"] = {{"exists", test.exists}, {"discrepancy", test.discrepancy},
                            {"confounded", test.confounded}};
  } catch (const Error& e) {
    report["sharp_null"] = {{"error", e.what()}};
  }
  emit(report.dump(2), cfg.out, out);
  return 0;
}

int cmd_generate(const CliConfig& cfg, std::ostream& out) {
  if (cfg.out.empty()) throw InputError("--out is required");
  sim::DgpConfig dgp = sim::preset(cfg.preset.empty() ? "aux" : cfg.preset);
  if (cfg.n > 0) dgp.n = cfg.n;
  dgp.seed = cfg.seed;
  Dataset d = sim::generate(dgp);
  if (cfg.preset == "mouse") {
    ColumnNames names;
    names.outcome = "weight";
    for (int i = 1; i <= 17; ++i) names.treatments.push_back((i < 10 ? "g0" : "g") + std::to_string(i));
    for (int i = 1; i <= 5; ++i) names.instruments.push_back("snp" + std::to_string(i));
    d = Dataset(d.y(), d.x(), d.z(), std::nullopt, names);
  }
  write_csv(cfg.out, d);
  const auto& nm = d.names();
  json schema{{"outcome", nm.outcome}, {"treatments", nm.treatments}};
  if (d.has_z()) schema["instruments"] = nm.instruments;
  if (d.has_w()) schema["proxies"] = nm.proxies;
  if (!cfg.schema_out.empty()) emit(schema.dump(2), cfg.schema_out, out);
  out << json{{"rows", d.n()}, {"csv", cfg.out}, {"schema", cfg.schema_out}, {"seed", cfg.seed}}.dump() << '\n';
  return 0;
}

void add_data_options(CLI::App* app, CliConfig& cfg) {
  app->add_option("--input", cfg.input, "CSV data file");
  app->add_option("--schema", cfg.schema, "JSON column schema");
}

void add_estimation_options(CLI::App* app, CliConfig& cfg) {
  add_data_options(app, cfg);
  app->add_option("--q", cfg.q, "number of latent confounders")->required();
  app->add_option("--seed", cfg.seed, "random seed");
  app->add_option("--bootstrap", cfg.bootstrap, "bootstrap replicates (0 disables)");
  app->add_option("--threads", cfg.threads, "worker threads");
  app->add_option("--out", cfg.out, "output file (default stdout)");
  app->add_option("--format", cfg.format, "json or csv");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Treatment effect estimation with multiple treatments and unmeasured confounding", "multicause"};
  app.require_subcommand(1);
  CliConfig cfg;

  auto* aux = app.add_subcommand("estimate-aux", "auxiliary-variables estimator with bootstrap percentiles");
  add_estimation_options(aux, cfg);
  aux->add_option("--iv-cols", cfg.iv_cols, "instrument columns used in the correction (names or 0-based indices)")
      ->delimiter(',');

  auto* nul = app.add_subcommand("estimate-null", "null-treatments estimator with bootstrap percentiles");
  add_estimation_options(nul, cfg);

  auto* tst = app.add_subcommand("test-null", "test of the sharp null of no treatment effect");
  add_estimation_options(tst, cfg);

  auto* dec = app.add_subcommand("deconv", "potential outcome density by Fourier deconvolution");
  add_data_options(dec, cfg);
  dec->add_option("--preset", cfg.preset, "linear-gaussian for the built-in model");
  dec->add_option("--x", cfg.x_values, "treatment values")->delimiter(',');
  dec->add_option("--y-grid", cfg.y_grid, "min,max,count")->delimiter(',');
  dec->add_option("--u-grid", cfg.u_grid, "min,max,count")->delimiter(',');
  dec->add_option("--z-grid", cfg.z_grid, "min,max,count")->delimiter(',');
  dec->add_option("--eps-reg", cfg.eps_reg, "kernel floor for the frequency cut-off");
  dec->add_option("--t-max", cfg.t_max, "largest frequency");
  dec->add_option("--t-count", cfg.t_count, "frequency samples");
  dec->add_option("--out", cfg.out, "directory for conditional.csv and marginal.csv");
  dec->add_option("--format", cfg.format, "json or csv");

  auto* simc = app.add_subcommand("simulate", "Monte Carlo experiment from a JSON spec");
  simc->add_option("--spec", cfg.spec, "experiment spec JSON")->required();
  simc->add_option("--threads", cfg.threads, "worker threads");
  simc->add_option("--out", cfg.out, "summary output file (default stdout)");
  simc->add_option("--format", cfg.format, "json or csv");
  simc->add_option("--csv", cfg.csv_out, "also write the summary CSV here");
  simc->add_option("--replicates", cfg.replicates_out, "per-replicate estimates CSV");

  auto* suf = app.add_subcommand("sufficiency-test", "likelihood-ratio test that q factors suffice");
  add_data_options(suf, cfg);
  suf->add_option("--q", cfg.q_list, "factor counts, comma separated")->required()->delimiter(',');
  suf->add_option("--out", cfg.out, "output file (default stdout)");
  suf->add_option("--format", cfg.format, "json or csv");

  auto* dis = app.add_subcommand("discrete", "identification from a discrete joint table");
  dis->add_option("--input", cfg.input, "joint table JSON")->required();
  dis->add_option("--seed", cfg.seed, "multi-start seed");
  dis->add_flag("--allow-degenerate", cfg.allow_degenerate, "return degenerate mixture fits");
  dis->add_option("--out", cfg.out, "output file (default stdout)");

  auto* gen = app.add_subcommand("generate", "draw a dataset from a simulation preset");
  gen->add_option("--preset", cfg.preset, "aux, aux-violation, null-case1, null-case2, linear-gaussian, mouse");
  gen->add_option("--n", cfg.n, "sample size (preset default when omitted)");
  gen->add_option("--seed", cfg.seed, "random seed");
  gen->add_option("--out", cfg.out, "CSV path")->required();
  gen->add_option("--schema-out", cfg.schema_out, "schema JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Input);
  }

  try {
    if (aux->parsed()) return cmd_estimate_aux(cfg, out);
    if (nul->parsed()) return cmd_estimate_null(cfg, out);
    if (tst->parsed()) return cmd_test_null(cfg, out);
    if (dec->parsed()) return cmd_deconv(cfg, out);
    if (simc->parsed()) return cmd_simulate(cfg, out, err);
    if (suf->parsed()) return cmd_sufficiency(cfg, out);
    if (dis->parsed()) return cmd_discrete(cfg, out);
    if (gen->parsed()) return cmd_generate(cfg, out);
  } catch (const Error& e) {
    err << json{{"error", {{"kind", kind_name(e.kind())}, {"code", static_cast<int>(e.kind())}, {"message", e.what()}}}}
               .dump()
        << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << json{{"error", {{"kind", "input"}, {"code", 2}, {"message", e.what()}}}}.dump() << '\n';
    return static_cast<int>(ErrorKind::Input);
  }
  return static_cast<int>(ErrorKind::Input);
}

}  // namespace multicause
