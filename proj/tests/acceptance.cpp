// Acceptance runner: one PASS/FAIL line per criterion, details above it.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "discrete_support.hpp"
#include "multicause/deconv.hpp"
#include "multicause/discrete.hpp"
#include "multicause/errors.hpp"
#include "multicause/sim.hpp"
#include "support.hpp"

#include <CLI11.hpp>

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

using namespace multicause;

namespace {

// Tolerances, pinned.
constexpr double kCoverageBand = 0.05;
constexpr double kCoverageFloor = 0.90;
constexpr double kCoverageCeiling = 1.00;
constexpr double kBiasThreshold = 0.05;
constexpr double kOlsOracleTolerance = 0.03;
constexpr double kDiscreteTolerance = 1e-6;
constexpr double kSharpNullH0Discrepancy = 1e-8;
constexpr double kSharpNullH1Discrepancy = 0.01;
constexpr double kDensityTolerance = 1e-2;
constexpr double kMassLow = 0.98;
constexpr double kMassHigh = 1.02;
constexpr double kCentralU = 3.0;

// Reference 95% coverage rows at n = 2000 (instrument setting) and n = 5000 (no instruments).
const std::map<std::string, std::vector<double>> kCoverageRows{
    {"Aux1", {0.943, 0.949, 0.954, 0.950, 0.933, 0.949}},
    {"Aux2", {0.942, 0.959, 0.958, 0.953, 0.950, 0.942}},
    {"Null1", {0.943, 0.958, 0.959, 0.967, 0.969, 0.961, 0.963, 0.975}},
};

struct Outcome {
  bool pass = false;
  std::string summary;
};

struct Context {
  int threads = 1;
  bool full_scale = false;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

std::string row(const VectorXd& v, int digits = 3) {
  std::ostringstream s;
  for (Index j = 0; j < v.size(); ++j) s << (j ? " " : "") << std::setw(7) << fmt(v(j), digits);
  return s.str();
}

void print_tables(const std::vector<sim::SummaryTable>& tables) {
  for (const auto& t : tables) {
    std::cout << "    " << std::setw(6) << t.estimator << " n=" << t.n << " reps=" << t.replications
              << " failures=" << t.failures << "\n";
    std::cout << "      bias     " << row(t.mean_bias) << "\n";
    if (t.coverage) std::cout << "      coverage " << row(*t.coverage) << "  (" << t.coverage_replications << " with intervals)\n";
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

const sim::SummaryTable& table_for(const std::vector<sim::SummaryTable>& tables, const std::string& label) {
  for (const auto& t : tables)
    if (t.estimator == label) return t;
  throw std::runtime_error("no table for " + label);
}

// Coverage of every coefficient within the band of the reference row.
bool coverage_matches(const sim::SummaryTable& t, double& worst, bool floor_check) {
  const auto& ref = kCoverageRows.at(t.estimator);
  bool ok = t.coverage.has_value() && t.coverage->size() == static_cast<Index>(ref.size());
  if (!ok) return false;
  for (Index j = 0; j < t.coverage->size(); ++j) {
    const double c = (*t.coverage)(j);
    worst = std::max(worst, std::abs(c - ref[static_cast<std::size_t>(j)]));
    if (std::abs(c - ref[static_cast<std::size_t>(j)]) > kCoverageBand) ok = false;
    if (floor_check && (c < kCoverageFloor || c > kCoverageCeiling)) ok = false;
  }
  return ok && t.failures == 0;
}

sim::ExperimentSpec table_one_spec(int replications, int threads) {
  sim::ExperimentSpec spec;
  spec.preset = "aux";
  spec.estimators = {"Aux1", "Aux2"};
  spec.n = {2000};
  spec.replications = replications;
  spec.bootstrap_B = 200;
  spec.seed = 20240101;
  spec.threads = threads;
  return spec;
}

Outcome criterion_coverage_instruments(const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const auto tables = sim::run_experiment(table_one_spec(200, ctx.threads));
  print_tables(tables);
  double worst = 0.0;
  bool ok = true;
  for (const auto& t : tables) ok = coverage_matches(t, worst, false) && ok;
  return {ok, "Aux1/Aux2 n=2000 200 reps B=200: max |coverage - reference| = " + fmt(worst) + " (band " +
                  fmt(kCoverageBand, 2) + "), " + fmt(seconds_since(start), 0) + " s"};
}

Outcome criterion_coverage_null(const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  sim::ExperimentSpec spec;
  spec.preset = "null-case1";
  spec.estimators = {"Null1"};
  spec.n = {5000};
  spec.replications = 200;
  spec.bootstrap_B = 200;
  spec.seed = 20240202;
  spec.threads = ctx.threads;
  const auto tables = sim::run_experiment(spec);
  print_tables(tables);
  double worst = 0.0;
  const bool ok = coverage_matches(tables.front(), worst, true);
  return {ok, "Null1 case 1 n=5000 200 reps B=200: coverage in [" + fmt(kCoverageFloor, 2) + ", " +
                  fmt(kCoverageCeiling, 2) + "], max |coverage - reference| = " + fmt(worst) + ", " +
                  fmt(seconds_since(start), 0) + " s"};
}

std::vector<sim::SummaryTable> bias_experiment(const std::string& preset, std::uint64_t seed, int threads) {
  sim::ExperimentSpec spec;
  spec.preset = preset;
  spec.estimators = {"IV1", "IV2", "Aux1", "Aux2", "Aux3", "PI1", "PI2", "OLS"};
  spec.n = {2000};
  spec.replications = 200;
  spec.seed = seed;
  spec.threads = threads;
  return sim::run_experiment(spec);
}

double abs_bias(const sim::SummaryTable& t, Index j) { return std::abs(t.mean_bias(j)); }
double max_abs_bias(const sim::SummaryTable& t, Index from, Index count) {
  return t.mean_bias.segment(from, count).cwiseAbs().maxCoeff();
}

Outcome criterion_bias_pattern(const Context& ctx) {
  const auto tables = bias_experiment("aux", 20240303, ctx.threads);
  print_tables(tables);
  std::vector<std::string> failed;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) failed.push_back(what);
  };
  for (const char* e : {"IV1", "Aux1", "Aux2", "PI1"})
    expect(max_abs_bias(table_for(tables, e), 0, 6) < kBiasThreshold, std::string(e) + " small on all");
  const auto& iv2 = table_for(tables, "IV2");
  expect(abs_bias(iv2, 0) > kBiasThreshold && abs_bias(iv2, 5) > kBiasThreshold, "IV2 biased on beta1 and beta6");
  for (const char* e : {"Aux3", "OLS"})
    expect(max_abs_bias(table_for(tables, e), 1, 5) > kBiasThreshold, std::string(e) + " biased on a confounded effect");
  const auto& pi2 = table_for(tables, "PI2");
  expect(abs_bias(pi2, 5) < kBiasThreshold && max_abs_bias(pi2, 1, 4) > kBiasThreshold,
         "PI2 small on beta6, biased on beta2..beta5");
  for (const auto& t : tables) expect(t.failures == 0, t.estimator + " had failures");
  std::string summary = "bias pattern at n=2000, 200 reps, threshold " + fmt(kBiasThreshold, 2);
  for (const auto& f : failed) summary += "; violated: " + f;
  return {failed.empty(), summary};
}

Outcome criterion_violation_pattern(const Context& ctx) {
  const auto tables = bias_experiment("aux-violation", 20240404, ctx.threads);
  print_tables(tables);
  std::vector<std::string> failed;
  for (const auto& t : tables) {
    if (!(max_abs_bias(t, 1, 5) > kBiasThreshold)) failed.push_back(t.estimator + " unbiased on every confounded effect");
    const bool iv = sim::canonical_label(t.estimator).rfind("IV", 0) == 0;
    const bool biased_first = abs_bias(t, 0) > kBiasThreshold;
    if (iv != biased_first) failed.push_back(t.estimator + (iv ? " unbiased" : " biased") + " on beta1");
  }
  std::string summary = "direct instrument effects at n=2000, 200 reps, threshold " + fmt(kBiasThreshold, 2);
  for (const auto& f : failed) summary += "; violated: " + f;
  return {failed.empty(), summary};
}

Outcome criterion_ols_oracle(const Context& ctx) {
  sim::ExperimentSpec spec;
  spec.preset = "null-case1";
  spec.estimators = {"OLS"};
  spec.n = {100000};
  spec.replications = 20;
  spec.seed = 20240505;
  spec.threads = ctx.threads;
  const auto tables = sim::run_experiment(spec);
  print_tables(tables);
  const sim::DgpConfig cfg = sim::null_preset(1);
  const testing::PopulationMoments m = testing::population_moments(cfg);
  const VectorXd oracle = m.sigma_x.ldlt().solve(cfg.alpha) * cfg.delta_y;
  std::cout << "    oracle bias   " << row(oracle) << "\n";
  const double err = (tables.front().mean_bias - oracle).cwiseAbs().maxCoeff();
  return {err < kOlsOracleTolerance, "OLS n=1e5, 20 reps: max |bias - population bias| = " + fmt(err, 4) + " (tol " +
                                         fmt(kOlsOracleTolerance, 2) + ")"};
}

Outcome criterion_discrete(const Context&) {
  std::mt19937_64 rng(20240606);
  std::uniform_int_distribution<int> pick_p(3, 5);
  std::uniform_int_distribution<int> pick_ny(2, 3);
  double worst_g = 0.0;
  int h0_ok = 0;
  int h1_ok = 0;
  int errors = 0;
  const int cases = 100;
  for (int k = 0; k < cases; ++k) {
    for (auto effect : {testing::OutcomeEffect::None, testing::OutcomeEffect::Active}) {
      const int p = pick_p(rng);
      const int ny = pick_ny(rng);
      const auto joint = discrete::DiscreteJoint::from_latent(testing::random_latent(p, ny, effect, rng));
      try {
        const auto fit = discrete::identify(joint);
        worst_g = std::max(worst_g, (discrete::g_formula(fit) - testing::brute_force_g_formula(joint)).cwiseAbs().maxCoeff());
        const auto r = discrete::test_sharp_null_discrete(fit, joint.py_given_x());
        if (effect == testing::OutcomeEffect::None && r.exists && r.discrepancy < kSharpNullH0Discrepancy) ++h0_ok;
        if (effect == testing::OutcomeEffect::Active && (!r.exists || r.discrepancy > kSharpNullH1Discrepancy)) ++h1_ok;
      } catch (const Error& e) {
        ++errors;
        std::cout << "    case " << k << ": " << e.what() << "\n";
      }
    }
  }
  const bool ok = errors == 0 && worst_g < kDiscreteTolerance && h0_ok == cases && h1_ok == cases;
  return {ok, "200 random joints (p=3..5): max g-formula error " + sci(worst_g) + " (tol " + sci(kDiscreteTolerance) + "), H0 consistent " +
                  std::to_string(h0_ok) + "/" + std::to_string(cases) + ", H1 inconsistent " + std::to_string(h1_ok) +
                  "/" + std::to_string(cases)};
}

double normal_pdf(double v, double mean, double sd) {
  const double s = (v - mean) / sd;
  return std::exp(-0.5 * s * s) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

Outcome criterion_deconvolution(const Context&) {
  const auto model = deconv::example_model();
  const auto cfg = deconv::config_from_loading(model.alpha, model.eta, model.residual_covariance());
  const auto f = model.conditional_density();
  const double marginal_sd = std::sqrt(model.delta * model.delta + model.sigma_y * model.sigma_y);
  double cond_err = 0.0, marg_err = 0.0, mass_lo = 1e9, mass_hi = -1e9;
  const std::vector<VectorXd> xs{VectorXd::Zero(3), (VectorXd(3) << 0.5, -0.3, 1.0).finished(),
                                 (VectorXd(3) << -1.0, 1.0, 0.5).finished()};
  for (const auto& x : xs) {
    const auto g = deconv::deconvolve_outcome(f, x, cfg);
    for (std::size_t k = 0; k < g.u.size(); ++k) {
      if (std::abs(g.u[k]) > kCentralU) continue;
      mass_lo = std::min(mass_lo, g.mass(static_cast<Index>(k)));
      mass_hi = std::max(mass_hi, g.mass(static_cast<Index>(k)));
      for (std::size_t i = 0; i < g.y.size(); ++i) {
        const double truth = normal_pdf(g.y[i], model.beta.dot(x) + model.delta * g.u[k], model.sigma_y);
        cond_err = std::max(cond_err, std::abs(g.values(static_cast<Index>(i), static_cast<Index>(k)) - truth));
      }
    }
    const auto m = deconv::potential_outcome_density(g, cfg);
    mass_lo = std::min(mass_lo, m.mass(0));
    mass_hi = std::max(mass_hi, m.mass(0));
    for (std::size_t i = 0; i < m.y.size(); ++i)
      marg_err = std::max(marg_err, std::abs(m.values(static_cast<Index>(i), 0) - normal_pdf(m.y[i], model.beta.dot(x), marginal_sd)));
  }
  const bool ok = cond_err < kDensityTolerance && marg_err < kDensityTolerance && mass_lo >= kMassLow && mass_hi <= kMassHigh;
  return {ok, "linear-Gaussian model, 3 treatment values: conditional sup error " + sci(cond_err) + ", marginal sup error " +
                  sci(marg_err) + " (tol " + fmt(kDensityTolerance, 2) + "), mass in [" + fmt(mass_lo, 4) + ", " +
                  fmt(mass_hi, 4) + "]"};
}

Outcome criterion_properties(const Context&) {
  doctest::Context dc;
  dc.setOption("test-suite", "properties");
  dc.setOption("no-intro", true);
  dc.setOption("no-version", true);
  dc.setOption("minimal", true);
  const int failed = dc.run();
  return {failed == 0, "property suite (rotation invariance, robust-fit breakdown and equivariance, bootstrap "
                       "determinism, module invariants): " +
                           std::string(failed == 0 ? "all passed" : "failures reported above")};
}

Outcome criterion_full_scale(const Context& ctx) {
  const auto start = std::chrono::steady_clock::now();
  const auto tables = sim::run_experiment(table_one_spec(1000, ctx.threads), [](const std::string& e, Index, int done, int total) {
    if (done % 100 == 0) std::cout << "    " << e << " " << done << "/" << total << std::endl;
  });
  print_tables(tables);
  int completed = 0;
  for (const auto& t : tables) completed += t.replications;
  const double secs = seconds_since(start);
  return {completed == 2000, "1000 reps of Aux1/Aux2 at n=2000 with B=200 completed (" + std::to_string(completed) +
                                 " cells) in " + fmt(secs / 60.0, 1) + " min on " + std::to_string(ctx.threads) + " thread(s)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  Context ctx;
  ctx.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_flag("--full-scale", ctx.full_scale, "run criterion 9 (1000 replications)");
  app.add_option("--threads", ctx.threads, "worker threads");
  CLI11_PARSE(app, argc, argv);

  const std::array<std::pair<const char*, std::function<Outcome(const Context&)>>, 9> criteria{{
      {"coverage, instrument setting", criterion_coverage_instruments},
      {"coverage, no-instrument setting", criterion_coverage_null},
      {"bias pattern", criterion_bias_pattern},
      {"exclusion violation pattern", criterion_violation_pattern},
      {"analytic OLS bias", criterion_ols_oracle},
      {"discrete oracle equivalence", criterion_discrete},
      {"deconvolution oracle", criterion_deconvolution},
      {"property suites", criterion_properties},
      {"full-scale run", criterion_full_scale},
  }};
  const std::set<int> selected(only.begin(), only.end());
  std::vector<std::string> lines;
  bool all = true;
  for (int k = 1; k <= 9; ++k) {
    if (!selected.empty() && !selected.count(k)) continue;
    const auto& [name, run] = criteria[static_cast<std::size_t>(k - 1)];
    std::ostringstream line;
    if (k == 9 && !ctx.full_scale) {
      line << "SKIP criterion 9 (" << name << "): opt-in, pass --full-scale";
    } else {
      std::cout << "== criterion " << k << ": " << name << std::endl;
      Outcome o;
      try {
        o = run(ctx);
      } catch (const std::exception& e) {
        o = {false, std::string("aborted: ") + e.what()};
      }
      all = all && o.pass;
      line << (o.pass ? "PASS" : "FAIL") << " criterion " << k << " (" << name << "): " << o.summary;
    }
    std::cout << line.str() << std::endl;
    lines.push_back(line.str());
  }
  std::cout << "\n== summary\n";
  for (const auto& l : lines) std::cout << l << "\n";
  return all ? 0 : 1;
}
