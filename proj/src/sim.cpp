#include "multicause/sim.hpp"

#include "multicause/aux_linear.hpp"
#include "multicause/bootstrap.hpp"
#include "multicause/deconv.hpp"
#include "multicause/errors.hpp"
#include "multicause/linmodel.hpp"
#include "multicause/null_linear.hpp"
#include "multicause/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

namespace multicause::sim {

namespace {

using nlohmann::json;

MatrixXd normal_block(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  MatrixXd m(rows, cols);
  // Row-major fill so a row's draws stay together.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

MatrixXd genotype_block(std::mt19937_64& rng, Index rows, Index cols) {
  std::binomial_distribution<int> geno(2, 0.5);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = geno(rng);
  return m;
}

MatrixXd columns(const MatrixXd& m, const std::vector<Index>& cols) {
  MatrixXd out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0 || cols[j] >= m.cols()) throw InputError("column index out of range");
    out.col(static_cast<Index>(j)) = m.col(cols[j]);
  }
  return out;
}

std::vector<Index> range(Index from, Index to) {
  std::vector<Index> v;
  for (Index i = from; i < to; ++i) v.push_back(i);
  return v;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

Dataset assemble(const DgpConfig& cfg, bool with_instruments) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const Index n = cfg.n;
  const MatrixXd u = normal_block(rng, n, cfg.q());
  std::optional<MatrixXd> z;
  if (with_instruments)
    z = cfg.genotype_instruments ? genotype_block(rng, n, cfg.r()) : normal_block(rng, n, cfg.r());
  MatrixXd noise = normal_block(rng, n, cfg.p());
  if (cfg.noise_x_columns.size() > 0)
    noise = noise * cfg.noise_x_columns.asDiagonal();
  else
    noise *= cfg.noise_x;
  MatrixXd x = u * cfg.alpha.transpose() + noise;
  if (z) x += *z * cfg.eta->transpose();
  VectorXd y = x * cfg.beta + u * cfg.delta_y + normal_block(rng, n, 1, cfg.noise_y).col(0);
  if (cfg.lambda) y += *z * *cfg.lambda;
  std::optional<MatrixXd> w;
  if (cfg.delta_w) w = u * cfg.delta_w->transpose() + normal_block(rng, n, cfg.delta_w->rows(), cfg.noise_w);
  return Dataset(std::move(y), std::move(x), std::move(z), std::move(w));
}

struct Accumulator {
  std::vector<std::optional<VectorXd>> estimates;
  std::vector<std::optional<VectorXd>> covered;
};

}  // namespace

void DgpConfig::validate() const {
  const Index p = alpha.rows();
  const Index q = alpha.cols();
  if (p == 0 || q == 0) throw InputError("dgp: alpha must be a non-empty p x q matrix");
  if (beta.size() != p) throw InputError("dgp: beta must have length p");
  if (delta_y.size() != q) throw InputError("dgp: delta_y must have length q");
  if (eta && eta->rows() != p) throw InputError("dgp: eta must have p rows");
  if (lambda && (!eta || lambda->size() != eta->cols())) throw InputError("dgp: lambda must have length r");
  if (delta_w && delta_w->cols() != q) throw InputError("dgp: delta_w must have q columns");
  if (!(noise_x > 0 && noise_y > 0 && noise_w > 0)) throw InputError("dgp: noise scales must be positive");
  if (noise_x_columns.size() > 0 && (noise_x_columns.size() != p || (noise_x_columns.array() <= 0.0).any()))
    throw InputError("dgp: per-treatment noise scales must be p positive values");
  if (n < 2) throw InputError("dgp: n must be at least 2");
}

DgpConfig aux_preset(bool exclusion_violated) {
  DgpConfig cfg;
  cfg.alpha.resize(6, 2);
  cfg.alpha << 0, 0, 1, 0, 1.5, 1, 2, -2, 2.5, 1, 2, -1;
  MatrixXd eta = MatrixXd::Identity(6, 6);
  eta(1, 5) = 1;
  eta(5, 0) = 1;
  cfg.eta = eta;
  cfg.beta = VectorXd::Ones(6);
  cfg.delta_y = VectorXd::Ones(2);
  cfg.delta_w = 2.0 * MatrixXd::Identity(2, 2);
  if (exclusion_violated) {
    VectorXd lambda = VectorXd::Constant(6, 0.2);
    lambda(5) = 0.3;
    cfg.lambda = lambda;
  }
  return cfg;
}

DgpConfig null_preset(int which_case) {
  if (which_case != 1 && which_case != 2) throw InputError("null preset: case must be 1 or 2");
  DgpConfig cfg;
  MatrixXd at(2, 8);
  at << 0, 0.4, 0.8, 1.2, 1.5, -0.4, -0.8, -1.2,
        0, 0.2, 0.4, 0.6, 0.8, -0.5, -1.0, -1.2;
  cfg.alpha = at.transpose();
  cfg.beta = VectorXd::Zero(8);
  cfg.beta.head(3).setOnes();
  if (which_case == 2) cfg.beta(3) = cfg.beta(4) = 0.2;
  cfg.delta_y = VectorXd::Ones(2);
  return cfg;
}

DgpConfig linear_gaussian_preset() {
  const auto model = deconv::example_model();
  DgpConfig cfg;
  cfg.alpha = model.alpha;
  cfg.eta = MatrixXd(model.eta);
  cfg.beta = model.beta;
  cfg.delta_y = VectorXd::Constant(1, model.delta);
  cfg.noise_x = model.noise_x(0);
  cfg.noise_y = model.sigma_y;
  return cfg;
}

DgpConfig mouse_like_preset() {
  DgpConfig cfg;
  const Index p = 17, q = 3, r = 5;
  cfg.alpha.resize(p, q);
  for (Index i = 0; i < p; ++i)
    for (Index k = 0; k < q; ++k) cfg.alpha(i, k) = 0.6 * std::sin(1.3 * double(i + 1) * double(k + 1) + 0.4 * double(k));
  MatrixXd eta = MatrixXd::Zero(p, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = j; i < 15; i += r) eta(i, j) = 0.6;
  cfg.eta = eta;
  cfg.beta = VectorXd::Zero(p);
  cfg.beta(2) = 1.0;
  cfg.beta(7) = -1.0;
  cfg.beta(11) = 1.5;
  cfg.delta_y = (VectorXd(3) << 1.0, 0.5, -0.5).finished();
  // A few precisely measured treatments, so some rows of gamma clear the selection cut.
  cfg.noise_x_columns = VectorXd::Ones(p);
  cfg.noise_x_columns.head(6).setConstant(0.5);
  cfg.genotype_instruments = true;
  cfg.n = 227;
  return cfg;
}

std::vector<std::string> preset_names() {
  return {"aux", "aux-violation", "null-case1", "null-case2", "linear-gaussian", "mouse"};
}

DgpConfig preset(const std::string& name) {
  const std::string key = lower(name);
  if (key == "aux") return aux_preset(false);
  if (key == "aux-violation") return aux_preset(true);
  if (key == "null-case1") return null_preset(1);
  if (key == "null-case2") return null_preset(2);
  if (key == "linear-gaussian") return linear_gaussian_preset();
  if (key == "mouse") return mouse_like_preset();
  throw InputError("unknown preset '" + name + "'");
}

Dataset gen_aux_setting(const DgpConfig& cfg) {
  if (!cfg.eta) throw InputError("gen_aux_setting: eta is required");
  return assemble(cfg, true);
}

Dataset gen_null_setting(const DgpConfig& cfg) {
  if (cfg.eta || cfg.lambda) throw InputError("gen_null_setting: instruments are not part of this setting");
  return assemble(cfg, false);
}

Dataset generate(const DgpConfig& cfg) { return cfg.eta ? gen_aux_setting(cfg) : gen_null_setting(cfg); }

VectorXd proximal_2sls(const Dataset& raw, const std::vector<Index>& treat_proxies,
                       const std::vector<Index>& outcome_proxies, const std::vector<Index>& covariates) {
  if (!raw.has_z() || !raw.has_w()) throw InputError("proximal estimation needs instrument and proxy columns");
  if (treat_proxies.size() < outcome_proxies.size())
    throw IdentificationError("proximal estimation needs at least as many treatment proxies as outcome proxies");
  const Dataset d = center(raw).first;
  const MatrixXd cov = columns(d.z(), covariates);
  MatrixXd exog(d.n(), d.p() + cov.cols());
  exog << d.x(), cov;
  const VectorXd coef = tsls(d.y(), columns(d.w(), outcome_proxies), columns(d.z(), treat_proxies), exog);
  return coef.segment(static_cast<Index>(outcome_proxies.size()), d.p());
}

const std::vector<std::string>& estimator_labels() {
  static const std::vector<std::string> labels{"IV1", "IV2", "Aux1", "Aux2", "Aux3",
                                               "PI1", "PI2", "OLS", "Null1", "Null2"};
  return labels;
}

std::string canonical_label(const std::string& label) {
  for (const auto& known : estimator_labels())
    if (lower(known) == lower(label)) return known;
  throw InputError("unknown estimator label '" + label + "'");
}

bool needs_instruments(const std::string& label) {
  const std::string l = canonical_label(label);
  return l != "OLS" && l != "Null1" && l != "Null2";
}

bool needs_proxies(const std::string& label) {
  const std::string l = canonical_label(label);
  return l == "PI1" || l == "PI2";
}

VectorXd run_estimator(const std::string& label, const Dataset& raw) {
  const std::string l = canonical_label(label);
  if (needs_instruments(l) && !raw.has_z()) throw InputError(l + " needs instrument columns");
  const Index p = raw.p();
  if (l == "Aux1") return estimate_aux(raw, 2).beta;
  if (l == "Aux2") return estimate_aux_subset(raw, 2, {4, 5}).beta;
  if (l == "Aux3") return estimate_aux_subset(raw, 1, {5}).beta;
  if (l == "Null1") return estimate_null(raw, 2).beta;
  if (l == "Null2") return estimate_null(raw, 1).beta;
  if (l == "PI1") return proximal_2sls(raw, {4, 5}, {0, 1}, {0, 1, 2, 3});
  if (l == "PI2") return proximal_2sls(raw, {5}, {0}, {0, 1, 2, 3, 4});

  const Dataset d = center(raw).first;
  if (l == "OLS") {
    if (!d.has_z()) return ols_coef(d.y(), d.x());
    MatrixXd xz(d.n(), p + d.r());
    xz << d.x(), d.z();
    return ols_coef(d.y(), xz).head(p);
  }
  if (l == "IV1") return tsls(d.y(), d.x(), d.z());
  // IV2: the last treatment and instrument enter as exogenous covariates.
  if (p < 2 || d.r() < 2) throw InputError("IV2 needs at least two treatments and instruments");
  const auto head_x = range(0, p - 1);
  const auto head_z = range(0, d.r() - 1);
  MatrixXd exog(d.n(), 2);
  exog << d.x().col(p - 1), d.z().col(d.r() - 1);
  const VectorXd coef = tsls(d.y(), columns(d.x(), head_x), columns(d.z(), head_z), exog);
  return coef.head(p);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(a),      static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),      static_cast<std::uint32_t>(b >> 32),
                    0x5133u};
  std::mt19937_64 gen(seq);
  return gen();
}

void ExperimentSpec::validate() const {
  const DgpConfig cfg = sim::preset(this->preset);
  if (estimators.empty()) throw InputError("experiment: no estimators listed");
  for (const auto& e : estimators) {
    if (needs_instruments(e) && !cfg.eta) throw InputError("experiment: " + e + " needs a preset with instruments");
    if (needs_proxies(e) && !cfg.delta_w) throw InputError("experiment: " + e + " needs a preset with proxies");
  }
  if (n.empty()) throw InputError("experiment: no sample sizes listed");
  for (Index v : n)
    if (v < 10) throw InputError("experiment: sample sizes must be at least 10");
  if (replications < 1) throw InputError("experiment: replications must be positive");
  if (bootstrap_B != 0 && bootstrap_B < 50) throw InputError("experiment: bootstrap_B must be 0 or at least 50");
  if (threads < 1) throw InputError("experiment: threads must be positive");
}

ExperimentSpec parse_experiment(const std::string& text) {
  ExperimentSpec spec;
  try {
    const json j = json::parse(text);
    spec.preset = j.at("preset").get<std::string>();
    for (const auto& e : j.at("estimators")) spec.estimators.push_back(canonical_label(e.get<std::string>()));
    const json& ns = j.at("n");
    if (ns.is_array())
      for (const auto& v : ns) spec.n.push_back(v.get<Index>());
    else
      spec.n.push_back(ns.get<Index>());
    spec.replications = j.value("replications", spec.replications);
    spec.bootstrap_B = j.value("bootstrap_B", spec.bootstrap_B);
    spec.seed = j.value("seed", spec.seed);
    spec.threads = j.value("threads", spec.threads);
  } catch (const json::exception& e) {
    throw InputError(std::string("experiment spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string to_json(const ExperimentSpec& spec) {
  json j{{"preset", spec.preset},         {"estimators", spec.estimators},   {"n", spec.n},
         {"replications", spec.replications}, {"bootstrap_B", spec.bootstrap_B}, {"seed", spec.seed},
         {"threads", spec.threads}};
  return j.dump(2);
}

std::vector<SummaryTable> run_experiment(const ExperimentSpec& spec, const Progress& progress) {
  spec.validate();
  const DgpConfig base = preset(spec.preset);
  const std::size_t ne = spec.estimators.size();
  const std::size_t reps = static_cast<std::size_t>(spec.replications);
  std::vector<SummaryTable> tables;

  for (std::size_t in = 0; in < spec.n.size(); ++in) {
    const Index n = spec.n[in];
    std::vector<Accumulator> acc(ne);
    for (auto& a : acc) {
      a.estimates.resize(reps);
      a.covered.resize(reps);
    }
    std::mutex progress_mutex;
    int done = 0;
    parallel_for(reps, spec.threads, [&](std::size_t b) {
      DgpConfig cfg = base;
      cfg.n = n;
      cfg.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(n), b);
      const Dataset d = generate(cfg);
      for (std::size_t e = 0; e < ne; ++e) {
        const std::string& label = spec.estimators[e];
        try {
          acc[e].estimates[b] = run_estimator(label, d);
        } catch (const Error&) {
          continue;
        }
        if (spec.bootstrap_B == 0) continue;
        try {
          const std::uint64_t bseed = derive_seed(cfg.seed, 0xb0075ULL, e);
          const BootstrapResult boot =
              bootstrap_ci(d, [&label](const Dataset& s) { return run_estimator(label, s); }, spec.bootstrap_B, bseed);
          VectorXd hit(base.p());
          for (Index j = 0; j < base.p(); ++j)
            hit(j) = (boot.lower95(j) <= base.beta(j) && base.beta(j) <= boot.upper95(j)) ? 1.0 : 0.0;
          acc[e].covered[b] = hit;
        } catch (const Error&) {
        }
      }
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress("all", n, ++done, static_cast<int>(reps));
      }
    });

    for (std::size_t e = 0; e < ne; ++e) {
      SummaryTable t;
      t.estimator = spec.estimators[e];
      t.n = n;
      t.truth = base.beta;
      t.requested = spec.replications;
      for (std::size_t b = 0; b < reps; ++b)
        if (acc[e].estimates[b]) t.replicate_ids.push_back(static_cast<int>(b));
      t.replications = static_cast<int>(t.replicate_ids.size());
      t.failures = t.requested - t.replications;
      const Index p = base.p();
      t.estimates.resize(t.replications, p);
      for (int i = 0; i < t.replications; ++i)
        t.estimates.row(i) = acc[e].estimates[static_cast<std::size_t>(t.replicate_ids[static_cast<std::size_t>(i)])]->transpose();
      if (t.replications > 0) {
        const VectorXd mean = t.estimates.colwise().mean().transpose();
        t.mean_bias = mean - base.beta;
        t.mc_sd = VectorXd::Zero(p);
        if (t.replications > 1)
          t.mc_sd = ((t.estimates.rowwise() - mean.transpose()).colwise().squaredNorm() /
                     static_cast<double>(t.replications - 1))
                        .cwiseSqrt()
                        .transpose();
      } else {
        t.mean_bias = VectorXd::Constant(p, std::nan(""));
        t.mc_sd = VectorXd::Constant(p, std::nan(""));
      }
      if (spec.bootstrap_B > 0) {
        VectorXd hits = VectorXd::Zero(p);
        for (std::size_t b = 0; b < reps; ++b)
          if (acc[e].estimates[b] && acc[e].covered[b]) {
            hits += *acc[e].covered[b];
            ++t.coverage_replications;
          }
        t.coverage = t.coverage_replications > 0 ? VectorXd(hits / t.coverage_replications)
                                                 : VectorXd::Constant(p, std::nan(""));
      }
      tables.push_back(std::move(t));
    }
  }
  return tables;
}

std::string summary_json(const ExperimentSpec& spec, const std::vector<SummaryTable>& tables) {
  auto vec = [](const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json out;
  out["config"] = json::parse(to_json(spec));
  out["tables"] = json::array();
  for (const auto& t : tables) {
    json j{{"estimator", t.estimator},
           {"n", t.n},
           {"truth", vec(t.truth)},
           {"mean_bias", vec(t.mean_bias)},
           {"mc_sd", vec(t.mc_sd)},
           {"requested", t.requested},
           {"replications", t.replications},
           {"failures", t.failures}};
    if (t.coverage) {
      j["coverage"] = vec(*t.coverage);
      j["coverage_replications"] = t.coverage_replications;
    }
    out["tables"].push_back(std::move(j));
  }
  return out.dump(2);
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryTable>& tables) {
  out << "estimator,n,coefficient,truth,mean_bias,mc_sd,coverage,replications,failures\n";
  for (const auto& t : tables)
    for (Index j = 0; j < t.truth.size(); ++j) {
      out << t.estimator << ',' << t.n << ",beta" << (j + 1) << ',' << t.truth(j) << ',' << t.mean_bias(j) << ','
          << t.mc_sd(j) << ',';
      if (t.coverage) out << (*t.coverage)(j);
      out << ',' << t.replications << ',' << t.failures << '\n';
    }
}

void write_replicates_csv(std::ostream& out, const std::vector<SummaryTable>& tables) {
  const Index p = tables.empty() ? 0 : tables.front().truth.size();
  out << "estimator,n,replicate";
  for (Index j = 0; j < p; ++j) out << ",beta" << (j + 1);
  out << '\n';
  const auto old = out.precision(10);
  for (const auto& t : tables)
    for (Index i = 0; i < t.estimates.rows(); ++i) {
      out << t.estimator << ',' << t.n << ',' << t.replicate_ids[static_cast<std::size_t>(i)];
      for (Index j = 0; j < t.estimates.cols(); ++j) out << ',' << t.estimates(i, j);
      out << '\n';
    }
  out.precision(old);
}

}  // namespace multicause::sim
