#pragma once

#include "multicause/dataset.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace multicause::sim {

/// X = alpha U + eta Z + e_X, Y = beta^T X + lambda^T Z + delta_y^T U + e_Y,
/// W = delta_w U + e_W, with U ~ N(0, I_q) and independent normal noise.
struct DgpConfig {
  MatrixXd alpha;                  // p x q
  std::optional<MatrixXd> eta;     // p x r
  VectorXd beta;                   // p
  VectorXd delta_y;                // q
  std::optional<MatrixXd> delta_w; // s x q
  std::optional<VectorXd> lambda;  // r, direct instrument effect on Y
  double noise_x = 1.0;
  VectorXd noise_x_columns;        // per-treatment sd; overrides noise_x when non-empty
  double noise_y = 1.0;
  double noise_w = 1.0;
  // Z columns drawn as Binomial(2, 1/2) genotypes instead of N(0, 1).
  bool genotype_instruments = false;
  Index n = 1000;
  std::uint64_t seed = 1;

  Index p() const { return alpha.rows(); }
  Index q() const { return alpha.cols(); }
  Index r() const { return eta ? eta->cols() : 0; }
  /// Throws InputError on inconsistent dimensions or non-positive noise scales.
  void validate() const;
};

/// Six treatments, two confounders, six instruments and two outcome proxies.
DgpConfig aux_preset(bool exclusion_violated = false);
/// Eight treatments and two confounders; case 1 or case 2 effects.
DgpConfig null_preset(int which_case);
/// Single confounder and instrument, Gaussian linear (see deconv::example_model).
DgpConfig linear_gaussian_preset();
/// 17 treatments, 5 genotype instruments, 3 confounders, n = 227.
DgpConfig mouse_like_preset();

/// Looks up "aux", "aux-violation", "null-case1", "null-case2",
/// "linear-gaussian" or "mouse". Throws InputError otherwise.
DgpConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Draws a dataset with instruments (and proxies when delta_w is set).
Dataset gen_aux_setting(const DgpConfig& cfg);
/// Draws a dataset without instruments; eta and lambda must be unset.
Dataset gen_null_setting(const DgpConfig& cfg);
/// Dispatches on whether cfg has instruments.
Dataset generate(const DgpConfig& cfg);

/// Proximal two-stage least squares: W[outcome_proxies] instrumented by
/// Z[treat_proxies], with X and Z[covariates] exogenous. Returns the X block.
VectorXd proximal_2sls(const Dataset& d, const std::vector<Index>& treat_proxies,
                       const std::vector<Index>& outcome_proxies, const std::vector<Index>& covariates);

/// Known estimator labels: IV1, IV2, Aux1, Aux2, Aux3, PI1, PI2, OLS, Null1, Null2.
const std::vector<std::string>& estimator_labels();
/// Canonical label for a case-insensitive match; throws InputError when unknown.
std::string canonical_label(const std::string& label);
/// Whether the estimator needs instrument or proxy columns.
bool needs_instruments(const std::string& label);
bool needs_proxies(const std::string& label);
/// Runs the labelled estimator configuration and returns the p treatment effects.
VectorXd run_estimator(const std::string& label, const Dataset& d);

/// Seed for stream (a, b) derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

struct ExperimentSpec {
  std::string preset = "aux";
  std::vector<std::string> estimators;
  std::vector<Index> n;
  int replications = 200;
  int bootstrap_B = 0;  // 0 disables coverage
  std::uint64_t seed = 20240101;
  int threads = 1;

  void validate() const;
};

ExperimentSpec parse_experiment(const std::string& json_text);
std::string to_json(const ExperimentSpec& spec);

struct SummaryTable {
  std::string estimator;
  Index n = 0;
  VectorXd truth;
  VectorXd mean_bias;
  VectorXd mc_sd;
  std::optional<VectorXd> coverage;  // share of 95% intervals covering the truth
  int requested = 0;
  int replications = 0;              // successful point estimates
  int failures = 0;
  int coverage_replications = 0;     // replicates whose bootstrap succeeded
  MatrixXd estimates;                // successful replicates x p, replicate order
  std::vector<int> replicate_ids;
};

using Progress = std::function<void(const std::string& estimator, Index n, int done, int total)>;

/// Runs every (estimator, n) cell. Replicate b at sample size n uses the same
/// simulated dataset for every estimator. Failures are counted, not fatal.
std::vector<SummaryTable> run_experiment(const ExperimentSpec& spec, const Progress& progress = {});

std::string summary_json(const ExperimentSpec& spec, const std::vector<SummaryTable>& tables);
void write_summary_csv(std::ostream& out, const std::vector<SummaryTable>& tables);
void write_replicates_csv(std::ostream& out, const std::vector<SummaryTable>& tables);

}  // namespace multicause::sim
