#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace multicause {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct FactorOptions {
  int max_iterations = 500;
  // Stop when the discrepancy changes by less than this between iterations.
  double tolerance = 1e-8;
  int restarts = 5;
  // Lower bound for uniquenesses, as a fraction of the column variance.
  double psi_floor = 0.005;
  std::uint64_t seed = 0x5eed'fac7ULL;
};

/// Maximum-likelihood factor model fit of a p-variate covariance:
/// Sigma = loadings * loadings^T + diag(uniquenesses).
struct FactorFit {
  MatrixXd loadings;             // p x q, identified up to orthogonal rotation
  VectorXd uniquenesses;         // p
  MatrixXd gamma;                // p x q, fitted_covariance()^{-1} * loadings
  std::optional<MatrixXd> eta;   // p x r, set when controls were regressed out
  int q = 0;
  Index n = 0;
  double loglik = 0.0;
  double objective = 0.0;        // ML discrepancy log|S^| + tr(S^{-1} S) - log|S| - p
  bool converged = false;
  int iterations = 0;
  std::vector<bool> heywood;     // uniqueness clipped at the floor
  std::vector<std::string> warnings;

  MatrixXd fitted_covariance() const;
};

/// Fits q factors to the columns of `data`. When `controls` is given, the
/// columns are first regressed on it (eta) and the residuals are analysed.
/// Throws InputError for q < 1, q >= p or n <= p, and ConvergenceError when
/// no restart converges.
FactorFit fit_factor(const MatrixXd& data, int q, const std::optional<MatrixXd>& controls = std::nullopt,
                     const FactorOptions& options = {});

/// Same fit from a covariance matrix; n only feeds the log-likelihood.
FactorFit fit_factor_covariance(const MatrixXd& cov, int q, Index n, const FactorOptions& options = {});

/// Applies an orthogonal q x q rotation to loadings and gamma.
FactorFit rotate(const FactorFit& fit, const MatrixXd& rotation);

struct SufficiencyTest {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

/// Bartlett-corrected likelihood-ratio test that q factors suffice.
SufficiencyTest sufficiency_test(const FactorFit& fit, Index n);

/// Indices i with ||gamma_i||^2 > log(n)/n (strict).
std::vector<Index> select_confounded(const MatrixXd& gamma, Index n);

}  // namespace multicause
