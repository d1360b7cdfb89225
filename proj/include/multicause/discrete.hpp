#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace multicause::discrete {

using Eigen::Index;
using Eigen::Matrix2d;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

// Treatment configurations are indexed by x = sum_j X_j 2^j, j = 0..p-1.
// U and Z are binary; Y takes values 0..ny-1.

/// Per-z or per-u stack of ny x 2^p outcome tables.
using OutcomeTables = std::array<MatrixXd, 2>;

/// Generating components of a latent-class joint: U ~ Bernoulli(pi1),
/// X_j | U independent Bernoulli(success(u, j)), Z | U ~ z_given_u(., u),
/// Y | (U, X) ~ y_given_ux[u](., x).
struct LatentClassModel {
  double pi1 = 0.5;
  MatrixXd success;      // 2 x p
  Matrix2d z_given_u;    // (z, u)
  OutcomeTables y_given_ux;
};

/// Probability table over (Y, X_1..X_p, U, Z).
class DiscreteJoint {
 public:
  /// Validates non-negativity and unit mass (1e-12).
  DiscreteJoint(int p, int ny, std::vector<double> prob);
  static DiscreteJoint from_latent(const LatentClassModel& model);

  int p() const { return p_; }
  int ny() const { return ny_; }
  Index cells() const { return Index{1} << p_; }
  double at(int y, Index x, int u, int z) const { return prob_[index(y, x, u, z)]; }
  const std::vector<double>& data() const { return prob_; }

  VectorXd px() const;                 // f(x)
  MatrixXd pzx() const;                // 2 x cells, f(z, x)
  OutcomeTables py_given_xz() const;   // [z](y, x) = f(y | x, z)
  MatrixXd py_given_x() const;         // ny x cells
  VectorXd py() const;                 // f(y)
  MatrixXd pxu() const;                // cells x 2, f(x, u)

 private:
  std::size_t index(int y, Index x, int u, int z) const {
    return ((static_cast<std::size_t>(y) * static_cast<std::size_t>(cells()) + static_cast<std::size_t>(x)) * 2 +
            static_cast<std::size_t>(u)) * 2 + static_cast<std::size_t>(z);
  }
  int p_;
  int ny_;
  std::vector<double> prob_;
};

/// An admissible (x, u) distribution and the quantities solved from it.
struct AdmissibleFit {
  int p = 0;
  Vector2d weights;        // f~(u)
  MatrixXd success;        // 2 x p, P(X_j = 1 | U = u)
  MatrixXd x_u;            // cells x 2, f~(x, u)
  double discrepancy = 0;  // max |f(x) - sum_u f~(x, u)|
  bool degenerate = false;
  bool label_switched = false;
  std::optional<Matrix2d> z_given_u;          // (z, u)
  std::optional<OutcomeTables> y_given_ux;    // [u](y, x)
};

/// Swaps the two latent labels throughout the fit.
AdmissibleFit switch_labels(const AdmissibleFit& fit);

struct MixtureOptions {
  int restarts = 20;
  std::uint64_t seed = 0xd15c'0001ULL;
  int max_iterations = 2000;
  // Return degenerate fits (a vanishing class or fewer than three
  // discriminating treatments) instead of throwing.
  bool allow_degenerate = false;
};

/// Two-class latent-class fit of f(x) by multi-start bounded least squares.
/// Throws InputError for p < 3, IdentificationError for a misfit above 1e-6
/// or a degenerate solution (unless allowed).
AdmissibleFit fit_mixture(const VectorXd& px, int p, const MixtureOptions& options = {});

struct ProxySolution {
  Matrix2d z_given_u;  // (z, u), columns sum to one
  double residual = 0.0;
};

/// Solves f(z, x) = sum_u f~(z | u) f~(x, u) in least squares over x.
ProxySolution solve_proxy(const AdmissibleFit& fit, const MatrixXd& pzx);

/// Solves f(y | x, z) = sum_u f~(y | u, x) f~(u | x, z) for each (y, x).
/// Throws IdentificationError on a singular 2 x 2 kernel (completeness) or a
/// solution outside [0, 1] by more than 1e-6.
OutcomeTables solve_outcome(const AdmissibleFit& fit, const OutcomeTables& py_given_xz);

/// f{Y(x) = y} = sum_u f~(y | u, x) f~(u), as ny x cells.
MatrixXd g_formula(const AdmissibleFit& fit);

struct SharpNullResult {
  bool exists = true;
  double discrepancy = 0.0;
  std::vector<int> confounded;
};

/// Sharp-null check with singleton subvectors of the confounded treatments.
/// Throws InputError when no treatment is confounded and IdentificationError
/// when a kernel is singular.
SharpNullResult test_sharp_null_discrete(const AdmissibleFit& fit, const MatrixXd& py_given_x);

/// Runs fit_mixture, solve_proxy and solve_outcome on exact tables.
AdmissibleFit identify(const DiscreteJoint& joint, const MixtureOptions& options = {});

/// Nested arrays with axis order [y, x1..xp, u, z].
std::string to_json(const DiscreteJoint& joint);
DiscreteJoint joint_from_json(const std::string& text);

}  // namespace multicause::discrete
