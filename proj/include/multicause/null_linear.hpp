#pragma once

#include "multicause/dataset.hpp"
#include "multicause/factor.hpp"
#include "multicause/robust.hpp"

#include <cstdint>
#include <vector>

namespace multicause {

/// Null-treatments estimate of beta in X = alpha U + e, E(Y | X, U) = beta^T X + delta^T U.
struct NullEstimate {
  VectorXd beta;                  // refined estimate xi - gamma delta
  VectorXd beta_lms;              // xi - gamma delta_lms
  VectorXd delta;                 // refined delta (rotation dependent)
  VectorXd delta_lms;
  VectorXd xi;                    // coefficients of the regression of Y on X
  std::vector<Index> confounded;  // C^ = {i : ||gamma_i||^2 > log(n)/n}
  std::vector<Index> null_set;    // confounded rows used in the refinement fit
  double lms_objective = 0.0;
  FactorFit factor;
};

struct NullOptions {
  FactorOptions factor;
  LmsOptions lms;
};

/// Robust step and refinement given xi and a factor fit. Throws
/// IdentificationError when |C^| <= q or the refinement design is singular.
NullEstimate combine_null(const VectorXd& xi, FactorFit factor, Index n, const LmsOptions& lms_options = {});

NullEstimate estimate_null(const Dataset& d, int q, const NullOptions& options = {});

struct SharpNullTest {
  double statistic = 0.0;  // ||(I - P) xi_C||, P projecting onto span(gamma_C)
  double p_value = 1.0;
  int B = 0;
  int failures = 0;
  std::vector<Index> confounded;
};

/// Norm of the component of xi_C outside span(gamma_C).
double projection_residual_norm(const VectorXd& xi_c, const MatrixXd& gamma_c);

/// Linear test of beta = 0: the residual vector (I - P) xi_C is bootstrapped
/// (pairs bootstrap, C^ fixed from the full sample) and recentred at its point
/// estimate; p_value = share of recentred norms at least the observed norm.
SharpNullTest test_sharp_null_linear(const Dataset& d, int q, int B, std::uint64_t seed,
                                     const NullOptions& options = {}, int threads = 1);

}  // namespace multicause
