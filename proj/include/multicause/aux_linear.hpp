#pragma once

#include "multicause/dataset.hpp"
#include "multicause/factor.hpp"

#include <vector>

namespace multicause {

/// Auxiliary-variables estimate of beta in the linear factor model with
/// instruments: X = alpha U + eta Z + e, E(Y | U, X, Z) = beta^T X + delta^T U.
struct AuxEstimate {
  VectorXd beta;
  VectorXd delta;   // depends on the rotation of gamma; diagnostic only
  VectorXd xi_x;    // coefficients of X in the regression of Y on (X, Z)
  VectorXd xi_z;    // coefficients of the instrument columns used in the correction
  MatrixXd eta;     // p x |iv| block of the X-on-Z coefficients used in the correction
  FactorFit factor;
  bool rank_ok = false;
  double rank_rcond = 0.0;  // reciprocal condition of gamma^T eta eta^T gamma
};

/// Reciprocal condition threshold for gamma^T eta eta^T gamma.
inline constexpr double kAuxRankTolerance = 1e-10;

/// Combines regression coefficients and a factor fit:
/// beta = xi_x + gamma (gamma^T eta eta^T gamma)^{-1} gamma^T eta xi_z.
/// Throws IdentificationError when gamma^T eta lacks full row rank q.
AuxEstimate combine_aux(const VectorXd& xi_x, const VectorXd& xi_z, const MatrixXd& eta, FactorFit factor);

/// Full pipeline with every instrument column in the correction.
AuxEstimate estimate_aux(const Dataset& d, int q, const FactorOptions& options = {});

/// Only `iv_cols` (0-based indices into z) enter the correction; the other
/// instrument columns act as covariates in both regressions.
AuxEstimate estimate_aux_subset(const Dataset& d, int q, const std::vector<Index>& iv_cols,
                                const FactorOptions& options = {});

}  // namespace multicause
