#pragma once

#include <Eigen/Dense>

#include <optional>

namespace multicause {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative singular-value threshold below which a design is rank deficient.
inline constexpr double kRankTolerance = 1e-10;

/// Multi-response least squares fit: responses ~= regressors * coef.
struct OlsFit {
  MatrixXd coef;         // regressors x responses
  MatrixXd residuals;    // n x responses
  MatrixXd xtx_inverse;  // (X^T X)^{-1}
};

/// Column-wise least squares by Householder QR. Throws InputError when
/// n <= m and IdentificationError when the regressors are rank deficient.
OlsFit ols(const MatrixXd& responses, const MatrixXd& regressors);

/// Single-response convenience wrapper returning the coefficient vector.
VectorXd ols_coef(const VectorXd& response, const MatrixXd& regressors);

/// Two-stage least squares. The first stage regresses the endogenous block on
/// [instruments, exogenous]; the second regresses y on [fitted endogenous,
/// exogenous]. Returns p + c coefficients in that order.
VectorXd tsls(const VectorXd& y, const MatrixXd& endogenous, const MatrixXd& instruments,
              const std::optional<MatrixXd>& exogenous = std::nullopt);

struct CovMatrix {
  MatrixXd matrix;
  Index n = 0;
};

/// Unbiased (divisor n - 1) sample covariance of the rows of m.
CovMatrix covariance(const MatrixXd& m);

/// Ratio of smallest to largest singular value; 0 for an empty or zero matrix.
double inverse_condition(const MatrixXd& m);

}  // namespace multicause
