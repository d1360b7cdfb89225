#include "multicause/linmodel.hpp"

#include "multicause/errors.hpp"

#include <sstream>

namespace multicause {

double inverse_condition(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

OlsFit ols(const MatrixXd& responses, const MatrixXd& regressors) {
  const Index n = regressors.rows();
  const Index m = regressors.cols();
  if (responses.rows() != n) throw InputError("ols: responses and regressors differ in row count");
  if (m < 1) throw InputError("ols: no regressors");
  if (n <= m) {
    std::ostringstream msg;
    msg << "ols: need more rows than regressors (n=" << n << ", m=" << m << ")";
    throw InputError(msg.str());
  }
  Eigen::HouseholderQR<MatrixXd> qr(regressors);
  const MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  const double rcond = inverse_condition(r);
  if (!(rcond > kRankTolerance)) {
    std::ostringstream msg;
    msg << "ols: regressors are rank deficient (reciprocal condition " << rcond << ")";
    throw IdentificationError(msg.str());
  }
  OlsFit fit;
  fit.coef = qr.solve(responses);
  fit.residuals = responses - regressors * fit.coef;
  const MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(m, m));
  fit.xtx_inverse = r_inv * r_inv.transpose();
  return fit;
}

VectorXd ols_coef(const VectorXd& response, const MatrixXd& regressors) {
  return ols(response, regressors).coef.col(0);
}

VectorXd tsls(const VectorXd& y, const MatrixXd& endogenous, const MatrixXd& instruments,
              const std::optional<MatrixXd>& exogenous) {
  const Index n = y.size();
  const Index p = endogenous.cols();
  const Index c = exogenous ? exogenous->cols() : 0;
  if (endogenous.rows() != n || instruments.rows() != n || (exogenous && exogenous->rows() != n))
    throw InputError("tsls: blocks differ in row count");
  if (p == 0) {
    if (c == 0) throw InputError("tsls: no regressors");
    return ols_coef(y, *exogenous);
  }
  if (instruments.cols() < p) {
    std::ostringstream msg;
    msg << "tsls: under-identified, " << instruments.cols() << " instruments for " << p
        << " endogenous regressors";
    throw IdentificationError(msg.str());
  }
  MatrixXd first(n, instruments.cols() + c);
  first << instruments, (c ? *exogenous : MatrixXd(n, 0));
  const MatrixXd fitted = endogenous - ols(endogenous, first).residuals;
  MatrixXd second(n, p + c);
  second << fitted, (c ? *exogenous : MatrixXd(n, 0));
  return ols_coef(y, second);
}

CovMatrix covariance(const MatrixXd& m) {
  const Index n = m.rows();
  if (n < 2) throw InputError("covariance: need at least two rows");
  const MatrixXd centered = m.rowwise() - m.colwise().mean();
  MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose());
  return {std::move(cov), n};
}

}  // namespace multicause
