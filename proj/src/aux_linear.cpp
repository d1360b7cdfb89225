#include "multicause/aux_linear.hpp"

#include "multicause/errors.hpp"
#include "multicause/linmodel.hpp"

#include <set>
#include <sstream>

namespace multicause {

AuxEstimate combine_aux(const VectorXd& xi_x, const VectorXd& xi_z, const MatrixXd& eta, FactorFit factor) {
  const MatrixXd& gamma = factor.gamma;
  if (eta.rows() != gamma.rows() || eta.cols() != xi_z.size() || xi_x.size() != gamma.rows())
    throw InputError("combine_aux: dimension mismatch");
  const MatrixXd ge = gamma.transpose() * eta;  // q x r
  const MatrixXd gram = ge * ge.transpose();    // q x q
  AuxEstimate est;
  est.rank_rcond = inverse_condition(gram);
  est.rank_ok = est.rank_rcond > kAuxRankTolerance;
  if (!est.rank_ok) {
    std::ostringstream msg;
    msg << "gamma^T eta does not have full rank " << factor.q << " (reciprocal condition of gamma^T eta eta^T gamma "
        << est.rank_rcond << ")";
    throw IdentificationError(msg.str());
  }
  // xi_z = -eta^T gamma delta, solved in least squares.
  est.delta = -gram.ldlt().solve(ge * xi_z);
  est.beta = xi_x - gamma * est.delta;
  est.xi_x = xi_x;
  est.xi_z = xi_z;
  est.eta = eta;
  est.factor = std::move(factor);
  return est;
}

AuxEstimate estimate_aux_subset(const Dataset& raw, int q, const std::vector<Index>& iv_cols,
                                const FactorOptions& options) {
  if (!raw.has_z()) throw InputError("auxiliary-variables estimation needs instrument columns");
  const Index r = raw.r();
  const Index p = raw.p();
  const std::set<Index> chosen(iv_cols.begin(), iv_cols.end());
  if (chosen.size() != iv_cols.size()) throw InputError("instrument column list has duplicates");
  for (Index c : iv_cols)
    if (c < 0 || c >= r) throw InputError("instrument column index out of range");
  if (static_cast<Index>(iv_cols.size()) < q) {
    std::ostringstream msg;
    msg << "need at least q=" << q << " instrument columns in the correction, got " << iv_cols.size();
    throw InputError(msg.str());
  }
  if (raw.n() <= p + r) throw InputError("auxiliary-variables estimation needs n > p + r");

  const Dataset d = center(raw).first;
  // Aux-1: eta by regression of X on Z, factor analysis of the residuals.
  FactorFit factor = fit_factor(d.x(), q, d.z(), options);
  // Aux-2: regression of Y on (X, Z).
  MatrixXd xz(d.n(), p + r);
  xz << d.x(), d.z();
  const VectorXd xi = ols_coef(d.y(), xz);

  const auto k = static_cast<Index>(iv_cols.size());
  MatrixXd eta(p, k);
  VectorXd xi_z(k);
  for (Index j = 0; j < k; ++j) {
    eta.col(j) = factor.eta->col(iv_cols[j]);
    xi_z(j) = xi(p + iv_cols[j]);
  }
  // Aux-3
  return combine_aux(xi.head(p), xi_z, eta, std::move(factor));
}

AuxEstimate estimate_aux(const Dataset& d, int q, const FactorOptions& options) {
  std::vector<Index> all(static_cast<std::size_t>(d.r()));
  for (Index j = 0; j < d.r(); ++j) all[static_cast<std::size_t>(j)] = j;
  return estimate_aux_subset(d, q, all, options);
}

}  // namespace multicause
