#include "multicause/null_linear.hpp"

#include "multicause/bootstrap.hpp"
#include "multicause/errors.hpp"
#include "multicause/linmodel.hpp"
#include "multicause/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <sstream>

namespace multicause {

namespace {

MatrixXd take_rows(const MatrixXd& m, const std::vector<Index>& rows) {
  MatrixXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

VectorXd take(const VectorXd& v, const std::vector<Index>& rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

void require_enough_confounded(const std::vector<Index>& confounded, int q) {
  if (static_cast<Index>(confounded.size()) <= q) {
    std::ostringstream msg;
    msg << "null-treatments estimation needs more than q=" << q << " confounded treatments, found "
        << confounded.size();
    throw IdentificationError(msg.str());
  }
}

VectorXd residual_vector(const VectorXd& xi_c, const MatrixXd& gamma_c) {
  Eigen::HouseholderQR<MatrixXd> qr(gamma_c);
  return xi_c - gamma_c * qr.solve(xi_c);
}

}  // namespace

NullEstimate combine_null(const VectorXd& xi, FactorFit factor, Index n, const LmsOptions& lms_options) {
  const MatrixXd& gamma = factor.gamma;
  const int q = factor.q;
  if (xi.size() != gamma.rows()) throw InputError("combine_null: dimension mismatch");
  NullEstimate est;
  est.xi = xi;
  est.confounded = select_confounded(gamma, n);
  require_enough_confounded(est.confounded, q);

  const MatrixXd gamma_c = take_rows(gamma, est.confounded);
  const VectorXd xi_c = take(xi, est.confounded);
  const LmsFit robust = lms(gamma_c, xi_c, lms_options);
  est.delta_lms = robust.coef;
  est.lms_objective = robust.objective;
  est.beta_lms = xi - gamma * est.delta_lms;

  // Refinement: OLS of xi on gamma over the floor((|C|+q)/2) confounded
  // coordinates with the smallest |beta_lms|, ties to the smaller index.
  const auto count = static_cast<std::size_t>((est.confounded.size() + static_cast<std::size_t>(q)) / 2);
  std::vector<Index> order = est.confounded;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(est.beta_lms(a)) < std::abs(est.beta_lms(b));
  });
  order.resize(count);
  std::sort(order.begin(), order.end());
  est.null_set = order;

  const MatrixXd design = take_rows(gamma, est.null_set);
  const double rcond = inverse_condition(design);
  if (!(rcond > kRankTolerance)) {
    std::ostringstream msg;
    msg << "refinement design (gamma rows of the selected null treatments) is rank deficient, reciprocal condition "
        << rcond;
    throw IdentificationError(msg.str());
  }
  est.delta = Eigen::HouseholderQR<MatrixXd>(design).solve(take(xi, est.null_set));
  est.beta = xi - gamma * est.delta;
  est.factor = std::move(factor);
  return est;
}

NullEstimate estimate_null(const Dataset& raw, int q, const NullOptions& options) {
  if (raw.n() <= raw.p()) throw InputError("null-treatments estimation needs n > p");
  const Dataset d = center(raw).first;
  // Null-1
  FactorFit factor = fit_factor(d.x(), q, std::nullopt, options.factor);
  // Null-2
  const VectorXd xi = ols_coef(d.y(), d.x());
  return combine_null(xi, std::move(factor), d.n(), options.lms);
}

double projection_residual_norm(const VectorXd& xi_c, const MatrixXd& gamma_c) {
  return residual_vector(xi_c, gamma_c).norm();
}

SharpNullTest test_sharp_null_linear(const Dataset& raw, int q, int B, std::uint64_t seed,
                                     const NullOptions& options, int threads) {
  if (B < 1) throw InputError("sharp-null test needs B >= 1");
  if (raw.n() <= raw.p()) throw InputError("sharp-null test needs n > p");
  SharpNullTest test;
  test.B = B;
  auto residual_for = [&](const Dataset& sample, const std::vector<Index>* fixed) {
    const Dataset d = center(sample).first;
    const FactorFit factor = fit_factor(d.x(), q, std::nullopt, options.factor);
    const VectorXd xi = ols_coef(d.y(), d.x());
    std::vector<Index> conf = fixed ? *fixed : select_confounded(factor.gamma, d.n());
    require_enough_confounded(conf, q);
    return std::pair{residual_vector(take(xi, conf), take_rows(factor.gamma, conf)), conf};
  };

  auto [observed, confounded] = residual_for(raw, nullptr);
  test.confounded = confounded;
  test.statistic = observed.norm();

  std::vector<std::optional<double>> norms(static_cast<std::size_t>(B));
  parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
    const auto rows = resample_indices(raw.n(), seed, static_cast<std::uint64_t>(b));
    try {
      const auto [star, unused] = residual_for(raw.rows(rows), &confounded);
      (void)unused;
      norms[b] = (star - observed).norm();
    } catch (const Error&) {
    }
  });
  int exceed = 0;
  int ok = 0;
  for (const auto& v : norms) {
    if (!v) {
      ++test.failures;
      continue;
    }
    ++ok;
    if (*v >= test.statistic) ++exceed;
  }
  if (ok == 0 || test.failures > B / 5) {
    std::ostringstream msg;
    msg << "sharp-null bootstrap: " << test.failures << " of " << B << " replicates failed";
    throw ConvergenceError(msg.str());
  }
  test.p_value = static_cast<double>(exceed) / static_cast<double>(ok);
  return test;
}

}  // namespace multicause
