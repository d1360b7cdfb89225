#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace multicause {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LmsOptions {
  // h-th smallest squared residual is minimised; default floor((m + q + 1) / 2).
  std::optional<Index> quantile_index;
  // Enumerate all C(m, q) subsets when that count fits the budget, else sample this many.
  std::int64_t budget = 20000;
  std::uint64_t seed = 0x1a5'0001ULL;
};

/// Least quantile of squares fit over q-point elemental subsets.
struct LmsFit {
  VectorXd coef;
  double objective = 0.0;      // h-th order statistic of squared residuals at coef
  std::vector<Index> subset;   // elemental subset whose exact fit attains the optimum
  bool exhaustive = false;
  Index quantile_index = 0;
};

/// Throws InputError when m <= q and IdentificationError when every subset is singular.
LmsFit lms(const MatrixXd& design, const VectorXd& response, const LmsOptions& options = {});

/// The h-th smallest (1-based) squared residual of response - design * coef.
double order_statistic_of_squares(const MatrixXd& design, const VectorXd& response, const VectorXd& coef,
                                  Index h);

/// Number of q-subsets of m items, saturating at INT64_MAX.
std::int64_t binomial(Index m, Index q);

}  // namespace multicause
