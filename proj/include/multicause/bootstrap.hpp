#pragma once

#include "multicause/dataset.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace multicause {

using Estimator = std::function<VectorXd(const Dataset&)>;

/// Levels reported per coefficient, in this order.
inline constexpr std::array<double, 4> kPercentileLevels{0.025, 0.05, 0.95, 0.975};

struct BootstrapResult {
  VectorXd point;
  MatrixXd draws;        // successful replicates only, in replicate order
  MatrixXd percentiles;  // p x 4, columns follow kPercentileLevels
  int B = 0;
  int failures = 0;

  double lower95(Index j) const { return percentiles(j, 0); }
  double upper95(Index j) const { return percentiles(j, 3); }
  double lower90(Index j) const { return percentiles(j, 1); }
  double upper90(Index j) const { return percentiles(j, 2); }
};

/// Rows drawn with replacement for replicate b. The stream depends only on
/// (seed, b), so replicates can run in any order or on any thread.
std::vector<Index> resample_indices(Index n, std::uint64_t seed, std::uint64_t replicate);

/// Nearest-rank percentile: the ceil(level * N)-th smallest value.
double nearest_rank(std::vector<double> values, double level);

/// Pairs bootstrap with percentile intervals. Replicates that throw
/// multicause::Error are counted as failures and dropped; more than 0.2 B
/// failures raises ConvergenceError.
BootstrapResult bootstrap_ci(const Dataset& d, const Estimator& estimator, int B, std::uint64_t seed,
                             int threads = 1);

}  // namespace multicause
