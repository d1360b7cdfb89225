#include "multicause/bootstrap.hpp"

#include "multicause/errors.hpp"
#include "multicause/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>

namespace multicause {

std::vector<Index> resample_indices(Index n, std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32),
                    0xb007u};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) r = pick(rng);
  return rows;
}

double nearest_rank(std::vector<double> values, double level) {
  if (values.empty()) throw InputError("percentile of an empty sample");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

BootstrapResult bootstrap_ci(const Dataset& d, const Estimator& estimator, int B, std::uint64_t seed,
                             int threads) {
  if (B < 50) throw InputError("bootstrap needs B >= 50");
  BootstrapResult result;
  result.B = B;
  result.point = estimator(d);
  const Index p = result.point.size();

  std::vector<std::optional<VectorXd>> reps(static_cast<std::size_t>(B));
  parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
    const auto rows = resample_indices(d.n(), seed, static_cast<std::uint64_t>(b));
    try {
      VectorXd est = estimator(d.rows(rows));
      if (est.size() == p && est.allFinite()) reps[b] = std::move(est);
    } catch (const Error&) {
    }
  });

  std::vector<const VectorXd*> ok;
  for (const auto& r : reps) {
    if (r) ok.push_back(&*r);
    else ++result.failures;
  }
  if (result.failures > 0.2 * B) {
    std::ostringstream msg;
    msg << "bootstrap: " << result.failures << " of " << B << " replicates failed";
    throw ConvergenceError(msg.str());
  }
  result.draws.resize(static_cast<Index>(ok.size()), p);
  for (std::size_t i = 0; i < ok.size(); ++i) result.draws.row(static_cast<Index>(i)) = ok[i]->transpose();

  result.percentiles.resize(p, static_cast<Index>(kPercentileLevels.size()));
  for (Index j = 0; j < p; ++j) {
    std::vector<double> col(result.draws.col(j).data(), result.draws.col(j).data() + result.draws.rows());
    for (std::size_t k = 0; k < kPercentileLevels.size(); ++k)
      result.percentiles(j, static_cast<Index>(k)) = nearest_rank(col, kPercentileLevels[k]);
  }
  return result;
}

}  // namespace multicause
