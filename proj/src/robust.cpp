#include "multicause/robust.hpp"

#include "multicause/errors.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

namespace multicause {

namespace {

// Minimum reciprocal condition for an elemental subset to count as non-degenerate.
constexpr double kSubsetRcond = 1e-12;

struct Candidate {
  double objective = std::numeric_limits<double>::infinity();
  VectorXd coef;
  std::vector<Index> subset;
};

bool next_combination(std::vector<Index>& c, Index m) {
  const auto q = static_cast<Index>(c.size());
  for (Index i = q - 1; i >= 0; --i) {
    if (c[i] < m - q + i) {
      ++c[i];
      for (Index j = i + 1; j < q; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

std::int64_t binomial(Index m, Index q) {
  if (q < 0 || q > m) return 0;
  q = std::min(q, m - q);
  long double acc = 1.0L;
  for (Index i = 1; i <= q; ++i) {
    acc = acc * static_cast<long double>(m - q + i) / static_cast<long double>(i);
    if (acc > static_cast<long double>(std::numeric_limits<std::int64_t>::max()))
      return std::numeric_limits<std::int64_t>::max();
  }
  return static_cast<std::int64_t>(acc + 0.5L);
}

double order_statistic_of_squares(const MatrixXd& design, const VectorXd& response, const VectorXd& coef,
                                  Index h) {
  VectorXd sq = (response - design * coef).cwiseAbs2();
  auto* begin = sq.data();
  std::nth_element(begin, begin + (h - 1), begin + sq.size());
  return sq(h - 1);
}

LmsFit lms(const MatrixXd& design, const VectorXd& response, const LmsOptions& options) {
  const Index m = design.rows();
  const Index q = design.cols();
  if (response.size() != m) throw InputError("lms: design and response differ in length");
  if (q < 1) throw InputError("lms: need at least one coefficient");
  if (m <= q) {
    std::ostringstream msg;
    msg << "lms: need more observations than coefficients (m=" << m << ", q=" << q << ")";
    throw InputError(msg.str());
  }
  const Index h = options.quantile_index.value_or((m + q + 1) / 2);
  if (h < 1 || h > m) throw InputError("lms: quantile index outside [1, m]");

  Candidate best;
  MatrixXd sub(q, q);
  VectorXd rhs(q);
  VectorXd sq(m);
  auto consider = [&](const std::vector<Index>& subset) {
    for (Index a = 0; a < q; ++a) {
      sub.row(a) = design.row(subset[a]);
      rhs(a) = response(subset[a]);
    }
    Eigen::FullPivLU<MatrixXd> lu(sub);
    // rcond alone misreports exactly singular matrices
    if (!lu.isInvertible() || !(lu.rcond() > kSubsetRcond)) return;
    const VectorXd coef = lu.solve(rhs);
    sq = (response - design * coef).cwiseAbs2();
    std::nth_element(sq.data(), sq.data() + (h - 1), sq.data() + m);
    const double obj = sq(h - 1);
    // Ties go to the lexicographically smaller subset.
    if (obj < best.objective || (obj == best.objective && subset < best.subset)) {
      best.objective = obj;
      best.coef = coef;
      best.subset = subset;
    }
  };

  const std::int64_t total = binomial(m, q);
  const bool exhaustive = total <= options.budget;
  std::vector<Index> subset(static_cast<std::size_t>(q));
  if (exhaustive) {
    for (Index i = 0; i < q; ++i) subset[static_cast<std::size_t>(i)] = i;
    do consider(subset);
    while (next_combination(subset, m));
  } else {
    std::mt19937_64 rng(options.seed);
    std::vector<Index> pool(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (std::int64_t draw = 0; draw < options.budget; ++draw) {
      // Partial Fisher-Yates gives a uniform q-subset.
      for (Index i = 0; i < q; ++i) {
        std::uniform_int_distribution<Index> pick(i, m - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
      }
      std::copy_n(pool.begin(), q, subset.begin());
      std::sort(subset.begin(), subset.end());
      consider(subset);
    }
  }
  if (best.subset.empty()) throw IdentificationError("lms: every elemental subset is singular");

  LmsFit fit;
  fit.coef = std::move(best.coef);
  fit.objective = best.objective;
  fit.subset = std::move(best.subset);
  fit.exhaustive = exhaustive;
  fit.quantile_index = h;
  return fit;
}

}  // namespace multicause
