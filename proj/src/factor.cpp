#include "multicause/factor.hpp"

#include "multicause/errors.hpp"
#include "multicause/linmodel.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace multicause {

namespace {

// Profile of the ML discrepancy at fixed uniquenesses, on the correlation scale.
struct Profile {
  double objective = 0.0;
  MatrixXd loadings;
  VectorXd gradient;
};

class ProfileLikelihood {
 public:
  ProfileLikelihood(const MatrixXd& corr, int q) : corr_(corr), q_(q), solver_(corr.rows()) {}

  Profile evaluate(const VectorXd& psi) {
    const Index p = corr_.rows();
    const VectorXd scale = psi.cwiseSqrt().cwiseInverse();
    const MatrixXd scaled = scale.asDiagonal() * corr_ * scale.asDiagonal();
    solver_.compute(scaled);
    // Eigen returns ascending eigenvalues; the top q sit at the end.
    const VectorXd& e = solver_.eigenvalues();
    Profile out;
    out.loadings.resize(p, q_);
    double f = 0.0;
    for (Index j = 0; j < p; ++j) {
      const double ej = std::max(e(j), 1e-300);
      const bool factor_slot = j >= p - q_;
      if (!factor_slot || ej < 1.0) f += ej - std::log(ej) - 1.0;
    }
    for (int k = 0; k < q_; ++k) {
      const Index j = p - 1 - k;
      const double weight = std::sqrt(std::max(e(j) - 1.0, 0.0));
      out.loadings.col(k) = psi.cwiseSqrt().asDiagonal() * solver_.eigenvectors().col(j) * weight;
    }
    out.objective = f;
    const VectorXd common = out.loadings.rowwise().squaredNorm();
    out.gradient = (common + psi - corr_.diagonal()).cwiseQuotient(psi.cwiseAbs2());
    return out;
  }

 private:
  const MatrixXd& corr_;
  int q_;
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver_;
};

struct RunResult {
  VectorXd psi;
  Profile profile;
  bool converged = false;
  int iterations = 0;
  double projected_gradient = 0.0;
};

double projected_gradient_norm(const VectorXd& psi, const VectorXd& g, double lo, double hi) {
  double worst = 0.0;
  for (Index i = 0; i < psi.size(); ++i) {
    if (psi(i) <= lo && g(i) > 0.0) continue;
    if (psi(i) >= hi && g(i) < 0.0) continue;
    worst = std::max(worst, std::abs(g(i)));
  }
  return worst;
}

// Lawley-Maxwell fixed point psi <- diag(C - L L^T), accelerated by projected
// Newton steps on the free coordinates (finite-difference Hessian of the
// analytic gradient). Every accepted step decreases the discrepancy.
RunResult optimise(ProfileLikelihood& lik, const MatrixXd& corr, VectorXd psi, double lo,
                   const FactorOptions& options) {
  const double hi = 1.0;
  const Index p = psi.size();
  auto clip = [&](VectorXd v) { return v.cwiseMax(lo).cwiseMin(hi).eval(); };
  psi = clip(psi);
  Profile cur = lik.evaluate(psi);
  RunResult run;
  for (int it = 1; it <= options.max_iterations; ++it) {
    run.iterations = it;
    std::vector<Index> free;
    for (Index i = 0; i < p; ++i) {
      const bool pinned_low = psi(i) <= lo && cur.gradient(i) > 0.0;
      const bool pinned_high = psi(i) >= hi && cur.gradient(i) < 0.0;
      if (!pinned_low && !pinned_high) free.push_back(i);
    }

    VectorXd candidate;
    Profile next;
    bool accepted = false;
    if (!free.empty()) {
      const auto m = static_cast<Index>(free.size());
      MatrixXd hess(m, m);
      for (Index a = 0; a < m; ++a) {
        const Index i = free[a];
        const double h = 1e-6 * std::max(psi(i), 1e-3);
        VectorXd up = psi, down = psi;
        up(i) += h;
        down(i) -= h;
        const VectorXd dg = (lik.evaluate(up).gradient - lik.evaluate(down).gradient) / (2.0 * h);
        for (Index b = 0; b < m; ++b) hess(b, a) = dg(free[b]);
      }
      hess = 0.5 * (hess + hess.transpose()).eval();
      VectorXd g_free(m);
      for (Index a = 0; a < m; ++a) g_free(a) = cur.gradient(free[a]);
      // Saddle-free Newton: flip negative curvature so the step always descends.
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(hess);
      const double base = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-8);
      const VectorXd curvature = eig.eigenvalues().cwiseAbs().cwiseMax(1e-8 * base);
      const VectorXd step =
          -eig.eigenvectors() * (eig.eigenvectors().transpose() * g_free).cwiseQuotient(curvature);
      double t = 1.0;
      for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
        candidate = psi;
        for (Index a = 0; a < m; ++a) candidate(free[a]) += t * step(a);
        candidate = clip(candidate);
        next = lik.evaluate(candidate);
        if (next.objective < cur.objective) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      const VectorXd target = clip(corr.diagonal() - cur.loadings.rowwise().squaredNorm());
      double t = 1.0;
      for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
        candidate = clip(psi + t * (target - psi));
        next = lik.evaluate(candidate);
        if (next.objective < cur.objective) {
          accepted = true;
          break;
        }
      }
    }

    run.projected_gradient = projected_gradient_norm(psi, cur.gradient, lo, hi);
    if (!accepted) {
      // No descent direction left: stationary up to rounding.
      run.converged = run.projected_gradient < 1e-4;
      break;
    }
    const double change = cur.objective - next.objective;
    psi = candidate;
    cur = std::move(next);
    run.projected_gradient = projected_gradient_norm(psi, cur.gradient, lo, hi);
    if (change < options.tolerance && run.projected_gradient < 1e-5) {
      run.converged = true;
      break;
    }
  }
  run.psi = psi;
  run.profile = std::move(cur);
  return run;
}

}  // namespace

MatrixXd FactorFit::fitted_covariance() const {
  MatrixXd sigma = loadings * loadings.transpose();
  sigma.diagonal() += uniquenesses;
  return sigma;
}

FactorFit fit_factor_covariance(const MatrixXd& cov, int q, Index n, const FactorOptions& options) {
  const Index p = cov.rows();
  if (cov.cols() != p) throw InputError("factor analysis: covariance must be square");
  if (q < 1) throw InputError("factor analysis: need q >= 1");
  if (q >= p) {
    std::ostringstream msg;
    msg << "factor analysis: q=" << q << " factors for p=" << p << " variables";
    throw InputError(msg.str());
  }
  if (!cov.allFinite()) throw InputError("factor analysis: non-finite covariance");
  const VectorXd var = cov.diagonal();
  if ((var.array() <= 0.0).any()) throw InputError("factor analysis: a column has zero variance");

  FactorFit fit;
  fit.q = q;
  fit.n = n;
  if (p < 2 * q + 1) {
    std::ostringstream msg;
    msg << "p=" << p << " is below 2q+1=" << 2 * q + 1 << "; loadings may not be identified";
    fit.warnings.push_back(msg.str());
  }

  const VectorXd sd = var.cwiseSqrt();
  const MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  const double lo = options.psi_floor;

  VectorXd default_start = VectorXd::Constant(p, 0.5);
  {
    Eigen::LDLT<MatrixXd> ldlt(corr);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const VectorXd inv_diag = ldlt.solve(MatrixXd::Identity(p, p)).diagonal();
      if (inv_diag.allFinite() && (inv_diag.array() > 0.0).all())
        default_start = (1.0 - 0.5 * q / static_cast<double>(p)) * inv_diag.cwiseInverse();
    }
  }

  ProfileLikelihood lik(corr, q);
  RunResult best;
  bool have_best = false;
  int total_iterations = 0;
  const int restarts = std::max(options.restarts, 1);
  for (int k = 0; k < restarts; ++k) {
    VectorXd start = default_start;
    if (k > 0) {
      std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(k));
      std::uniform_real_distribution<double> unif(0.1, 0.9);
      for (Index i = 0; i < p; ++i) start(i) = unif(rng);
    }
    RunResult run = optimise(lik, corr, start, lo, options);
    total_iterations += run.iterations;
    const bool better = !have_best || (run.converged && !best.converged) ||
                        (run.converged == best.converged && run.profile.objective < best.profile.objective);
    if (better) {
      best = std::move(run);
      have_best = true;
    }
  }
  if (!best.converged) {
    std::ostringstream msg;
    msg << "factor analysis with q=" << q << " did not converge after " << options.max_iterations
        << " iterations per start (" << restarts << " starts); best discrepancy " << best.profile.objective
        << ", projected gradient " << best.projected_gradient
        << ". If q exceeds the number of confounders the fit can fail";
    throw ConvergenceError(msg.str());
  }

  fit.converged = true;
  fit.iterations = total_iterations;
  fit.objective = best.profile.objective;
  fit.loadings = sd.asDiagonal() * best.profile.loadings;
  for (int k = 0; k < q; ++k) {
    Index arg = 0;
    fit.loadings.col(k).cwiseAbs().maxCoeff(&arg);
    if (fit.loadings(arg, k) < 0.0) fit.loadings.col(k) *= -1.0;
  }
  fit.uniquenesses = best.psi.cwiseProduct(var);
  fit.heywood.resize(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) fit.heywood[static_cast<std::size_t>(i)] = best.psi(i) <= lo * (1.0 + 1e-9);

  const MatrixXd sigma = fit.fitted_covariance();
  Eigen::LDLT<MatrixXd> ldlt(sigma);
  fit.gamma = ldlt.solve(fit.loadings);
  const double logdet = ldlt.vectorD().array().log().sum();
  const double trace = ldlt.solve(cov).trace();
  fit.loglik = -0.5 * static_cast<double>(n) *
               (logdet + trace + static_cast<double>(p) * std::log(2.0 * std::numbers::pi));
  return fit;
}

FactorFit fit_factor(const MatrixXd& data, int q, const std::optional<MatrixXd>& controls,
                     const FactorOptions& options) {
  const Index n = data.rows();
  const Index p = data.cols();
  if (n <= p) {
    std::ostringstream msg;
    msg << "factor analysis: need n > p (n=" << n << ", p=" << p << ")";
    throw InputError(msg.str());
  }
  if (q >= p) {
    std::ostringstream msg;
    msg << "factor analysis: q=" << q << " factors for p=" << p << " variables";
    throw InputError(msg.str());
  }
  if (controls) {
    const OlsFit first = ols(data, *controls);
    FactorFit fit = fit_factor_covariance(covariance(first.residuals).matrix, q, n, options);
    fit.eta = first.coef.transpose();
    return fit;
  }
  return fit_factor_covariance(covariance(data).matrix, q, n, options);
}

FactorFit rotate(const FactorFit& fit, const MatrixXd& rotation) {
  if (rotation.rows() != fit.q || rotation.cols() != fit.q)
    throw InputError("rotate: rotation must be q x q");
  FactorFit out = fit;
  out.loadings = fit.loadings * rotation;
  out.gamma = fit.gamma * rotation;
  return out;
}

SufficiencyTest sufficiency_test(const FactorFit& fit, Index n) {
  const auto p = static_cast<int>(fit.loadings.rows());
  const int q = fit.q;
  const int twice_df = (p - q) * (p - q) - p - q;
  if (twice_df <= 0) {
    std::ostringstream msg;
    msg << "sufficiency test: model with p=" << p << ", q=" << q << " is saturated (df <= 0)";
    throw InputError(msg.str());
  }
  SufficiencyTest test;
  test.df = twice_df / 2;
  const double multiplier =
      static_cast<double>(n) - 1.0 - (2.0 * p + 5.0) / 6.0 - 2.0 * q / 3.0;
  test.statistic = std::max(multiplier * fit.objective, 0.0);
  const boost::math::chi_squared chi2(static_cast<double>(twice_df) / 2.0);
  test.p_value = std::clamp(boost::math::cdf(boost::math::complement(chi2, test.statistic)), 0.0, 1.0);
  return test;
}

std::vector<Index> select_confounded(const MatrixXd& gamma, Index n) {
  const double threshold = std::log(static_cast<double>(n)) / static_cast<double>(n);
  std::vector<Index> out;
  for (Index i = 0; i < gamma.rows(); ++i)
    if (gamma.row(i).squaredNorm() > threshold) out.push_back(i);
  return out;
}

}  // namespace multicause
