#include "multicause/errors.hpp"
#include "multicause/null_linear.hpp"
#include "multicause/sim.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace multicause;

namespace {

sim::DgpConfig null_at(int which, Index n, std::uint64_t seed) {
  sim::DgpConfig cfg = sim::null_preset(which);
  cfg.n = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("null") {

TEST_CASE("exact population moments give the true effects when most confounded treatments are null") {
  const sim::DgpConfig cfg = sim::null_preset(1);
  const testing::PopulationMoments m = testing::population_moments(cfg);
  const FactorFit fit = fit_factor_covariance(m.sigma_x, 2, 5000);
  // xi = beta + gamma delta at the population level
  const MatrixXd gamma_true = m.sigma_x.ldlt().solve(cfg.alpha);
  CHECK((m.xi - cfg.beta - gamma_true * cfg.delta_y).cwiseAbs().maxCoeff() < 1e-12);
  const NullEstimate est = combine_null(m.xi, fit, 5000);
  CHECK((est.beta - cfg.beta).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((est.beta_lms - cfg.beta).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(est.confounded == std::vector<Index>{1, 2, 3, 4, 5, 6, 7});
  // four of the five null coordinates, which ones depends on rounding
  REQUIRE(est.null_set.size() == 4);
  for (Index j : est.null_set) CHECK(cfg.beta(j) == 0.0);
}

TEST_CASE("population estimate is biased when only three of seven confounded treatments are null") {
  const sim::DgpConfig cfg = sim::null_preset(2);
  const testing::PopulationMoments m = testing::population_moments(cfg);
  const NullEstimate est = combine_null(m.xi, fit_factor_covariance(m.sigma_x, 2, 5000), 5000);
  CHECK(est.confounded == std::vector<Index>{1, 2, 3, 4, 5, 6, 7});
  CHECK((est.beta - cfg.beta).segment(1, 7).cwiseAbs().maxCoeff() > 0.05);
}

TEST_CASE("too few confounded treatments is an identification error") {
  sim::DgpConfig cfg = null_at(1, 2000, 101);
  cfg.alpha.setZero();
  cfg.alpha(0, 0) = 1.0;
  cfg.alpha(1, 1) = 1.0;
  CHECK_THROWS_AS(estimate_null(sim::generate(cfg), 2), IdentificationError);
}

TEST_CASE("null estimator recovers case 1 at moderate n") {
  const sim::DgpConfig cfg = null_at(1, 5000, 102);
  const NullEstimate est = estimate_null(sim::generate(cfg), 2);
  CHECK((est.beta - cfg.beta).cwiseAbs().maxCoeff() < 0.15);
  CHECK(est.null_set.size() == (7 + 2) / 2);
}

TEST_CASE("statistic is zero when xi lies in the span of gamma") {
  const MatrixXd gamma = testing::random_normal(6, 2, 103);
  const VectorXd xi = gamma * (VectorXd(2) << 0.4, -1.1).finished();
  CHECK(projection_residual_norm(xi, gamma) < 1e-12);
  VectorXd off = xi;
  off(0) += 1.0;
  CHECK(projection_residual_norm(off, gamma) > 0.1);
}

TEST_CASE("sharp-null test reports its confounded set and is seed deterministic") {
  // the weakest confounded row has squared gamma norm 0.0049, too close to the
  // selection threshold at n = 2000, so use n = 5000
  sim::DgpConfig cfg = null_at(1, 5000, 104);
  cfg.beta.setZero();
  const Dataset d = sim::generate(cfg);
  const SharpNullTest a = test_sharp_null_linear(d, 2, 50, 7);
  const SharpNullTest b = test_sharp_null_linear(d, 2, 50, 7, {}, 2);
  CHECK(a.p_value == b.p_value);
  CHECK(a.statistic == b.statistic);
  CHECK(a.confounded == std::vector<Index>{1, 2, 3, 4, 5, 6, 7});
  CHECK_THROWS_AS(test_sharp_null_linear(d, 2, 0, 7), InputError);
}

}  // TEST_SUITE

TEST_SUITE("monte_carlo") {

TEST_CASE("null estimator bias in case 1") {
  const int reps = 200;
  VectorXd mean_err = VectorXd::Zero(8);
  for (int b = 0; b < reps; ++b) {
    const sim::DgpConfig cfg = null_at(1, 5000, sim::derive_seed(105, 0, static_cast<std::uint64_t>(b)));
    mean_err += (estimate_null(sim::generate(cfg), 2).beta - cfg.beta) / reps;
  }
  CHECK(mean_err.cwiseAbs().maxCoeff() < 0.07);
}

TEST_CASE("sharp-null test size and power") {
  const int reps = 200;
  const int B = 100;
  int size_rejections = 0;
  int power_rejections = 0;
  for (int b = 0; b < reps; ++b) {
    sim::DgpConfig h0 = null_at(1, 5000, sim::derive_seed(106, 0, static_cast<std::uint64_t>(b)));
    h0.beta.setZero();
    if (test_sharp_null_linear(sim::generate(h0), 2, B, sim::derive_seed(106, 1, static_cast<std::uint64_t>(b))).p_value <
        0.05)
      ++size_rejections;
    const sim::DgpConfig h1 = null_at(1, 5000, sim::derive_seed(106, 2, static_cast<std::uint64_t>(b)));
    if (test_sharp_null_linear(sim::generate(h1), 2, B, sim::derive_seed(106, 3, static_cast<std::uint64_t>(b))).p_value <
        0.05)
      ++power_rejections;
  }
  MESSAGE("size rejections " << size_rejections << "/" << reps << ", power rejections " << power_rejections << "/" << reps);
  CHECK(size_rejections <= 0.10 * reps);
  CHECK(power_rejections >= 0.80 * reps);
}

}  // TEST_SUITE

TEST_SUITE("properties") {

TEST_CASE("null estimate is invariant to rotating the factor solution") {
  const sim::DgpConfig cfg = null_at(2, 3000, 107);
  const NullEstimate base = estimate_null(sim::generate(cfg), 2);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const MatrixXd rot = testing::random_orthogonal(2, 108 + s);
    const NullEstimate r = combine_null(base.xi, rotate(base.factor, rot), cfg.n);
    CHECK((r.beta - base.beta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((r.beta_lms - base.beta_lms).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(r.confounded == base.confounded);
    CHECK(r.null_set == base.null_set);
  }
}

TEST_CASE("projection residual norm is rotation invariant and annihilates the span") {
  const MatrixXd gamma = testing::random_normal(7, 2, 113);
  const VectorXd xi = testing::random_normal(7, 1, 114).col(0);
  const MatrixXd rot = testing::random_orthogonal(2, 115);
  CHECK(projection_residual_norm(xi, gamma * rot) == doctest::Approx(projection_residual_norm(xi, gamma)).epsilon(1e-12));
  CHECK(projection_residual_norm(xi + gamma.col(0) * 3.0, gamma) ==
        doctest::Approx(projection_residual_norm(xi, gamma)).epsilon(1e-10));
}

}  // TEST_SUITE
