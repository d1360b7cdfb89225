#include "multicause/aux_linear.hpp"
#include "multicause/errors.hpp"
#include "multicause/linmodel.hpp"
#include "multicause/sim.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace multicause;

namespace {

struct PopulationAux {
  testing::PopulationMoments moments;
  FactorFit factor;
};

PopulationAux population_fit(const sim::DgpConfig& cfg) {
  PopulationAux out{testing::population_moments(cfg), {}};
  out.factor = fit_factor_covariance(out.moments.residual_cov, static_cast<int>(cfg.q()), 100000);
  return out;
}

sim::DgpConfig aux_at(Index n, std::uint64_t seed) {
  sim::DgpConfig cfg = sim::aux_preset();
  cfg.n = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("aux") {

TEST_CASE("exact population moments give the true effects") {
  const sim::DgpConfig cfg = sim::aux_preset();
  const PopulationAux pop = population_fit(cfg);
  const AuxEstimate est = combine_aux(pop.moments.xi_x, pop.moments.xi_z, pop.moments.eta, pop.factor);
  CHECK((est.beta - cfg.beta).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(est.rank_ok);
}

TEST_CASE("with as many instruments as factors the correction reduces to an inverse") {
  const sim::DgpConfig cfg = sim::aux_preset();
  const PopulationAux pop = population_fit(cfg);
  const MatrixXd eta = pop.moments.eta.leftCols(2);
  const VectorXd xi_z = pop.moments.xi_z.head(2);
  const AuxEstimate est = combine_aux(pop.moments.xi_x, xi_z, eta, pop.factor);
  const MatrixXd& g = pop.factor.gamma;
  const VectorXd direct = pop.moments.xi_x + g * (eta.transpose() * g).lu().solve(xi_z);
  CHECK((est.beta - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank deficient gamma^T eta is an identification error") {
  const sim::DgpConfig cfg = sim::aux_preset();
  const PopulationAux pop = population_fit(cfg);
  CHECK_THROWS_AS(combine_aux(pop.moments.xi_x, pop.moments.xi_z.tail(1), pop.moments.eta.rightCols(1), pop.factor),
                  IdentificationError);
  // fewer correction columns than factors fails the precondition outright
  const Dataset d = sim::generate(aux_at(500, 81));
  CHECK_THROWS_AS(estimate_aux_subset(d, 2, {5}), InputError);
}

TEST_CASE("missing instruments and bad subsets are input errors") {
  const Dataset d = sim::generate(aux_at(500, 82));
  const Dataset no_z(d.y(), d.x());
  CHECK_THROWS_AS(estimate_aux(no_z, 2), InputError);
  CHECK_THROWS_AS(estimate_aux_subset(d, 2, {6}), InputError);
  CHECK_THROWS_AS(estimate_aux_subset(d, 2, {}), InputError);
}

TEST_CASE("full instrument subset equals the full estimator") {
  const Dataset d = sim::generate(aux_at(1000, 83));
  const AuxEstimate a = estimate_aux(d, 2);
  const AuxEstimate b = estimate_aux_subset(d, 2, {0, 1, 2, 3, 4, 5});
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("large-sample estimates are close to the truth on average") {
  const int reps = 50;
  VectorXd mean_err = VectorXd::Zero(6);
  for (int b = 0; b < reps; ++b) {
    const sim::DgpConfig cfg = aux_at(100000, sim::derive_seed(84, 0, static_cast<std::uint64_t>(b)));
    mean_err += (estimate_aux(sim::generate(cfg), 2).beta - cfg.beta) / reps;
  }
  CHECK(mean_err.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("without confounding the estimate agrees with ols") {
  sim::DgpConfig cfg = aux_at(100000, 85);
  cfg.delta_y.setZero();
  const Dataset d = sim::generate(cfg);
  const VectorXd beta = estimate_aux(d, 2).beta;
  const VectorXd ols_beta = sim::run_estimator("OLS", d);
  CHECK((beta - cfg.beta).cwiseAbs().maxCoeff() < 0.05);
  CHECK((beta - ols_beta).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("a single instrument with one factor is biased for the confounded effects") {
  const sim::DgpConfig cfg = aux_at(100000, 86);
  const VectorXd beta = estimate_aux_subset(sim::generate(cfg), 1, {5}).beta;
  CHECK((beta - cfg.beta).tail(5).cwiseAbs().maxCoeff() > 0.1);
}

}  // TEST_SUITE

TEST_SUITE("properties") {

TEST_CASE("aux estimate is invariant to rotating the factor solution") {
  const Dataset d = sim::generate(aux_at(2000, 87));
  const AuxEstimate base = estimate_aux(d, 2);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const MatrixXd rot = testing::random_orthogonal(2, 88 + s);
    const AuxEstimate r = combine_aux(base.xi_x, base.xi_z, base.eta, rotate(base.factor, rot));
    CHECK((r.beta - base.beta).cwiseAbs().maxCoeff() < 1e-8);
    // delta moves with the rotation
    CHECK((r.delta - rot.transpose() * base.delta).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("aux estimate is invariant to a reflection of a factor") {
  const Dataset d = sim::generate(aux_at(2000, 89));
  const AuxEstimate base = estimate_aux(d, 2);
  const MatrixXd flip = (MatrixXd(2, 2) << -1, 0, 0, 1).finished();
  CHECK((combine_aux(base.xi_x, base.xi_z, base.eta, rotate(base.factor, flip)).beta - base.beta).cwiseAbs().maxCoeff() <
        1e-8);
}

TEST_CASE("aux estimate is location invariant") {
  const Dataset d = sim::generate(aux_at(1500, 90));
  const Dataset shifted(d.y().array() + 5.0, (d.x().array() - 3.0).matrix(), (d.z().array() + 1.0).matrix());
  CHECK((estimate_aux(shifted, 2).beta - estimate_aux(d, 2).beta).cwiseAbs().maxCoeff() < 1e-8);
}

}  // TEST_SUITE
