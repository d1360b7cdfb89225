#pragma once

#include "multicause/dataset.hpp"
#include "multicause/sim.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>

namespace testing {

using multicause::Index;
using multicause::MatrixXd;
using multicause::VectorXd;

inline std::string fixture(const std::string& name) {
  return (std::filesystem::path(MULTICAUSE_FIXTURE_DIR) / name).string();
}

inline std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / "multicause_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

/// Haar-distributed orthogonal matrix from QR of a Gaussian matrix.
inline MatrixXd random_orthogonal(Index q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixXd a(q, q);
  for (Index i = 0; i < q; ++i)
    for (Index j = 0; j < q; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd qm = qr.householderQ();
  const VectorXd d = qr.matrixQR().diagonal();
  for (Index j = 0; j < q; ++j)
    if (d(j) < 0) qm.col(j) *= -1.0;
  return qm;
}

inline MatrixXd random_normal(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

/// Population second moments of X = alpha U + eta Z + e, Y = beta^T X + delta^T U + lambda^T Z + e_Y
/// with unit-variance independent U, Z, e.
struct PopulationMoments {
  MatrixXd eta;           // population coefficient of X on Z (= eta)
  MatrixXd residual_cov;  // Cov(X - eta Z) = alpha alpha^T + noise^2 I
  VectorXd xi_x;          // population coefficients of Y on (X, Z)
  VectorXd xi_z;
  MatrixXd sigma_x;       // Cov(X)
  VectorXd xi;            // population coefficient of Y on X alone
};

inline PopulationMoments population_moments(const multicause::sim::DgpConfig& cfg) {
  const Index p = cfg.p();
  const Index r = cfg.r();
  PopulationMoments m;
  m.residual_cov = cfg.alpha * cfg.alpha.transpose();
  m.residual_cov.diagonal().array() += cfg.noise_x * cfg.noise_x;
  m.eta = cfg.eta ? *cfg.eta : MatrixXd(p, 0);
  m.sigma_x = m.residual_cov + m.eta * m.eta.transpose();
  const VectorXd lambda = cfg.lambda ? *cfg.lambda : VectorXd::Zero(r);
  // Cov(X, Y) and Cov(Z, Y).
  const VectorXd cxy = m.sigma_x * cfg.beta + cfg.alpha * cfg.delta_y + m.eta * lambda;
  const VectorXd czy = m.eta.transpose() * cfg.beta + lambda;
  MatrixXd joint(p + r, p + r);
  joint << m.sigma_x, m.eta, m.eta.transpose(), MatrixXd::Identity(r, r);
  VectorXd c(p + r);
  c << cxy, czy;
  const VectorXd coef = joint.ldlt().solve(c);
  m.xi_x = coef.head(p);
  m.xi_z = coef.tail(r);
  m.xi = m.sigma_x.ldlt().solve(cxy);
  return m;
}

}  // namespace testing
