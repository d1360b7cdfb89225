#pragma once

#include "multicause/dataset.hpp"

#include <complex>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace multicause::deconv {

struct UniformGrid {
  double min = 0.0;
  double max = 1.0;
  int count = 16;

  double step() const { return (max - min) / (count - 1); }
  double at(int i) const { return min + step() * i; }
  std::vector<double> points() const;
  /// Trapezoid weights matching points().
  std::vector<double> weights() const;
};

/// Normal-instrument setting with one confounder and one instrument column:
/// f~(u | x, z) = N(gamma_tilde^T x - gamma_tilde^T eta z, sigma_tilde^2).
struct DeconvConfig {
  VectorXd gamma_tilde;
  VectorXd eta;
  double sigma_tilde = 1.0;
  UniformGrid y_grid{-8.0, 8.0, 161};
  UniformGrid u_grid{-6.0, 6.0, 121};
  UniformGrid z_grid{-50.0, 50.0, 401};
  double t_max = 10.0;
  double eps_reg = 1e-6;
  int t_count = 1025;

  /// Throws InputError unless sigma_tilde > 0, |gamma^T eta| > 1e-10 and the
  /// grids are increasing with at least 16 points.
  void validate() const;
  /// Frequency cut-off min(t_max, sqrt(2 ln(1 / eps_reg))), where |h1| >= eps_reg.
  double truncation() const;
  double gamma_eta() const { return gamma_tilde.dot(eta); }
};

/// f(y | x, z).
using ConditionalDensity = std::function<double(double y, const VectorXd& x, double z)>;

/// Density values on a grid over y (one column) or over (y, u).
struct DensityGrid {
  std::vector<double> y;
  std::vector<double> u;      // empty for a density over y alone
  MatrixXd values;            // y.size() x max(u.size(), 1), clipped at zero
  std::string label;
  VectorXd mass;              // trapezoid mass over y per column, before clipping/renormalising
  double imag_residue = 0.0;  // largest |imaginary part| left by the inverse transform
};

/// Frequencies t_k on [-T, T] with T = cfg.truncation().
std::vector<double> frequency_grid(const DeconvConfig& cfg);

/// h1(t) = exp(-t^2 / 2), the transform of the standard normal density.
double h1(double t);

/// h2(y, x, t) on frequency_grid(cfg), by trapezoid quadrature over z_grid.
std::vector<std::complex<double>> h2_transform(const ConditionalDensity& f, const VectorXd& x, double y,
                                               const DeconvConfig& cfg);

/// f~(y | x, u) by truncated Fourier inversion of h2 / h1. Throws
/// IdentificationError when the imaginary residue exceeds 0.1.
DensityGrid deconvolve_outcome(const ConditionalDensity& f, const VectorXd& x, const DeconvConfig& cfg);

/// f{Y(x) = y} = int f~(y | u, x) phi(u) du. Throws InputError unless the u
/// grid covers [-5, 5] and IdentificationError when the mass is off by 2% or more.
DensityGrid potential_outcome_density(const DensityGrid& fyux, const DeconvConfig& cfg);

/// CSV with header y,value or y,u,value.
void write_csv(std::ostream& out, const DensityGrid& grid);

/// Gaussian linear model X = alpha U + eta Z + e, Y = beta^T X + delta U + e_Y,
/// with U, Z ~ N(0, 1), e ~ N(0, diag(noise_x^2)), e_Y ~ N(0, sigma_y^2).
struct LinearGaussianModel {
  VectorXd alpha;
  VectorXd eta;
  VectorXd beta;
  VectorXd noise_x;
  double delta = 1.0;
  double sigma_y = 1.0;

  MatrixXd residual_covariance() const;  // Cov(X - eta Z) = alpha alpha^T + diag(noise_x^2)
  /// Exact f(y | x, z) implied by the model.
  ConditionalDensity conditional_density() const;
};

/// p = 3 preset used by the CLI and the acceptance suite.
LinearGaussianModel example_model();

/// Config for an admissible loading alpha_tilde: gamma = Sigma^{-1} alpha_tilde,
/// sigma^2 = 1 - alpha_tilde^T Sigma^{-1} alpha_tilde.
DeconvConfig config_from_loading(const VectorXd& alpha_tilde, const VectorXd& eta, const MatrixXd& residual_cov);

/// Data-driven plug-in: eta by regression of X on the single instrument,
/// one-factor ML fit of the residuals for the admissible loading, and a
/// Gaussian linear f(y | x, z) from the regression of Y on (X, Z). The data
/// are centred first, so x is read on the centred scale.
struct PlugIn {
  DeconvConfig config;
  ConditionalDensity density;
  VectorXd x_mean;
  double y_mean = 0.0;
  double y_sd = 1.0;
  double z_sd = 1.0;
};
PlugIn fit_plug_in(const Dataset& d);

}  // namespace multicause::deconv
