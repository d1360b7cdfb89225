#include "multicause/deconv.hpp"

#include "multicause/errors.hpp"
#include "multicause/factor.hpp"
#include "multicause/linmodel.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace multicause::deconv {

namespace {

using Complex = std::complex<double>;
using MatrixXc = Eigen::MatrixXcd;

constexpr double kImagResidueLimit = 0.1;
constexpr double kMassSlack = 0.02;
// The z integral is windowed by a box smoothed with N(0, kTaperScale^2) on the
// standardised confounder scale. Its transform carries exp(-kTaperScale^2 t^2 / 2),
// which stays bounded after division by h1, unlike the hard grid edge. The box
// stops kTaperMargin short of the grid ends, where the window is below 1e-15.
const double kTaperScale = std::sqrt(2.0);
const double kTaperMargin = 8.0 * kTaperScale;

double normal_cdf(double v) { return 0.5 * std::erfc(-v / std::sqrt(2.0)); }

double normal_pdf(double v) { return std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi); }

void validate_grid(const UniformGrid& g, const char* name) {
  if (g.count < 16 || !(g.max > g.min) || !std::isfinite(g.min) || !std::isfinite(g.max))
    throw InputError(std::string("deconvolution: grid ") + name + " must be increasing with at least 16 points");
}

double trapezoid_mass(const MatrixXd& values, Index col, const std::vector<double>& w) {
  double m = 0.0;
  for (Index i = 0; i < values.rows(); ++i) m += w[static_cast<std::size_t>(i)] * values(i, col);
  return m;
}

// h2 for every y in the grid: rows y, columns t.
MatrixXc h2_matrix(const ConditionalDensity& f, const VectorXd& x, const std::vector<double>& ys,
                   const DeconvConfig& cfg) {
  const auto zs = cfg.z_grid.points();
  const auto zw = cfg.z_grid.weights();
  const auto ts = frequency_grid(cfg);
  const double gx = cfg.gamma_tilde.dot(x);
  const double ge = cfg.gamma_eta();
  auto standardised = [&](double z) { return (gx - ge * z) / cfg.sigma_tilde; };
  const double v_lo = std::min(standardised(zs.front()), standardised(zs.back())) + kTaperMargin;
  const double v_hi = std::max(standardised(zs.front()), standardised(zs.back())) - kTaperMargin;
  if (!(v_hi > v_lo)) {
    std::ostringstream msg;
    msg << "deconvolution: z grid spans too little of the confounder scale; widen it beyond "
        << 2.0 * kTaperMargin * cfg.sigma_tilde / std::abs(ge) << " units";
    throw InputError(msg.str());
  }
  std::vector<double> window(zs.size());
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const double v = standardised(zs[k]);
    window[k] = zw[k] * (normal_cdf((v - v_lo) / kTaperScale) - normal_cdf((v - v_hi) / kTaperScale));
  }
  MatrixXd weighted(static_cast<Index>(ys.size()), static_cast<Index>(zs.size()));
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (std::size_t k = 0; k < zs.size(); ++k) {
      const double v = f(ys[i], x, zs[k]);
      if (!std::isfinite(v)) throw InputError("deconvolution: conditional density returned a non-finite value");
      weighted(static_cast<Index>(i), static_cast<Index>(k)) = window[k] * v;
    }
  MatrixXc phase(static_cast<Index>(zs.size()), static_cast<Index>(ts.size()));
  for (std::size_t k = 0; k < zs.size(); ++k) {
    const double shifted = standardised(zs[k]);
    for (std::size_t j = 0; j < ts.size(); ++j)
      phase(static_cast<Index>(k), static_cast<Index>(j)) = std::polar(1.0, -ts[j] * shifted);
  }
  // Jacobian of z -> (gamma^T x - gamma^T eta z) / sigma, orientation included.
  const double jacobian = std::abs(ge) / cfg.sigma_tilde;
  return jacobian * (weighted.cast<Complex>() * phase);
}

}  // namespace

std::vector<double> UniformGrid::points() const {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = at(i);
  return out;
}

std::vector<double> UniformGrid::weights() const {
  std::vector<double> w(static_cast<std::size_t>(count), step());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

void DeconvConfig::validate() const {
  if (gamma_tilde.size() == 0 || gamma_tilde.size() != eta.size())
    throw InputError("deconvolution: gamma_tilde and eta must be non-empty and of equal length");
  if (!(sigma_tilde > 0.0) || !std::isfinite(sigma_tilde)) throw InputError("deconvolution: sigma_tilde must be > 0");
  if (!(std::abs(gamma_eta()) > 1e-10)) {
    std::ostringstream msg;
    msg << "deconvolution: gamma_tilde^T eta = " << gamma_eta() << " vanishes; the instrument carries no information";
    throw IdentificationError(msg.str());
  }
  validate_grid(y_grid, "y");
  validate_grid(u_grid, "u");
  validate_grid(z_grid, "z");
  if (!(eps_reg > 0.0 && eps_reg < 1.0)) throw InputError("deconvolution: eps_reg must lie in (0, 1)");
  if (!(t_max > 0.0)) throw InputError("deconvolution: t_max must be positive");
  if (t_count < 16) throw InputError("deconvolution: t_count must be at least 16");
}

double DeconvConfig::truncation() const { return std::min(t_max, std::sqrt(2.0 * std::log(1.0 / eps_reg))); }

std::vector<double> frequency_grid(const DeconvConfig& cfg) {
  const double cut = cfg.truncation();
  return UniformGrid{-cut, cut, cfg.t_count}.points();
}

double h1(double t) { return std::exp(-0.5 * t * t); }

std::vector<std::complex<double>> h2_transform(const ConditionalDensity& f, const VectorXd& x, double y,
                                               const DeconvConfig& cfg) {
  cfg.validate();
  const MatrixXc row = h2_matrix(f, x, {y}, cfg);
  return {row.data(), row.data() + row.size()};
}

DensityGrid deconvolve_outcome(const ConditionalDensity& f, const VectorXd& x, const DeconvConfig& cfg) {
  cfg.validate();
  if (x.size() != cfg.gamma_tilde.size()) throw InputError("deconvolution: x has the wrong dimension");
  const auto ys = cfg.y_grid.points();
  const auto us = cfg.u_grid.points();
  const auto ts = frequency_grid(cfg);
  const double dt = ts[1] - ts[0];

  const MatrixXc h2 = h2_matrix(f, x, ys, cfg);
  MatrixXc kernel(static_cast<Index>(ts.size()), static_cast<Index>(us.size()));
  for (std::size_t j = 0; j < ts.size(); ++j) {
    const double w = (j == 0 || j + 1 == ts.size() ? 0.5 : 1.0) * dt / (2.0 * std::numbers::pi * h1(ts[j]));
    for (std::size_t k = 0; k < us.size(); ++k)
      kernel(static_cast<Index>(j), static_cast<Index>(k)) = std::polar(w, ts[j] * us[k] / cfg.sigma_tilde);
  }
  const MatrixXc raw = h2 * kernel;

  DensityGrid out;
  out.y = ys;
  out.u = us;
  out.imag_residue = raw.imag().cwiseAbs().maxCoeff();
  if (out.imag_residue > kImagResidueLimit) {
    std::ostringstream msg;
    msg << "deconvolution: imaginary residue " << out.imag_residue
        << " exceeds 0.1; the model or the grids do not fit the data";
    throw IdentificationError(msg.str());
  }
  out.values = raw.real();
  const auto yw = cfg.y_grid.weights();
  out.mass.resize(out.values.cols());
  for (Index k = 0; k < out.values.cols(); ++k) out.mass(k) = trapezoid_mass(out.values, k, yw);
  out.values = out.values.cwiseMax(0.0);
  std::ostringstream label;
  label << "f~(y|u,x) at x=(" << x.transpose() << ")";
  out.label = label.str();
  return out;
}

DensityGrid potential_outcome_density(const DensityGrid& fyux, const DeconvConfig& cfg) {
  if (fyux.u.empty()) throw InputError("potential outcome density needs a grid over (y, u)");
  if (fyux.u.front() > -5.0 || fyux.u.back() < 5.0)
    throw InputError("potential outcome density: the u grid must cover [-5, 5]");
  const std::size_t nu = fyux.u.size();
  const double du = (fyux.u.back() - fyux.u.front()) / static_cast<double>(nu - 1);
  VectorXd weights(static_cast<Index>(nu));
  for (std::size_t k = 0; k < nu; ++k)
    weights(static_cast<Index>(k)) = (k == 0 || k + 1 == nu ? 0.5 : 1.0) * du * normal_pdf(fyux.u[k]);

  DensityGrid out;
  out.y = fyux.y;
  out.values = fyux.values * weights;
  out.imag_residue = fyux.imag_residue;
  const std::size_t ny = out.y.size();
  const double dy = (out.y.back() - out.y.front()) / static_cast<double>(ny - 1);
  std::vector<double> yw(ny, dy);
  yw.front() *= 0.5;
  yw.back() *= 0.5;
  out.mass = VectorXd::Constant(1, trapezoid_mass(out.values, 0, yw));
  if (std::abs(out.mass(0) - 1.0) >= kMassSlack) {
    std::ostringstream msg;
    msg << "potential outcome density integrates to " << out.mass(0) << ", off by 2% or more";
    throw IdentificationError(msg.str());
  }
  out.values = out.values.cwiseMax(0.0);
  out.values /= trapezoid_mass(out.values, 0, yw);
  const auto at = fyux.label.find("x=");
  out.label = "f{Y(x)=y}" + (at == std::string::npos ? std::string() : " at " + fyux.label.substr(at));
  (void)cfg;
  return out;
}

void write_csv(std::ostream& out, const DensityGrid& grid) {
  const auto old = out.precision(12);
  if (grid.u.empty()) {
    out << "y,value\n";
    for (std::size_t i = 0; i < grid.y.size(); ++i) out << grid.y[i] << ',' << grid.values(static_cast<Index>(i), 0) << '\n';
  } else {
    out << "y,u,value\n";
    for (std::size_t i = 0; i < grid.y.size(); ++i)
      for (std::size_t k = 0; k < grid.u.size(); ++k)
        out << grid.y[i] << ',' << grid.u[k] << ',' << grid.values(static_cast<Index>(i), static_cast<Index>(k)) << '\n';
  }
  out.precision(old);
}

MatrixXd LinearGaussianModel::residual_covariance() const {
  MatrixXd cov = alpha * alpha.transpose();
  cov.diagonal() += noise_x.cwiseAbs2();
  return cov;
}

ConditionalDensity LinearGaussianModel::conditional_density() const {
  const MatrixXd cov = residual_covariance();
  const VectorXd gamma = cov.ldlt().solve(alpha);
  const double sigma2_u = 1.0 - alpha.dot(gamma);
  const double sd = std::sqrt(delta * delta * sigma2_u + sigma_y * sigma_y);
  return [b = beta, g = gamma, e = eta, d = delta, sd](double y, const VectorXd& x, double z) {
    const double mean = b.dot(x) + d * (g.dot(x) - g.dot(e) * z);
    return normal_pdf((y - mean) / sd) / sd;
  };
}

LinearGaussianModel example_model() {
  LinearGaussianModel m;
  m.alpha = VectorXd::Ones(3);
  m.eta = (VectorXd(3) << 1.0, 0.5, 0.0).finished();
  m.beta = (VectorXd(3) << 1.0, -0.5, 0.25).finished();
  m.noise_x = VectorXd::Ones(3);
  m.delta = 1.0;
  m.sigma_y = 1.0;
  return m;
}

DeconvConfig config_from_loading(const VectorXd& alpha_tilde, const VectorXd& eta, const MatrixXd& residual_cov) {
  DeconvConfig cfg;
  cfg.gamma_tilde = residual_cov.ldlt().solve(alpha_tilde);
  const double s2 = 1.0 - alpha_tilde.dot(cfg.gamma_tilde);
  if (!(s2 > 0.0)) throw IdentificationError("deconvolution: 1 - alpha^T Sigma^{-1} alpha must be positive");
  cfg.sigma_tilde = std::sqrt(s2);
  cfg.eta = eta;
  return cfg;
}

PlugIn fit_plug_in(const Dataset& raw) {
  if (!raw.has_z() || raw.r() != 1) throw InputError("deconvolution needs exactly one instrument column");
  auto [d, info] = center(raw);
  const FactorFit factor = fit_factor(d.x(), 1, d.z());
  PlugIn out;
  out.config = config_from_loading(factor.loadings.col(0), factor.eta->col(0), factor.fitted_covariance());
  out.x_mean = info.x_mean;
  out.y_mean = info.y_mean;
  out.y_sd = std::sqrt(d.y().squaredNorm() / static_cast<double>(d.n() - 1));
  out.z_sd = std::sqrt(d.z().squaredNorm() / static_cast<double>(d.n() - 1));
  MatrixXd xz(d.n(), d.p() + 1);
  xz << d.x(), d.z();
  const OlsFit reg = ols(d.y(), xz);
  const VectorXd coef = reg.coef.col(0);
  const double sd = std::sqrt(reg.residuals.squaredNorm() / static_cast<double>(d.n() - d.p() - 1));
  const Index p = d.p();
  out.density = [coef, sd, p](double y, const VectorXd& x, double z) {
    const double mean = coef.head(p).dot(x) + coef(p) * z;
    return normal_pdf((y - mean) / sd) / sd;
  };
  return out;
}

}  // namespace multicause::deconv
