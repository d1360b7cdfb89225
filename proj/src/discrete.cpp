#include "multicause/discrete.hpp"

#include "multicause/errors.hpp"
#include "multicause/linmodel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

namespace multicause::discrete {

namespace {

constexpr double kMassTolerance = 1e-12;
constexpr double kMisfitTolerance = 1e-6;
constexpr double kKernelRcond = 1e-8;
constexpr double kBoundaryTolerance = 1e-6;
constexpr double kClassWeightFloor = 1e-4;
constexpr double kDiscriminationFloor = 1e-3;

bool bit(Index x, int j) { return ((x >> j) & 1) != 0; }

// Class-conditional probability of configuration x.
double class_prob(const MatrixXd& success, int u, Index x) {
  double prod = 1.0;
  for (Index j = 0; j < success.cols(); ++j) {
    const double t = success(u, j);
    prod *= bit(x, static_cast<int>(j)) ? t : 1.0 - t;
  }
  return prod;
}

MatrixXd build_x_u(const Vector2d& weights, const MatrixXd& success) {
  const Index cells = Index{1} << success.cols();
  MatrixXd out(cells, 2);
  for (Index x = 0; x < cells; ++x)
    for (int u = 0; u < 2; ++u) out(x, u) = weights(u) * class_prob(success, u, x);
  return out;
}

struct Params {
  double pi1;
  MatrixXd success;
};

Params unpack(const VectorXd& v, int p) {
  Params out{v(0), MatrixXd(2, p)};
  for (int j = 0; j < p; ++j) {
    out.success(0, j) = v(1 + j);
    out.success(1, j) = v(1 + p + j);
  }
  return out;
}

VectorXd residual(const VectorXd& v, const VectorXd& px, int p) {
  const Params prm = unpack(v, p);
  VectorXd r(px.size());
  for (Index x = 0; x < px.size(); ++x)
    r(x) = (1.0 - prm.pi1) * class_prob(prm.success, 0, x) + prm.pi1 * class_prob(prm.success, 1, x) - px(x);
  return r;
}

MatrixXd jacobian(const VectorXd& v, Index cells, int p) {
  const Params prm = unpack(v, p);
  MatrixXd jac(cells, 1 + 2 * p);
  for (Index x = 0; x < cells; ++x) {
    jac(x, 0) = class_prob(prm.success, 1, x) - class_prob(prm.success, 0, x);
    for (int u = 0; u < 2; ++u) {
      const double w = u == 0 ? 1.0 - prm.pi1 : prm.pi1;
      for (int j = 0; j < p; ++j) {
        double prod = 1.0;
        for (int k = 0; k < p; ++k) {
          if (k == j) continue;
          const double t = prm.success(u, k);
          prod *= bit(x, k) ? t : 1.0 - t;
        }
        jac(x, 1 + u * p + j) = w * prod * (bit(x, j) ? 1.0 : -1.0);
      }
    }
  }
  return jac;
}

// Box-constrained Levenberg-Marquardt on [0, 1]^(1 + 2p).
VectorXd levenberg_marquardt(VectorXd v, const VectorXd& px, int p, int max_iterations) {
  const Index cells = px.size();
  auto clip = [](VectorXd a) { return a.cwiseMax(0.0).cwiseMin(1.0).eval(); };
  VectorXd r = residual(v, px, p);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int it = 0; it < max_iterations && cost > 1e-30; ++it) {
    const MatrixXd jac = jacobian(v, cells, p);
    const MatrixXd normal = jac.transpose() * jac;
    const VectorXd grad = jac.transpose() * r;
    bool improved = false;
    while (lambda < 1e12) {
      MatrixXd damped = normal;
      damped.diagonal() += lambda * (normal.diagonal().array() + 1e-12).matrix();
      const VectorXd cand = clip(v - damped.ldlt().solve(grad));
      const VectorXd rc = residual(cand, px, p);
      const double cc = rc.squaredNorm();
      if (cc < cost) {
        const double gain = cost - cc;
        v = cand;
        r = rc;
        cost = cc;
        lambda = std::max(lambda * 0.1, 1e-15);
        improved = gain > 1e-32;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return v;
}

void require_distribution(const MatrixXd& m, const char* what) {
  if ((m.array() < -kMassTolerance).any()) throw InputError(std::string(what) + " has negative entries");
}

}  // namespace

DiscreteJoint::DiscreteJoint(int p, int ny, std::vector<double> prob) : p_(p), ny_(ny), prob_(std::move(prob)) {
  if (p < 1 || p > 20) throw InputError("discrete joint: p must lie in [1, 20]");
  if (ny < 1) throw InputError("discrete joint: outcome support must be non-empty");
  const std::size_t expected = static_cast<std::size_t>(ny) * static_cast<std::size_t>(cells()) * 4;
  if (prob_.size() != expected) {
    std::ostringstream msg;
    msg << "discrete joint: expected " << expected << " cells, got " << prob_.size();
    throw InputError(msg.str());
  }
  double total = 0.0;
  for (double v : prob_) {
    if (!std::isfinite(v) || v < 0.0) throw InputError("discrete joint: entries must be finite and non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "discrete joint: total mass " << total << " differs from 1";
    throw InputError(msg.str());
  }
}

DiscreteJoint DiscreteJoint::from_latent(const LatentClassModel& model) {
  const auto p = static_cast<int>(model.success.cols());
  const auto ny = static_cast<int>(model.y_given_ux[0].rows());
  const Index cells = Index{1} << p;
  if (model.success.rows() != 2) throw InputError("latent model: success must have two rows");
  for (const auto& t : model.y_given_ux)
    if (t.rows() != ny || t.cols() != cells) throw InputError("latent model: outcome table has wrong shape");
  std::vector<double> prob(static_cast<std::size_t>(ny) * static_cast<std::size_t>(cells) * 4);
  const Vector2d weights(1.0 - model.pi1, model.pi1);
  std::size_t k = 0;
  for (int y = 0; y < ny; ++y)
    for (Index x = 0; x < cells; ++x)
      for (int u = 0; u < 2; ++u)
        for (int z = 0; z < 2; ++z)
          prob[k++] = weights(u) * class_prob(model.success, u, x) * model.z_given_u(z, u) *
                      model.y_given_ux[static_cast<std::size_t>(u)](y, x);
  double total = 0.0;
  for (double v : prob) total += v;
  for (double& v : prob) v /= total;
  return DiscreteJoint(p, ny, std::move(prob));
}

VectorXd DiscreteJoint::px() const {
  VectorXd out = VectorXd::Zero(cells());
  for (int y = 0; y < ny_; ++y)
    for (Index x = 0; x < cells(); ++x)
      for (int u = 0; u < 2; ++u)
        for (int z = 0; z < 2; ++z) out(x) += at(y, x, u, z);
  return out;
}

MatrixXd DiscreteJoint::pxu() const {
  MatrixXd out = MatrixXd::Zero(cells(), 2);
  for (int y = 0; y < ny_; ++y)
    for (Index x = 0; x < cells(); ++x)
      for (int u = 0; u < 2; ++u)
        for (int z = 0; z < 2; ++z) out(x, u) += at(y, x, u, z);
  return out;
}

MatrixXd DiscreteJoint::pzx() const {
  MatrixXd out = MatrixXd::Zero(2, cells());
  for (int y = 0; y < ny_; ++y)
    for (Index x = 0; x < cells(); ++x)
      for (int u = 0; u < 2; ++u)
        for (int z = 0; z < 2; ++z) out(z, x) += at(y, x, u, z);
  return out;
}

OutcomeTables DiscreteJoint::py_given_xz() const {
  OutcomeTables out{MatrixXd::Zero(ny_, cells()), MatrixXd::Zero(ny_, cells())};
  for (int y = 0; y < ny_; ++y)
    for (Index x = 0; x < cells(); ++x)
      for (int u = 0; u < 2; ++u)
        for (int z = 0; z < 2; ++z) out[static_cast<std::size_t>(z)](y, x) += at(y, x, u, z);
  const MatrixXd margin = pzx();
  for (int z = 0; z < 2; ++z)
    for (Index x = 0; x < cells(); ++x) {
      if (!(margin(z, x) > 0.0)) throw IdentificationError("f(y | x, z) undefined: f(x, z) = 0");
      out[static_cast<std::size_t>(z)].col(x) /= margin(z, x);
    }
  return out;
}

MatrixXd DiscreteJoint::py_given_x() const {
  MatrixXd out = MatrixXd::Zero(ny_, cells());
  for (int y = 0; y < ny_; ++y)
    for (Index x = 0; x < cells(); ++x)
      for (int u = 0; u < 2; ++u)
        for (int z = 0; z < 2; ++z) out(y, x) += at(y, x, u, z);
  const VectorXd margin = px();
  for (Index x = 0; x < cells(); ++x) {
    if (!(margin(x) > 0.0)) throw IdentificationError("f(y | x) undefined: f(x) = 0");
    out.col(x) /= margin(x);
  }
  return out;
}

VectorXd DiscreteJoint::py() const {
  VectorXd out = VectorXd::Zero(ny_);
  for (int y = 0; y < ny_; ++y)
    for (Index x = 0; x < cells(); ++x)
      for (int u = 0; u < 2; ++u)
        for (int z = 0; z < 2; ++z) out(y) += at(y, x, u, z);
  return out;
}

AdmissibleFit switch_labels(const AdmissibleFit& fit) {
  AdmissibleFit out = fit;
  out.weights = fit.weights.reverse();
  out.success.row(0) = fit.success.row(1);
  out.success.row(1) = fit.success.row(0);
  out.x_u.col(0) = fit.x_u.col(1);
  out.x_u.col(1) = fit.x_u.col(0);
  if (fit.z_given_u) out.z_given_u = fit.z_given_u->rowwise().reverse().eval();
  if (fit.y_given_ux) out.y_given_ux = OutcomeTables{(*fit.y_given_ux)[1], (*fit.y_given_ux)[0]};
  out.label_switched = !fit.label_switched;
  return out;
}

AdmissibleFit fit_mixture(const VectorXd& px, int p, const MixtureOptions& options) {
  if (p < 3) throw InputError("latent-class fit needs at least three treatments");
  const Index cells = Index{1} << p;
  if (px.size() != cells) throw InputError("latent-class fit: f(x) has the wrong number of cells");
  if ((px.array() < -kMassTolerance).any() || std::abs(px.sum() - 1.0) > 1e-10)
    throw InputError("latent-class fit: f(x) is not a probability table");

  const int nparams = 1 + 2 * p;
  VectorXd best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  for (int k = 0; k < std::max(options.restarts, 1); ++k) {
    VectorXd start(nparams);
    for (int i = 0; i < nparams; ++i) start(i) = unif(rng);
    const VectorXd v = levenberg_marquardt(start, px, p, options.max_iterations);
    const double cost = residual(v, px, p).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = v;
    }
  }

  AdmissibleFit fit;
  fit.p = p;
  const Params prm = unpack(best, p);
  fit.weights = Vector2d(1.0 - prm.pi1, prm.pi1);
  fit.success = prm.success;
  fit.discrepancy = residual(best, px, p).cwiseAbs().maxCoeff();
  // Canonical labelling: class 0 has the smaller total success probability.
  if (fit.success.row(0).sum() > fit.success.row(1).sum()) {
    fit.weights = fit.weights.reverse().eval();
    fit.success = fit.success.colwise().reverse().eval();
    fit.label_switched = true;
  }
  fit.x_u = build_x_u(fit.weights, fit.success);

  if (fit.discrepancy > kMisfitTolerance) {
    std::ostringstream msg;
    msg << "latent-class model does not fit f(x): max cell discrepancy " << fit.discrepancy;
    throw IdentificationError(msg.str());
  }
  int discriminating = 0;
  for (int j = 0; j < p; ++j)
    if (std::abs(fit.success(0, j) - fit.success(1, j)) > kDiscriminationFloor) ++discriminating;
  fit.degenerate = fit.weights.minCoeff() < kClassWeightFloor || discriminating < 3;
  if (fit.degenerate && !options.allow_degenerate) {
    std::ostringstream msg;
    msg << "latent-class fit is degenerate (smallest class weight " << fit.weights.minCoeff() << ", "
        << discriminating << " treatments separate the classes; at least three are required)";
    throw IdentificationError(msg.str());
  }
  return fit;
}

ProxySolution solve_proxy(const AdmissibleFit& fit, const MatrixXd& pzx) {
  const Index cells = fit.x_u.rows();
  if (pzx.rows() != 2 || pzx.cols() != cells) throw InputError("solve_proxy: f(z, x) must be 2 x cells");
  require_distribution(pzx, "f(z, x)");
  const double rcond = inverse_condition(fit.x_u);
  if (!(rcond > kKernelRcond)) {
    std::ostringstream msg;
    msg << "solve_proxy: columns f~(x, u=0) and f~(x, u=1) are collinear (reciprocal condition " << rcond << ")";
    throw IdentificationError(msg.str());
  }
  Eigen::HouseholderQR<MatrixXd> qr(fit.x_u);
  ProxySolution out;
  const MatrixXd coef = qr.solve(pzx.transpose());  // 2(u) x 2(z)
  out.z_given_u = coef.transpose();
  out.residual = (fit.x_u * coef - pzx.transpose()).cwiseAbs().maxCoeff();
  for (int u = 0; u < 2; ++u) {
    for (int z = 0; z < 2; ++z) {
      double& v = out.z_given_u(z, u);
      if (v < -kBoundaryTolerance)
        throw IdentificationError("solve_proxy: no admissible f~(z | u); a probability came out negative");
      v = std::max(v, 0.0);
    }
    out.z_given_u.col(u) /= out.z_given_u.col(u).sum();
  }
  return out;
}

OutcomeTables solve_outcome(const AdmissibleFit& fit, const OutcomeTables& py_given_xz) {
  if (!fit.z_given_u) throw InputError("solve_outcome: f~(z | u) not available; run solve_proxy first");
  const Matrix2d& zu = *fit.z_given_u;
  const Index cells = fit.x_u.rows();
  const Index ny = py_given_xz[0].rows();
  for (const auto& t : py_given_xz)
    if (t.rows() != ny || t.cols() != cells) throw InputError("solve_outcome: f(y | x, z) has the wrong shape");

  OutcomeTables out{MatrixXd(ny, cells), MatrixXd(ny, cells)};
  for (Index x = 0; x < cells; ++x) {
    Matrix2d kernel;  // (z, u) = f~(u | x, z)
    for (int z = 0; z < 2; ++z) {
      for (int u = 0; u < 2; ++u) kernel(z, u) = fit.x_u(x, u) * zu(z, u);
      const double norm = kernel.row(z).sum();
      if (!(norm > 0.0)) throw IdentificationError("solve_outcome: f~(x, z) vanishes");
      kernel.row(z) /= norm;
    }
    const double rcond = inverse_condition(kernel);
    if (!(rcond > kKernelRcond)) {
      std::ostringstream msg;
      msg << "completeness fails at x=" << x << ": f~(u | x, z) does not vary with z (reciprocal condition "
          << rcond << ")";
      throw IdentificationError(msg.str());
    }
    const auto lu = kernel.partialPivLu();
    for (Index y = 0; y < ny; ++y) {
      const Vector2d rhs(py_given_xz[0](y, x), py_given_xz[1](y, x));
      Vector2d sol = lu.solve(rhs);
      for (int u = 0; u < 2; ++u) {
        if (sol(u) < -kBoundaryTolerance || sol(u) > 1.0 + kBoundaryTolerance) {
          std::ostringstream msg;
          msg << "f~(y | u, x) solution " << sol(u) << " at (y=" << y << ", u=" << u << ", x=" << x
              << ") is not a probability: evidence against the auxiliary-variable assumptions";
          throw IdentificationError(msg.str());
        }
        out[static_cast<std::size_t>(u)](y, x) = std::clamp(sol(u), 0.0, 1.0);
      }
    }
    for (auto& t : out) t.col(x) /= t.col(x).sum();
  }
  return out;
}

MatrixXd g_formula(const AdmissibleFit& fit) {
  if (!fit.y_given_ux) throw InputError("g_formula: f~(y | u, x) not available; run solve_outcome first");
  const auto& t = *fit.y_given_ux;
  return fit.weights(0) * t[0] + fit.weights(1) * t[1];
}

SharpNullResult test_sharp_null_discrete(const AdmissibleFit& fit, const MatrixXd& py_given_x) {
  const Index cells = fit.x_u.rows();
  const Index ny = py_given_x.rows();
  if (py_given_x.cols() != cells) throw InputError("sharp-null test: f(y | x) has the wrong shape");
  SharpNullResult result;
  if (fit.weights.minCoeff() > 0.0)
    for (int j = 0; j < fit.p; ++j)
      if (std::abs(fit.success(0, j) - fit.success(1, j)) > 1e-8) result.confounded.push_back(j);
  if (result.confounded.empty())
    throw InputError("sharp-null test needs at least one confounded treatment (|C| >= q = 1)");

  const VectorXd fx = fit.x_u.rowwise().sum();
  const VectorXd fy = py_given_x * fx;
  for (int s : result.confounded) {
    for (Index x0 = 0; x0 < cells; ++x0) {
      if (bit(x0, s)) continue;
      const Index x1 = x0 | (Index{1} << s);
      Matrix2d kernel;  // (x_s, u) = f~(u | x)
      kernel.row(0) = fit.x_u.row(x0) / fx(x0);
      kernel.row(1) = fit.x_u.row(x1) / fx(x1);
      const double rcond = inverse_condition(kernel);
      if (!(rcond > kKernelRcond)) {
        std::ostringstream msg;
        msg << "sharp-null test: f~(u | x) does not vary with treatment " << s + 1 << " (reciprocal condition "
            << rcond << ")";
        throw IdentificationError(msg.str());
      }
      const auto lu = kernel.partialPivLu();
      MatrixXd sol(ny, 2);
      for (Index y = 0; y < ny; ++y) sol.row(y) = lu.solve(Vector2d(py_given_x(y, x0), py_given_x(y, x1))).transpose();
      // The system is square, so existence means a solution that is a valid
      // conditional distribution: clip, renormalise, and check the fit.
      MatrixXd clipped = sol.cwiseMax(0.0).cwiseMin(1.0);
      for (int u = 0; u < 2; ++u) {
        const double mass = clipped.col(u).sum();
        if (mass > 0.0) clipped.col(u) /= mass;
      }
      for (Index y = 0; y < ny; ++y) {
        const Vector2d fitted = kernel * clipped.row(y).transpose();
        const double resid = std::max(std::abs(fitted(0) - py_given_x(y, x0)), std::abs(fitted(1) - py_given_x(y, x1)));
        if (resid > kBoundaryTolerance) result.exists = false;
        const double implied = sol(y, 0) * fit.weights(0) + sol(y, 1) * fit.weights(1);
        result.discrepancy = std::max(result.discrepancy, std::abs(fy(y) - implied));
      }
    }
  }
  return result;
}

AdmissibleFit identify(const DiscreteJoint& joint, const MixtureOptions& options) {
  AdmissibleFit fit = fit_mixture(joint.px(), joint.p(), options);
  fit.z_given_u = solve_proxy(fit, joint.pzx()).z_given_u;
  fit.y_given_ux = solve_outcome(fit, joint.py_given_xz());
  return fit;
}

std::string to_json(const DiscreteJoint& joint) {
  const int p = joint.p();
  // Axis j of the nested array is X_j; the flat index stores X_j in bit j.
  std::function<nlohmann::json(int, int, Index)> nest = [&](int y, int depth, Index x) -> nlohmann::json {
    if (depth == p) {
      nlohmann::json uz = nlohmann::json::array();
      for (int u = 0; u < 2; ++u) uz.push_back({joint.at(y, x, u, 0), joint.at(y, x, u, 1)});
      return uz;
    }
    return nlohmann::json::array({nest(y, depth + 1, x), nest(y, depth + 1, x | (Index{1} << depth))});
  };
  nlohmann::json table = nlohmann::json::array();
  for (int y = 0; y < joint.ny(); ++y) table.push_back(nest(y, 0, 0));
  nlohmann::json doc{{"axes", "y,x1..xp,u,z"}, {"p", p}, {"ny", joint.ny()}, {"table", table}};
  return doc.dump(2);
}

DiscreteJoint joint_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("discrete joint JSON: ") + e.what());
  }
  const nlohmann::json& table = doc.contains("table") ? doc["table"] : doc;
  if (!table.is_array() || table.empty()) throw InputError("discrete joint JSON: table must be a non-empty array");
  int depth = 0;
  for (const nlohmann::json* node = &table; node->is_array(); node = &(*node)[0]) {
    if (node->empty()) throw InputError("discrete joint JSON: empty axis");
    ++depth;
  }
  const int p = depth - 3;
  if (p < 1) throw InputError("discrete joint JSON: need axes y, x1..xp, u, z");
  const auto ny = static_cast<int>(table.size());
  const Index cells = Index{1} << p;
  std::vector<double> prob(static_cast<std::size_t>(ny) * static_cast<std::size_t>(cells) * 4);
  std::function<void(const nlohmann::json&, int, int, Index)> walk = [&](const nlohmann::json& node, int y, int axis,
                                                                          Index x) {
    if (!node.is_array() || node.size() != 2) throw InputError("discrete joint JSON: binary axes must have length 2");
    if (axis == p) {
      for (int u = 0; u < 2; ++u) {
        const auto& zs = node[static_cast<std::size_t>(u)];
        if (!zs.is_array() || zs.size() != 2) throw InputError("discrete joint JSON: z axis must have length 2");
        for (int z = 0; z < 2; ++z) {
          if (!zs[static_cast<std::size_t>(z)].is_number()) throw InputError("discrete joint JSON: non-numeric cell");
          const std::size_t k =
              ((static_cast<std::size_t>(y) * static_cast<std::size_t>(cells) + static_cast<std::size_t>(x)) * 2 +
               static_cast<std::size_t>(u)) * 2 + static_cast<std::size_t>(z);
          prob[k] = zs[static_cast<std::size_t>(z)].get<double>();
        }
      }
      return;
    }
    walk(node[0], y, axis + 1, x);
    walk(node[1], y, axis + 1, x | (Index{1} << axis));
  };
  for (int y = 0; y < ny; ++y) walk(table[static_cast<std::size_t>(y)], y, 0, 0);
  return DiscreteJoint(p, ny, std::move(prob));
}

}  // namespace multicause::discrete
