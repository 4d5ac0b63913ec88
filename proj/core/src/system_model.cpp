#include "clab/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace clab {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

}  // namespace

double fd_step(const Vec& u) { return 1e-6 * std::max(1.0, u.norm()); }

// ---------------------------------------------------------------- System ---

std::optional<std::string> System::violation(const Vec& u) const {
  if (u.size() != dim())
    return "state has " + std::to_string(u.size()) + " components, system expects " + std::to_string(dim());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (!std::isfinite(u[i])) return "component " + std::to_string(i) + " is not finite";
  return std::nullopt;
}

void System::require_admissible(const Vec& u, const char* where) const {
  if (auto v = violation(u)) throw Error(ErrorKind::Domain, where, name() + ": " + *v);
}

Mat System::jacobian(const Vec& u) const { return fd_jacobian(*this, u); }
Vec System::entropy_grad(const Vec& u) const { return fd_entropy_grad(*this, u); }
Vec System::entropy_flux_grad(const Vec& u) const { return fd_entropy_flux_grad(*this, u); }

Mat System::entropy_hess(const Vec& u) const {
  const int n = dim();
  const double h = fd_step(u);
  Mat H(n, n);
  for (int j = 0; j < n; ++j) {
    Vec up = u, um = u;
    up[j] += h;
    um[j] -= h;
    H.col(j) = (entropy_grad(up) - entropy_grad(um)) / (2 * h);
  }
  return 0.5 * (H + H.transpose());
}

Vec System::eigenvalues(const Vec& u) const { return eigen_solver_speeds(jacobian(u)); }

Vec System::first_eigenvector(const Vec& u) const {
  Eigen::EigenSolver<Mat> es(jacobian(u));
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i].real() < es.eigenvalues()[best].real()) best = i;
  Vec r = es.eigenvectors().col(best).real();
  return r / r.norm();
}

std::vector<std::pair<Vec, double>> System::contact_probes(const Vec&, int) const { return {}; }

Mat fd_jacobian(const System& sys, const Vec& u) {
  const int n = sys.dim();
  const double h = fd_step(u);
  Mat J(n, n);
  for (int j = 0; j < n; ++j) {
    Vec up = u, um = u;
    up[j] += h;
    um[j] -= h;
    J.col(j) = (sys.flux(up) - sys.flux(um)) / (2 * h);
  }
  return J;
}

Vec fd_entropy_grad(const System& sys, const Vec& u) {
  const int n = sys.dim();
  const double h = fd_step(u);
  Vec g(n);
  for (int j = 0; j < n; ++j) {
    Vec up = u, um = u;
    up[j] += h;
    um[j] -= h;
    g[j] = (sys.entropy(up) - sys.entropy(um)) / (2 * h);
  }
  return g;
}

Vec fd_entropy_flux_grad(const System& sys, const Vec& u) {
  const int n = sys.dim();
  const double h = fd_step(u);
  Vec g(n);
  for (int j = 0; j < n; ++j) {
    Vec up = u, um = u;
    up[j] += h;
    um[j] -= h;
    g[j] = (sys.entropy_flux(up) - sys.entropy_flux(um)) / (2 * h);
  }
  return g;
}

Vec eigen_solver_speeds(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a, false);
  if (es.info() != Eigen::Success)
    throw Error(ErrorKind::Hyperbolicity, "system_model.eigenvalues", "eigen decomposition failed");
  Vec l(a.rows());
  for (Eigen::Index i = 0; i < l.size(); ++i) {
    auto z = es.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-10 * (1.0 + std::abs(z.real())))
      throw Error(ErrorKind::Hyperbolicity, "system_model.eigenvalues",
                  "complex characteristic speed " + fmt(z.real()) + "+" + fmt(z.imag()) + "i");
    l[i] = z.real();
  }
  std::sort(l.data(), l.data() + l.size());
  return l;
}

// --------------------------------------------------------------- Burgers ---

std::optional<std::string> Burgers::violation(const Vec& u) const { return System::violation(u); }
Vec Burgers::flux(const Vec& u) const { return make_state({0.5 * u[0] * u[0]}); }
double Burgers::entropy(const Vec& u) const { return 0.5 * u[0] * u[0]; }
double Burgers::entropy_flux(const Vec& u) const { return u[0] * u[0] * u[0] / 3.0; }
Mat Burgers::jacobian(const Vec& u) const { return Mat::Constant(1, 1, u[0]); }
Vec Burgers::entropy_grad(const Vec& u) const { return make_state({u[0]}); }
Mat Burgers::entropy_hess(const Vec&) const { return Mat::Constant(1, 1, 1.0); }
Vec Burgers::entropy_flux_grad(const Vec& u) const { return make_state({u[0] * u[0]}); }
Vec Burgers::eigenvalues(const Vec& u) const { return make_state({u[0]}); }
Vec Burgers::first_eigenvector(const Vec&) const { return make_state({1.0}); }

// ------------------------------------------------------ IsentropicEuler ---

IsentropicEuler::IsentropicEuler(double gamma, double kappa) : gamma_(gamma), kappa_(kappa) {
  if (!(gamma > 1.0))
    throw Error(ErrorKind::Parameter, "system_model.gamma", "isentropic Euler needs gamma > 1, got " + fmt(gamma));
  if (!(kappa > 0.0))
    throw Error(ErrorKind::Parameter, "system_model.kappa", "isentropic Euler needs kappa > 0, got " + fmt(kappa));
}

std::optional<std::string> IsentropicEuler::violation(const Vec& u) const {
  if (auto v = System::violation(u)) return v;
  if (u[0] < kDensityFloor) return "density " + fmt(u[0]) + " below floor 1e-10";
  return std::nullopt;
}

double IsentropicEuler::pressure(const Vec& u) const { return kappa_ * std::pow(u[0], gamma_); }

double IsentropicEuler::sound_speed(const Vec& u) const {
  return std::sqrt(gamma_ * kappa_ * std::pow(u[0], gamma_ - 1.0));
}

Vec IsentropicEuler::flux(const Vec& u) const {
  const double rho = u[0], m = u[1];
  return make_state({m, m * m / rho + pressure(u)});
}

double IsentropicEuler::entropy(const Vec& u) const {
  const double rho = u[0], m = u[1];
  return 0.5 * m * m / rho + kappa_ * std::pow(rho, gamma_) / (gamma_ - 1.0);
}

double IsentropicEuler::entropy_flux(const Vec& u) const {
  return u[1] / u[0] * (entropy(u) + pressure(u));
}

Mat IsentropicEuler::jacobian(const Vec& u) const {
  const double v = u[1] / u[0], c = sound_speed(u);
  Mat J(2, 2);
  J << 0.0, 1.0, c * c - v * v, 2.0 * v;
  return J;
}

Vec IsentropicEuler::entropy_grad(const Vec& u) const {
  const double v = u[1] / u[0];
  const double h = kappa_ * gamma_ / (gamma_ - 1.0) * std::pow(u[0], gamma_ - 1.0);
  return make_state({-0.5 * v * v + h, v});
}

Mat IsentropicEuler::entropy_hess(const Vec& u) const {
  const double rho = u[0], v = u[1] / u[0];
  Mat H(2, 2);
  H << v * v / rho + kappa_ * gamma_ * std::pow(rho, gamma_ - 2.0), -v / rho, -v / rho, 1.0 / rho;
  return H;
}

Vec IsentropicEuler::entropy_flux_grad(const Vec& u) const {
  // q = v (eta + p): product rule with grad v = (-v/rho, 1/rho).
  const double rho = u[0], v = u[1] / u[0];
  const double e = entropy(u) + pressure(u);
  Vec gv = make_state({-v / rho, 1.0 / rho});
  Vec gp = make_state({gamma_ * kappa_ * std::pow(rho, gamma_ - 1.0), 0.0});
  return e * gv + v * (entropy_grad(u) + gp);
}

Vec IsentropicEuler::eigenvalues(const Vec& u) const {
  const double v = u[1] / u[0], c = sound_speed(u);
  return make_state({v - c, v + c});
}

Vec IsentropicEuler::first_eigenvector(const Vec& u) const {
  const double v = u[1] / u[0], c = sound_speed(u);
  Vec r = make_state({1.0, v - c});
  return r / r.norm();
}

// ------------------------------------------------------------ FullEuler ---

FullEuler::FullEuler(double gamma) : gamma_(gamma) {
  if (!(gamma > 1.0))
    throw Error(ErrorKind::Parameter, "system_model.gamma", "full Euler needs gamma > 1, got " + fmt(gamma));
}

std::optional<std::string> FullEuler::violation(const Vec& u) const {
  if (auto v = System::violation(u)) return v;
  if (u[0] < kDensityFloor) return "density " + fmt(u[0]) + " below floor 1e-10";
  const double p = pressure(u);
  if (!(p >= kDensityFloor)) return "pressure " + fmt(p) + " below floor 1e-10";
  return std::nullopt;
}

double FullEuler::pressure(const Vec& u) const {
  return (gamma_ - 1.0) * (u[2] - 0.5 * u[1] * u[1] / u[0]);
}

double FullEuler::sound_speed(const Vec& u) const { return std::sqrt(gamma_ * pressure(u) / u[0]); }

Vec FullEuler::from_primitive(double rho, double v, double p) const {
  return make_state({rho, rho * v, p / (gamma_ - 1.0) + 0.5 * rho * v * v});
}

Vec FullEuler::flux(const Vec& u) const {
  const double v = u[1] / u[0], p = pressure(u);
  return make_state({u[1], u[1] * v + p, (u[2] + p) * v});
}

double FullEuler::entropy(const Vec& u) const {
  const double s = std::log(pressure(u)) - gamma_ * std::log(u[0]);
  return -u[0] * s / (gamma_ - 1.0);
}

double FullEuler::entropy_flux(const Vec& u) const { return u[1] / u[0] * entropy(u); }

Mat FullEuler::jacobian(const Vec& u) const {
  const double g = gamma_, v = u[1] / u[0];
  const double H = (u[2] + pressure(u)) / u[0];
  Mat J(3, 3);
  J << 0.0, 1.0, 0.0,
       0.5 * (g - 3.0) * v * v, (3.0 - g) * v, g - 1.0,
       v * (0.5 * (g - 1.0) * v * v - H), H - (g - 1.0) * v * v, g * v;
  return J;
}

Vec FullEuler::entropy_grad(const Vec& u) const {
  const double g = gamma_, rho = u[0], v = u[1] / u[0], p = pressure(u);
  const double s = std::log(p) - g * std::log(rho);
  return make_state({(g - s) / (g - 1.0) - 0.5 * rho * v * v / p, rho * v / p, -rho / p});
}

Mat FullEuler::entropy_hess(const Vec& u) const {
  // Differentiate the entropy variables w(u) through p(u) and s(u).
  const double g = gamma_, rho = u[0], m = u[1], v = m / rho, p = pressure(u);
  const double dp[3] = {0.5 * (g - 1.0) * v * v, -(g - 1.0) * v, g - 1.0};
  const double ds[3] = {dp[0] / p - g / rho, dp[1] / p, dp[2] / p};
  const double K = 0.5 * m * v;
  const double dK[3] = {-0.5 * v * v, v, 0.0};
  Mat Hs(3, 3);
  for (int j = 0; j < 3; ++j) {
    Hs(0, j) = -ds[j] / (g - 1.0) - dK[j] / p + K * dp[j] / (p * p);
    Hs(1, j) = (j == 1 ? 1.0 / p : 0.0) - m * dp[j] / (p * p);
    Hs(2, j) = (j == 0 ? -1.0 / p : 0.0) + rho * dp[j] / (p * p);
  }
  return 0.5 * (Hs + Hs.transpose());
}

Vec FullEuler::entropy_flux_grad(const Vec& u) const {
  const double rho = u[0], v = u[1] / u[0];
  Vec gv = make_state({-v / rho, 1.0 / rho, 0.0});
  return entropy(u) * gv + v * entropy_grad(u);
}

Vec FullEuler::eigenvalues(const Vec& u) const {
  const double v = u[1] / u[0], c = sound_speed(u);
  return make_state({v - c, v, v + c});
}

Vec FullEuler::first_eigenvector(const Vec& u) const {
  const double v = u[1] / u[0], c = sound_speed(u);
  const double H = (u[2] + pressure(u)) / u[0];
  Vec r = make_state({1.0, v - c, H - v * c});
  return r / r.norm();
}

std::vector<std::pair<Vec, double>> FullEuler::contact_probes(const Vec& u, int count) const {
  // Same velocity and pressure, different density; travels at v.
  std::vector<std::pair<Vec, double>> out;
  const double rho = u[0], v = u[1] / u[0], p = pressure(u);
  for (int k = 1; k <= count; ++k) {
    const double f = 0.5 + 1.5 * k / count;
    if (std::abs(f - 1.0) < 1e-12) continue;
    out.emplace_back(from_primitive(rho * f, v, p), v);
  }
  return out;
}

// -------------------------------------------------------- GenericSystem ---

GenericSystem::GenericSystem(GenericSpec spec) : spec_(std::move(spec)) {
  if (spec_.dim < 1 || spec_.dim > kMaxDim)
    throw Error(ErrorKind::Parameter, "system_model.dim", "dimension must be in [1, 4]");
  if (!spec_.flux || !spec_.entropy || !spec_.entropy_flux)
    throw Error(ErrorKind::Parameter, "system_model.generic", "flux, entropy and entropy_flux are required");
}

std::optional<std::string> GenericSystem::violation(const Vec& u) const {
  if (auto v = System::violation(u)) return v;
  if (spec_.violation) return spec_.violation(u);
  return std::nullopt;
}

Vec GenericSystem::flux(const Vec& u) const { return spec_.flux(u); }
double GenericSystem::entropy(const Vec& u) const { return spec_.entropy(u); }
double GenericSystem::entropy_flux(const Vec& u) const { return spec_.entropy_flux(u); }
Mat GenericSystem::jacobian(const Vec& u) const {
  return spec_.jacobian ? spec_.jacobian(u) : System::jacobian(u);
}
Vec GenericSystem::entropy_grad(const Vec& u) const {
  return spec_.entropy_grad ? spec_.entropy_grad(u) : System::entropy_grad(u);
}
Mat GenericSystem::entropy_hess(const Vec& u) const {
  return spec_.entropy_hess ? spec_.entropy_hess(u) : System::entropy_hess(u);
}

Vec ReflectedSystem::eigenvalues(const Vec& u) const {
  Vec l = inner_->eigenvalues(u);
  Vec r(l.size());
  for (Eigen::Index i = 0; i < l.size(); ++i) r[i] = -l[l.size() - 1 - i];
  return r;
}

SystemPtr make_system(const std::string& name, double gamma, double kappa) {
  if (name == "burgers") return std::make_shared<Burgers>();
  if (name == "isentropic_euler") return std::make_shared<IsentropicEuler>(gamma, kappa);
  if (name == "full_euler") return std::make_shared<FullEuler>(gamma);
  throw Error(ErrorKind::Parameter, "system_model.system",
              "unknown system '" + name + "' (expected burgers, isentropic_euler or full_euler)");
}

CompatibilityReport check_compatibility(const System& sys, const std::vector<Vec>& samples, double tol) {
  CompatibilityReport rep;
  rep.tol = tol;
  rep.n_samples = samples.size();
  rep.closed_form_grad_q = sys.has_closed_form_entropy_flux_grad();
  for (const Vec& u : samples) {
    sys.require_admissible(u, "system_model.check_compatibility");
    Vec gq = rep.closed_form_grad_q ? sys.entropy_flux_grad(u) : fd_entropy_flux_grad(sys, u);
    Vec rhs = (sys.entropy_grad(u).transpose() * sys.jacobian(u)).transpose();
    rep.max_residual = std::max(rep.max_residual, (gq - rhs).cwiseAbs().maxCoeff());
  }
  rep.pass = rep.max_residual < tol;
  return rep;
}

}  // namespace clab
