#pragma once

#include "clab/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace clab {

inline constexpr double kDensityFloor = 1e-10;

// A 1-D balance-law system with a strictly convex entropy pair (eta, q).
// Derived classes register closed forms; anything left out falls back to
// central differences with step 1e-6 * max(1, |u|).
class System {
public:
  virtual ~System() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;

  // Empty when u is admissible, otherwise the violated constraint.
  virtual std::optional<std::string> violation(const Vec& u) const;
  bool admissible(const Vec& u) const { return !violation(u); }
  void require_admissible(const Vec& u, const char* where) const;

  virtual Vec flux(const Vec& u) const = 0;
  virtual double entropy(const Vec& u) const = 0;
  virtual double entropy_flux(const Vec& u) const = 0;

  virtual Mat jacobian(const Vec& u) const;
  virtual Vec entropy_grad(const Vec& u) const;
  virtual Mat entropy_hess(const Vec& u) const;
  virtual Vec entropy_flux_grad(const Vec& u) const;
  // Ascending. The default diagonalises the Jacobian.
  virtual Vec eigenvalues(const Vec& u) const;
  // Right eigenvector of the smallest characteristic speed.
  virtual Vec first_eigenvector(const Vec& u) const;

  // Known linearly degenerate discontinuities from u as (u_R, speed). The
  // discontinuity sweep probes these on top of the traced shock curves.
  // Most systems have none.
  virtual std::vector<std::pair<Vec, double>> contact_probes(const Vec& u, int count) const;

  double lambda_min(const Vec& u) const { return eigenvalues(u)[0]; }
  double lambda_max(const Vec& u) const {
    Vec l = eigenvalues(u);
    return l[l.size() - 1];
  }
  double max_abs_speed(const Vec& u) const { return eigenvalues(u).cwiseAbs().maxCoeff(); }

  // Which derivatives have closed forms (false means finite differences).
  virtual bool has_closed_form_entropy_flux_grad() const { return false; }
};

using SystemPtr = std::shared_ptr<const System>;

double fd_step(const Vec& u);

class Burgers final : public System {
public:
  std::string name() const override { return "burgers"; }
  int dim() const override { return 1; }
  std::optional<std::string> violation(const Vec& u) const override;
  Vec flux(const Vec& u) const override;
  double entropy(const Vec& u) const override;
  double entropy_flux(const Vec& u) const override;
  Mat jacobian(const Vec& u) const override;
  Vec entropy_grad(const Vec& u) const override;
  Mat entropy_hess(const Vec& u) const override;
  Vec entropy_flux_grad(const Vec& u) const override;
  Vec eigenvalues(const Vec& u) const override;
  Vec first_eigenvector(const Vec& u) const override;
  bool has_closed_form_entropy_flux_grad() const override { return true; }
};

// (rho, rho v) with p = kappa rho^gamma and the mechanical energy as entropy.
class IsentropicEuler final : public System {
public:
  IsentropicEuler(double gamma, double kappa);
  std::string name() const override { return "isentropic_euler"; }
  int dim() const override { return 2; }
  double gamma() const { return gamma_; }
  double kappa() const { return kappa_; }
  std::optional<std::string> violation(const Vec& u) const override;
  double pressure(const Vec& u) const;
  double sound_speed(const Vec& u) const;
  Vec flux(const Vec& u) const override;
  double entropy(const Vec& u) const override;
  double entropy_flux(const Vec& u) const override;
  Mat jacobian(const Vec& u) const override;
  Vec entropy_grad(const Vec& u) const override;
  Mat entropy_hess(const Vec& u) const override;
  Vec entropy_flux_grad(const Vec& u) const override;
  Vec eigenvalues(const Vec& u) const override;
  Vec first_eigenvector(const Vec& u) const override;
  bool has_closed_form_entropy_flux_grad() const override { return true; }

private:
  double gamma_, kappa_;
};

// (rho, rho v, E) for a polytropic gas; eta = -rho s / (gamma - 1) with
// s = ln(p rho^-gamma), which is strictly convex in the conserved variables.
class FullEuler final : public System {
public:
  explicit FullEuler(double gamma);
  std::string name() const override { return "full_euler"; }
  int dim() const override { return 3; }
  double gamma() const { return gamma_; }
  std::optional<std::string> violation(const Vec& u) const override;
  double pressure(const Vec& u) const;
  double sound_speed(const Vec& u) const;
  Vec flux(const Vec& u) const override;
  double entropy(const Vec& u) const override;
  double entropy_flux(const Vec& u) const override;
  Mat jacobian(const Vec& u) const override;
  Vec entropy_grad(const Vec& u) const override;
  Mat entropy_hess(const Vec& u) const override;
  Vec entropy_flux_grad(const Vec& u) const override;
  Vec eigenvalues(const Vec& u) const override;
  Vec first_eigenvector(const Vec& u) const override;
  std::vector<std::pair<Vec, double>> contact_probes(const Vec& u, int count) const override;
  bool has_closed_form_entropy_flux_grad() const override { return true; }

  // Conserved state from (rho, v, p).
  Vec from_primitive(double rho, double v, double p) const;

private:
  double gamma_;
};

// A system assembled from callables. Only flux, entropy and entropy flux are
// mandatory; every missing derivative uses the finite-difference fallback.
struct GenericSpec {
  std::string name = "generic";
  int dim = 1;
  std::function<Vec(const Vec&)> flux;
  std::function<double(const Vec&)> entropy;
  std::function<double(const Vec&)> entropy_flux;
  std::function<Mat(const Vec&)> jacobian;
  std::function<Vec(const Vec&)> entropy_grad;
  std::function<Mat(const Vec&)> entropy_hess;
  std::function<std::optional<std::string>(const Vec&)> violation;
};

class GenericSystem final : public System {
public:
  explicit GenericSystem(GenericSpec spec);
  std::string name() const override { return spec_.name; }
  int dim() const override { return spec_.dim; }
  std::optional<std::string> violation(const Vec& u) const override;
  Vec flux(const Vec& u) const override;
  double entropy(const Vec& u) const override;
  double entropy_flux(const Vec& u) const override;
  Mat jacobian(const Vec& u) const override;
  Vec entropy_grad(const Vec& u) const override;
  Mat entropy_hess(const Vec& u) const override;

private:
  GenericSpec spec_;
};

// The same system with f -> -f and q -> -q. Its first family is the last
// family of the original, with speeds negated.
class ReflectedSystem final : public System {
public:
  explicit ReflectedSystem(SystemPtr inner) : inner_(std::move(inner)) {}
  std::string name() const override { return inner_->name() + "_reflected"; }
  int dim() const override { return inner_->dim(); }
  std::optional<std::string> violation(const Vec& u) const override { return inner_->violation(u); }
  Vec flux(const Vec& u) const override { return -inner_->flux(u); }
  double entropy(const Vec& u) const override { return inner_->entropy(u); }
  double entropy_flux(const Vec& u) const override { return -inner_->entropy_flux(u); }
  Mat jacobian(const Vec& u) const override { return -inner_->jacobian(u); }
  Vec entropy_grad(const Vec& u) const override { return inner_->entropy_grad(u); }
  Mat entropy_hess(const Vec& u) const override { return inner_->entropy_hess(u); }
  Vec entropy_flux_grad(const Vec& u) const override { return -inner_->entropy_flux_grad(u); }
  Vec eigenvalues(const Vec& u) const override;
  bool has_closed_form_entropy_flux_grad() const override {
    return inner_->has_closed_form_entropy_flux_grad();
  }

private:
  SystemPtr inner_;
};

SystemPtr make_system(const std::string& name, double gamma, double kappa);

// Finite-difference helpers, exposed for the audits and tests.
Mat fd_jacobian(const System& sys, const Vec& u);
Vec fd_entropy_grad(const System& sys, const Vec& u);
Vec fd_entropy_flux_grad(const System& sys, const Vec& u);
Vec eigen_solver_speeds(const Mat& a);

struct CompatibilityReport {
  double max_residual = 0.0;
  double tol = 0.0;
  std::size_t n_samples = 0;
  bool closed_form_grad_q = false;
  bool pass = false;
};

// max over samples of |grad q - grad eta . grad f|_inf. grad q comes from
// the registered closed form when there is one, otherwise from central
// differences of q.
CompatibilityReport check_compatibility(const System& sys, const std::vector<Vec>& samples, double tol);

}  // namespace clab
