#include "psd/kernels.hpp"

#include <cmath>
#include <numbers>

#include "psd/errors.hpp"

namespace psd {

std::string to_string(KernelKind kind) { return kind == KernelKind::SE ? "se" : "matern"; }

KernelKind kernel_kind_from_string(std::string_view name) {
  if (name == "se" || name == "SE") return KernelKind::SE;
  if (name == "matern" || name == "Matern") return KernelKind::Matern;
  throw DomainError("unknown kernel kind '" + std::string(name) + "' (expected se|matern)");
}

void KernelHyperparams::validate() const {
  if (!(sigma_f > 0.0) || !std::isfinite(sigma_f))
    throw DomainError("kernel sigma_f must be positive, got " + std::to_string(sigma_f));
  if (!(ell > 0.0) || !std::isfinite(ell))
    throw DomainError("kernel length scale must be positive, got " + std::to_string(ell));
  if (kind == KernelKind::Matern && (!(nu > 0.0) || !std::isfinite(nu)))
    throw DomainError("Matern smoothness nu must be positive, got " + std::to_string(nu));
}

namespace {

double matern_unit(double nu, double d) {
  // Correlation at scaled lag d = |r| / ell.
  if (nu == 0.5) return std::exp(-d);
  if (nu == 1.5) {
    const double s = std::sqrt(3.0) * d;
    return (1.0 + s) * std::exp(-s);
  }
  if (nu == 2.5) {
    const double s = std::sqrt(5.0) * d;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
  }
  if (d == 0.0) return 1.0;
  const double s = std::sqrt(2.0 * nu) * d;
  // Far tail: K_nu underflows before the product does.
  if (s > 700.0) return 0.0;
  const double log_pref = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(s);
  return std::exp(log_pref) * std::cyl_bessel_k(nu, s);
}

}  // namespace

double covariance(const KernelHyperparams& params, double r, double r_prime) {
  params.validate();
  const double d = std::abs(r - r_prime) / params.ell;
  const double var = params.sigma_f * params.sigma_f;
  if (params.kind == KernelKind::SE) return var * std::exp(-0.5 * d * d);
  return var * matern_unit(params.nu, d);
}

double log_spectral_density(const KernelHyperparams& params, double omega) {
  params.validate();
  const double log_var = 2.0 * std::log(params.sigma_f);
  const double ell = params.ell;
  if (params.kind == KernelKind::SE) {
    return log_var + 0.5 * std::log(2.0 * std::numbers::pi) + std::log(ell) -
           0.5 * ell * ell * omega * omega;
  }
  const double nu = params.nu;
  const double log_const = std::log(2.0) + 0.5 * std::log(std::numbers::pi) + std::lgamma(nu + 0.5) +
                           nu * std::log(2.0 * nu) - std::lgamma(nu) - 2.0 * nu * std::log(ell);
  return log_var + log_const - (nu + 0.5) * std::log(2.0 * nu / (ell * ell) + omega * omega);
}

double spectral_density(const KernelHyperparams& params, double omega) {
  return std::exp(log_spectral_density(params, omega));
}

}  // namespace psd
