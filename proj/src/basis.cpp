#include "psd/basis.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "psd/errors.hpp"

namespace psd {
namespace {

// Points a rounding error outside [-L, L] are accepted and evaluated as-is.
constexpr double kEdgeSlack = 1e-12;

void require_in_domain(double x, double half_width, const char* who) {
  if (std::abs(x) > half_width * (1.0 + kEdgeSlack))
    throw DomainError(std::string(who) + ": centred coordinate " + std::to_string(x) +
                      " lies outside the basis domain [-" + std::to_string(half_width) + ", " +
                      std::to_string(half_width) + "]");
}

}  // namespace

void DomainSpec::validate() const {
  if (!(r_min > 0.0) || !(r_max > r_min))
    throw DomainError("domain needs 0 < r_min < r_max");
  if (!(half_width_factor >= 0.5))
    throw DomainError("half_width_factor must be >= 0.5 so the basis covers the data, got " +
                      std::to_string(half_width_factor));
}

double eigenvalue(int j, double half_width) {
  if (j < 1) throw DomainError("eigenvalue index must be >= 1, got " + std::to_string(j));
  if (!(half_width > 0.0)) throw DomainError("basis half-width must be positive");
  const double s = j * std::numbers::pi / (2.0 * half_width);
  return s * s;
}

double phi(int j, double x, double half_width) {
  if (j < 1) throw DomainError("basis index must be >= 1, got " + std::to_string(j));
  if (!(half_width > 0.0)) throw DomainError("basis half-width must be positive");
  require_in_domain(x, half_width, "phi");
  return std::sin(j * std::numbers::pi * (x + half_width) / (2.0 * half_width)) /
         std::sqrt(half_width);
}

Eigen::VectorXd spectral_diagonal(const Eigen::VectorXd& eigenvalues, const KernelHyperparams& kernel) {
  kernel.validate();
  Eigen::VectorXd out(eigenvalues.size());
  for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
    const double s = spectral_density(kernel, std::sqrt(eigenvalues[j]));
    out[j] = std::max(s, std::numeric_limits<double>::min());
  }
  return out;
}

BasisExpansion::BasisExpansion(DomainSpec domain, int q, KernelHyperparams kernel)
    : domain_(domain), q_(q), kernel_(kernel) {
  domain_.validate();
  if (q < 1) throw DomainError("number of basis functions must be >= 1, got " + std::to_string(q));
  eigenvalues_.resize(q);
  for (int j = 1; j <= q; ++j) eigenvalues_[j - 1] = eigenvalue(j, domain_.half_width());
  lambda_diag_ = spectral_diagonal(eigenvalues_, kernel_);
}

BasisExpansion BasisExpansion::with_kernel(const KernelHyperparams& kernel) const {
  BasisExpansion copy = *this;
  copy.kernel_ = kernel;
  copy.lambda_diag_ = spectral_diagonal(eigenvalues_, kernel);
  return copy;
}

BasisExpansion build_expansion(const DomainSpec& domain, int q, const KernelHyperparams& kernel) {
  return BasisExpansion(domain, q, kernel);
}

Eigen::MatrixXd phi_matrix(const BasisExpansion& expansion, std::span<const double> radii) {
  const double L = expansion.half_width();
  const double c = expansion.center();
  const int q = expansion.q();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(radii.size()), q);
  const double norm = 1.0 / std::sqrt(L);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const double x = radii[k] - c;
    if (std::abs(x) > L * (1.0 + kEdgeSlack))
      throw DomainError("phi_matrix: radius " + std::to_string(radii[k]) + " at index " +
                        std::to_string(k) + " lies outside the basis domain");
    const double theta = std::numbers::pi * (x + L) / (2.0 * L);
    for (int j = 1; j <= q; ++j) out(static_cast<Eigen::Index>(k), j - 1) = norm * std::sin(j * theta);
  }
  return out;
}

Eigen::VectorXd basis_integral(const BasisExpansion& expansion, double a, double b) {
  if (!(a < b)) throw DomainError("basis_integral needs a < b");
  const double L = expansion.half_width();
  const double xa = a - expansion.center();
  const double xb = b - expansion.center();
  require_in_domain(xa, L, "basis_integral");
  require_in_domain(xb, L, "basis_integral");
  const double ta = std::numbers::pi * (xa + L) / (2.0 * L);
  const double tb = std::numbers::pi * (xb + L) / (2.0 * L);
  Eigen::VectorXd out(expansion.q());
  for (int j = 1; j <= expansion.q(); ++j) {
    const double k = 2.0 * L / (j * std::numbers::pi);
    out[j - 1] = k * (std::cos(j * ta) - std::cos(j * tb)) / std::sqrt(L);
  }
  return out;
}

}  // namespace psd
