#pragma once

#include <string>
#include <string_view>

namespace psd {

enum class KernelKind { SE, Matern };

[[nodiscard]] std::string to_string(KernelKind kind);
[[nodiscard]] KernelKind kernel_kind_from_string(std::string_view name);

struct KernelHyperparams {
  KernelKind kind = KernelKind::SE;
  double sigma_f = 1.0;
  double ell = 0.1;
  // Matern smoothness; ignored by SE.
  double nu = 1.5;

  void validate() const;
};

// Stationary covariance k(r - r'). Matern uses closed forms for
// nu in {1/2, 3/2, 5/2} and the modified Bessel function otherwise.
[[nodiscard]] double covariance(const KernelHyperparams& params, double r, double r_prime);

// One-dimensional spectral density S(omega) = integral k(t) exp(-i omega t) dt.
[[nodiscard]] double spectral_density(const KernelHyperparams& params, double omega);

// log S(omega); finite where S itself would underflow.
[[nodiscard]] double log_spectral_density(const KernelHyperparams& params, double omega);

}  // namespace psd
