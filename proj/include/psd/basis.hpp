#pragma once

#include <span>

#include <Eigen/Dense>

#include "psd/kernels.hpp"

namespace psd {

// Physical size support [r_min, r_max] and the factor c placing the
// Dirichlet basis on [-L, L] around the support midpoint, L = c (r_max - r_min).
struct DomainSpec {
  double r_min = 0.05;
  double r_max = 0.5;
  double half_width_factor = 1.0;

  void validate() const;
  [[nodiscard]] double center() const noexcept { return 0.5 * (r_min + r_max); }
  [[nodiscard]] double half_width() const noexcept { return half_width_factor * (r_max - r_min); }
};

// lambda_j = (j pi / (2 L))^2.
[[nodiscard]] double eigenvalue(int j, double half_width);

// phi_j(x) = sqrt(1 / L) sin(j pi (x + L) / (2 L)) on the centred coordinate x.
[[nodiscard]] double phi(int j, double x, double half_width);

// Reduced-rank representation k(r, r') ~ sum_j Lambda_j phi_j(r) phi_j(r').
class BasisExpansion {
 public:
  BasisExpansion(DomainSpec domain, int q, KernelHyperparams kernel);

  [[nodiscard]] int q() const noexcept { return q_; }
  [[nodiscard]] const DomainSpec& domain() const noexcept { return domain_; }
  [[nodiscard]] const KernelHyperparams& kernel() const noexcept { return kernel_; }
  [[nodiscard]] double center() const noexcept { return domain_.center(); }
  [[nodiscard]] double half_width() const noexcept { return domain_.half_width(); }
  [[nodiscard]] const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  // Prior variances S(sqrt(lambda_j)), floored at the smallest normal double.
  [[nodiscard]] const Eigen::VectorXd& lambda_diag() const noexcept { return lambda_diag_; }

  // Same basis, spectral diagonal re-evaluated for other hyperparameters.
  [[nodiscard]] BasisExpansion with_kernel(const KernelHyperparams& kernel) const;

 private:
  DomainSpec domain_;
  int q_;
  KernelHyperparams kernel_;
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd lambda_diag_;
};

[[nodiscard]] BasisExpansion build_expansion(const DomainSpec& domain, int q,
                                             const KernelHyperparams& kernel);

// Spectral diagonal for a kernel on the given Laplace eigenvalues.
[[nodiscard]] Eigen::VectorXd spectral_diagonal(const Eigen::VectorXd& eigenvalues,
                                                const KernelHyperparams& kernel);

// Phi[k][j] = phi_{j+1}(r_k - center).
[[nodiscard]] Eigen::MatrixXd phi_matrix(const BasisExpansion& expansion,
                                         std::span<const double> radii);

// Entry j: analytic integral of phi_{j+1} over radii [a, b].
[[nodiscard]] Eigen::VectorXd basis_integral(const BasisExpansion& expansion, double a, double b);

}  // namespace psd
