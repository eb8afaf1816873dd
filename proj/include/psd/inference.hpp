#pragma once

#include <optional>

#include <Eigen/Dense>

#include "psd/basis.hpp"
#include "psd/grids.hpp"
#include "psd/kernels.hpp"

namespace psd {

// Basis-space forward model: mu = psi_A alpha + noise, psi_B alpha = targets.
struct ForwardOperators {
  Eigen::MatrixXd psi_A;              // n x q
  Eigen::MatrixXd psi_B;              // k x q, normally the single row h^T
  Eigen::VectorXd constraint_targets; // k, normally {1}
  double sigma_noise = 1.0;
  double constraint_jitter = 0.0;

  void validate(int q) const;
};

// Full covariance is kept up to this many output points, the diagonal beyond.
inline constexpr Eigen::Index kFullCovarianceLimit = 1024;

struct PosteriorResult {
  Eigen::VectorXd alpha_mean;
  Eigen::MatrixXd alpha_cov;
  std::optional<double> lagrange_c;
  Eigen::VectorXd radii;
  Eigen::VectorXd rho_mean;
  // p x p, or p x 1 holding only the variances when cov_is_diagonal.
  Eigen::MatrixXd rho_cov;
  bool cov_is_diagonal = false;
  double sum_rho = 0.0;

  [[nodiscard]] Eigen::VectorXd rho_variance() const;
  [[nodiscard]] Eigen::VectorXd lower95() const;
  [[nodiscard]] Eigen::VectorXd upper95() const;
  // Fraction of total absolute mass carried by negative excursions.
  [[nodiscard]] double negative_mass_fraction(const SizeGrid& grid) const;
};

// Psi_A[i][j] = sum_k A[i][k] Phi[k][j] w_k.
[[nodiscard]] Eigen::MatrixXd project_forward(const Eigen::MatrixXd& kernel,
                                              const Eigen::MatrixXd& phi_quadrature,
                                              const Eigen::VectorXd& weights);

// How the normalization row h_j = integral phi_j(r) dr is evaluated. The
// quadrature row uses the same weights as sum_rho, so a constrained estimate
// integrates to exactly one under that quadrature; the analytic row is exact
// for the continuous basis.
enum class ConstraintRow { Quadrature, Analytic };

// psi_A from the Fredholm kernel on the quadrature grid; psi_B over the
// physical support [r_min, r_max].
[[nodiscard]] ForwardOperators make_operators(const Eigen::MatrixXd& kernel, const SizeGrid& quadrature,
                                              const BasisExpansion& expansion, double sigma_noise,
                                              double constraint_jitter = 0.0,
                                              ConstraintRow row = ConstraintRow::Quadrature);

// Posterior given the measurements only, in the q x q (Woodbury) form.
[[nodiscard]] PosteriorResult posterior_unconstrained(const ForwardOperators& ops,
                                                      const BasisExpansion& expansion,
                                                      const SizeGrid& output,
                                                      const Eigen::VectorXd& mu);

// Posterior given the measurements and the normalization pseudo-observation
// psi_B alpha = targets with variance constraint_jitter (exact when zero).
[[nodiscard]] PosteriorResult posterior_constrained(const ForwardOperators& ops,
                                                    const BasisExpansion& expansion,
                                                    const SizeGrid& output,
                                                    const Eigen::VectorXd& mu);

// Minimiser of the normalization-constrained regularised least-squares
// objective via its Lagrange multiplier.
[[nodiscard]] PosteriorResult map_lagrange(const ForwardOperators& ops,
                                           const BasisExpansion& expansion,
                                           const SizeGrid& output,
                                           const Eigen::VectorXd& mu);

// Dense-grid reference posterior built from the full Gram matrix on `grid`
// and the quadrature-discretized measurement and normalization operators.
// Refuses grids above kDenseOracleLimit points.
inline constexpr std::size_t kDenseOracleLimit = 512;

[[nodiscard]] PosteriorResult posterior_dense_oracle(const KernelHyperparams& kernel,
                                                     const Eigen::MatrixXd& kernel_matrix,
                                                     const SizeGrid& grid,
                                                     const Eigen::VectorXd& mu, double sigma2,
                                                     bool constrained);

[[nodiscard]] Eigen::VectorXd predict_measurements(const ForwardOperators& ops,
                                                   const Eigen::VectorXd& alpha);

}  // namespace psd
