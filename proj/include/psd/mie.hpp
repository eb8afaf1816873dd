#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "psd/grids.hpp"

namespace psd {

using Complex = std::complex<double>;

// Optical constants of the particle suspension.
struct OpticsConfig {
  Complex n_particle{1.45, 0.0};
  double n_medium = 1.0;
  double volume_fraction = 0.05;
  // Extra Mie terms beyond the empirical truncation rule.
  int truncation_margin = 0;

  // Optional dispersion table for the particle index; empty means the scalar
  // n_particle is used at every wavelength. Linear interpolation, clamped at
  // the table ends.
  std::vector<double> index_wavelengths;
  std::vector<Complex> index_values;

  void validate() const;

  [[nodiscard]] Complex particle_index_at(double lambda) const;
  [[nodiscard]] Complex relative_index_at(double lambda) const {
    return particle_index_at(lambda) / n_medium;
  }
};

struct MieCoefficients {
  std::vector<Complex> a;  // electric multipoles, a[0] is n = 1
  std::vector<Complex> b;  // magnetic multipoles
};

// y = 2 pi n_medium r / lambda.
[[nodiscard]] double size_parameter(double r, double lambda, double n_medium);

// max(3, ceil(y + 4 y^(1/3) + 2) + margin).
[[nodiscard]] int truncation_order(double y, int margin = 0);

// Lorenz-Mie partial-wave amplitudes a_n, b_n for n = 1..n_terms of a
// homogeneous sphere with size parameter y and relative index m.
//
// The logarithmic derivative D_n(m y) is obtained by downward recurrence
// from max(n_terms, |m y|) + 15. psi_n(y) is propagated upward while
// n <= y and through the ratio psi_{n-1} / (D_n(y) + n / y) above that,
// which keeps small spheres free of cancellation; chi_n(y) is always
// propagated upward.
[[nodiscard]] MieCoefficients mie_coefficients(double y, Complex m, int n_terms);

// Scattering efficiency (2 / y^2) sum (2n + 1)(|a_n|^2 + |b_n|^2) with the
// number of terms taken from truncation_order(y, config.truncation_margin).
[[nodiscard]] double q_sca(double y, Complex m, const OpticsConfig& config);

// Fredholm kernel A(lambda, r) = (3/4) f Q_sca(lambda, r) / r.
[[nodiscard]] double scattering_kernel(double lambda, double r, const OpticsConfig& config);

// A[i][k] = scattering_kernel(lambda_i, r_k). Rows are distributed over
// worker threads (PSD_INVERT_THREADS caps the count); the result does not
// depend on the thread count.
[[nodiscard]] Eigen::MatrixXd kernel_matrix(const WavelengthGrid& wavelengths,
                                            const SizeGrid& sizes,
                                            const OpticsConfig& config);

// Worker-thread budget: hardware concurrency capped by PSD_INVERT_THREADS.
[[nodiscard]] unsigned worker_threads();

}  // namespace psd
