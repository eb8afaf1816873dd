#include "psd/mie.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>

#include "psd/errors.hpp"

namespace psd {

void OpticsConfig::validate() const {
  if (!(n_medium > 0.0) || !std::isfinite(n_medium))
    throw DomainError("n_medium must be positive, got " + std::to_string(n_medium));
  if (!(volume_fraction > 0.0) || volume_fraction > 1.0)
    throw DomainError("volume_fraction must lie in (0, 1], got " +
                      std::to_string(volume_fraction));
  if (truncation_margin < 0)
    throw DomainError("truncation_margin must be >= 0, got " +
                      std::to_string(truncation_margin));
  if (n_particle.imag() < 0.0 || !std::isfinite(n_particle.real()) ||
      !std::isfinite(n_particle.imag()))
    throw DomainError("n_particle must be finite with non-negative imaginary part");
  if (index_wavelengths.size() != index_values.size())
    throw DimensionError("refractive index table has mismatched column lengths");
  for (std::size_t i = 0; i < index_wavelengths.size(); ++i) {
    if (!(index_wavelengths[i] > 0.0) || (i > 0 && !(index_wavelengths[i] > index_wavelengths[i - 1])))
      throw DomainError("refractive index table wavelengths must be positive and increasing");
    if (index_values[i].imag() < 0.0)
      throw DomainError("refractive index table has negative imaginary part at row " +
                        std::to_string(i));
  }
}

Complex OpticsConfig::particle_index_at(double lambda) const {
  if (index_wavelengths.empty()) return n_particle;
  if (lambda <= index_wavelengths.front()) return index_values.front();
  if (lambda >= index_wavelengths.back()) return index_values.back();
  const auto it = std::upper_bound(index_wavelengths.begin(), index_wavelengths.end(), lambda);
  const std::size_t hi = static_cast<std::size_t>(it - index_wavelengths.begin());
  const std::size_t lo = hi - 1;
  const double t = (lambda - index_wavelengths[lo]) / (index_wavelengths[hi] - index_wavelengths[lo]);
  return index_values[lo] + t * (index_values[hi] - index_values[lo]);
}

double size_parameter(double r, double lambda, double n_medium) {
  if (!(r > 0.0)) throw DomainError("size_parameter: radius must be positive, got r=" + std::to_string(r));
  if (!(lambda > 0.0))
    throw DomainError("size_parameter: wavelength must be positive, got lambda=" + std::to_string(lambda));
  if (!(n_medium > 0.0))
    throw DomainError("size_parameter: n_medium must be positive, got " + std::to_string(n_medium));
  return 2.0 * std::numbers::pi * n_medium * r / lambda;
}

int truncation_order(double y, int margin) {
  if (!(y >= 0.0) || !std::isfinite(y))
    throw DomainError("truncation_order: size parameter must be >= 0, got y=" + std::to_string(y));
  const int rule = static_cast<int>(std::ceil(y + 4.0 * std::cbrt(y) + 2.0));
  return std::max(3, rule + margin);
}

MieCoefficients mie_coefficients(double y, Complex m, int n_terms) {
  if (!(y > 0.0) || !std::isfinite(y))
    throw DomainError("mie_coefficients: size parameter must be positive, got y=" + std::to_string(y));
  if (n_terms < 1) throw DomainError("mie_coefficients: need at least one term");
  if (m == Complex(0.0, 0.0)) throw DomainError("mie_coefficients: relative index is zero");

  const Complex my = m * y;
  const int n_start = std::max(n_terms, static_cast<int>(std::ceil(std::abs(my)))) + 15;

  // D_n(m y), downward.
  std::vector<Complex> d(static_cast<std::size_t>(n_start) + 1, Complex(0.0, 0.0));
  for (int n = n_start; n >= 1; --n) {
    const Complex nz = static_cast<double>(n) / my;
    d[n - 1] = nz - 1.0 / (d[n] + nz);
  }

  // Real-argument D_n(y) for the ratio region n > floor(y). psi_n has no
  // zero there, so the recurrence is pole-free.
  const int n_switch = std::min(n_terms, static_cast<int>(std::floor(y)));
  std::vector<double> dr(static_cast<std::size_t>(n_start) + 1, 0.0);
  for (int n = n_start; n >= n_switch + 2; --n) {
    const double nz = static_cast<double>(n) / y;
    dr[n - 1] = nz - 1.0 / (dr[n] + nz);
  }

  MieCoefficients out;
  out.a.resize(static_cast<std::size_t>(n_terms));
  out.b.resize(static_cast<std::size_t>(n_terms));

  double psi_prev2 = std::cos(y);  // psi_{-1}
  double psi_prev = std::sin(y);   // psi_0
  double chi_prev2 = -std::sin(y); // chi_{-1}
  double chi_prev = std::cos(y);   // chi_0

  for (int n = 1; n <= n_terms; ++n) {
    const double rn = static_cast<double>(n);
    double psi;
    if (n <= n_switch)
      psi = (2.0 * rn - 1.0) / y * psi_prev - psi_prev2;
    else
      psi = psi_prev / (dr[n] + rn / y);
    const double chi = (2.0 * rn - 1.0) / y * chi_prev - chi_prev2;
    if (!std::isfinite(chi) || !std::isfinite(psi)) {
      std::ostringstream msg;
      msg << "Mie recurrence overflow at y=" << y << ", N=" << n_terms << " (term " << n << ")";
      throw NumericError(msg.str());
    }

    const Complex xi(psi, -chi);
    const Complex xi_prev(psi_prev, -chi_prev);
    const Complex da = d[n] / m + rn / y;
    const Complex db = m * d[n] + rn / y;
    out.a[n - 1] = (da * psi - psi_prev) / (da * xi - xi_prev);
    out.b[n - 1] = (db * psi - psi_prev) / (db * xi - xi_prev);

    psi_prev2 = psi_prev;
    psi_prev = psi;
    chi_prev2 = chi_prev;
    chi_prev = chi;
  }
  return out;
}

double q_sca(double y, Complex m, const OpticsConfig& config) {
  const int n_terms = truncation_order(y, config.truncation_margin);
  const MieCoefficients c = mie_coefficients(y, m, n_terms);
  double sum = 0.0;
  for (int n = n_terms; n >= 1; --n) {  // smallest terms first
    sum += (2.0 * n + 1.0) * (std::norm(c.a[n - 1]) + std::norm(c.b[n - 1]));
  }
  return 2.0 / (y * y) * sum;
}

double scattering_kernel(double lambda, double r, const OpticsConfig& config) {
  const double y = size_parameter(r, lambda, config.n_medium);
  const double q = q_sca(y, config.relative_index_at(lambda), config);
  return 0.75 * config.volume_fraction * q / r;
}

unsigned worker_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PSD_INVERT_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return n;
}

Eigen::MatrixXd kernel_matrix(const WavelengthGrid& wavelengths, const SizeGrid& sizes,
                              const OpticsConfig& config) {
  config.validate();
  const auto lam = wavelengths.values();
  const auto rad = sizes.radii();
  const Eigen::Index rows = static_cast<Eigen::Index>(lam.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(rad.size());
  Eigen::MatrixXd a(rows, cols);

  const unsigned n_workers = std::min<unsigned>(worker_threads(), static_cast<unsigned>(rows));
  std::vector<std::exception_ptr> failures(n_workers);

  auto fill_rows = [&](unsigned worker) {
    try {
      for (Eigen::Index i = worker; i < rows; i += n_workers) {
        for (Eigen::Index k = 0; k < cols; ++k) {
          try {
            a(i, k) = scattering_kernel(lam[i], rad[k], config);
          } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at kernel entry (" + std::to_string(i) + ", " +
                               std::to_string(k) + ")");
          } catch (const DomainError& e) {
            throw DomainError(std::string(e.what()) + " at kernel entry (" + std::to_string(i) + ", " +
                              std::to_string(k) + ")");
          }
          if (!std::isfinite(a(i, k)) || a(i, k) < 0.0)
            throw NumericError("kernel entry (" + std::to_string(i) + ", " + std::to_string(k) +
                               ") is not finite and non-negative");
        }
      }
    } catch (...) {
      failures[worker] = std::current_exception();
    }
  };

  if (n_workers <= 1) {
    fill_rows(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(fill_rows, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return a;
}

}  // namespace psd
