#include "psd/grids.hpp"

#include <cmath>
#include <string>

#include "psd/errors.hpp"

namespace psd {
namespace {

void require_strictly_increasing_positive(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw DomainError(std::string(what) + " grid is empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || v[i] <= 0.0)
      throw DomainError(std::string(what) + " grid value " + std::to_string(i) +
                        " is not positive and finite");
    if (i > 0 && !(v[i] > v[i - 1]))
      throw DomainError(std::string(what) + " grid is not strictly increasing at index " +
                        std::to_string(i));
  }
}

}  // namespace

SizeGrid::SizeGrid(std::vector<double> radii, std::vector<double> weights)
    : radii_(std::move(radii)), weights_(std::move(weights)) {
  require_strictly_increasing_positive(radii_, "radius");
  if (weights_.size() != radii_.size())
    throw DimensionError("radius grid has " + std::to_string(radii_.size()) + " points but " +
                         std::to_string(weights_.size()) + " weights");
  for (std::size_t i = 0; i < weights_.size(); ++i)
    if (!std::isfinite(weights_[i]) || weights_[i] <= 0.0)
      throw DomainError("quadrature weight " + std::to_string(i) + " is not positive");
}

SizeGrid SizeGrid::uniform(double r_min, double r_max, std::size_t n, QuadratureRule rule) {
  if (!(r_min > 0.0) || !(r_max > r_min))
    throw DomainError("uniform radius grid needs 0 < r_min < r_max");
  std::vector<double> r(n), w(n);
  if (rule == QuadratureRule::Trapezoid) {
    if (n < 2) throw DomainError("trapezoid radius grid needs at least 2 points");
    const double h = (r_max - r_min) / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
      r[k] = r_min + h * static_cast<double>(k);
      w[k] = h;
    }
    r.back() = r_max;
    w.front() = w.back() = 0.5 * h;
  } else {
    if (n < 1) throw DomainError("midpoint radius grid needs at least 1 point");
    const double h = (r_max - r_min) / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      r[k] = r_min + h * (static_cast<double>(k) + 0.5);
      w[k] = h;
    }
  }
  return SizeGrid(std::move(r), std::move(w));
}

SizeGrid SizeGrid::from_points(std::vector<double> radii, QuadratureRule rule) {
  require_strictly_increasing_positive(radii, "radius");
  const std::size_t n = radii.size();
  if (n < 2) throw DomainError("at least 2 radii are needed to derive quadrature weights");
  std::vector<double> w(n, 0.0);
  if (rule == QuadratureRule::Trapezoid) {
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double h = radii[k + 1] - radii[k];
      w[k] += 0.5 * h;
      w[k + 1] += 0.5 * h;
    }
  } else {
    // Cells bounded by neighbour midpoints; the end cells extend outward by
    // half the adjacent spacing, which reproduces uniform midpoint weights.
    for (std::size_t k = 0; k < n; ++k) {
      const double left = k == 0 ? radii[1] - radii[0] : radii[k] - radii[k - 1];
      const double right = k + 1 == n ? radii[n - 1] - radii[n - 2] : radii[k + 1] - radii[k];
      w[k] = 0.5 * (left + right);
    }
  }
  return SizeGrid(std::move(radii), std::move(w));
}

double SizeGrid::integrate(std::span<const double> values) const {
  if (values.size() != weights_.size())
    throw DimensionError("integrand has " + std::to_string(values.size()) +
                         " values for a grid of " + std::to_string(weights_.size()));
  double s = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) s += values[k] * weights_[k];
  return s;
}

WavelengthGrid::WavelengthGrid(std::vector<double> wavelengths)
    : wavelengths_(std::move(wavelengths)) {
  require_strictly_increasing_positive(wavelengths_, "wavelength");
}

WavelengthGrid WavelengthGrid::uniform(double lambda_min, double lambda_max, std::size_t n) {
  if (n == 0) throw DomainError("wavelength grid needs at least 1 point");
  if (n == 1) return WavelengthGrid({lambda_min});
  if (!(lambda_min > 0.0) || !(lambda_max > lambda_min))
    throw DomainError("uniform wavelength grid needs 0 < min < max");
  std::vector<double> v(n);
  const double h = (lambda_max - lambda_min) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lambda_min + h * static_cast<double>(i);
  v.back() = lambda_max;
  return WavelengthGrid(std::move(v));
}

}  // namespace psd
