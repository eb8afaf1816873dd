#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace psd {

enum class QuadratureRule { Trapezoid, Midpoint };

// Particle-radius axis with quadrature weights. Radii are strictly
// increasing and positive; every weight is positive.
class SizeGrid {
 public:
  SizeGrid(std::vector<double> radii, std::vector<double> weights);

  // n points spanning [r_min, r_max]. Trapezoid places points on both
  // endpoints with half-weighted ends; midpoint places them at cell centres.
  static SizeGrid uniform(double r_min, double r_max, std::size_t n,
                          QuadratureRule rule = QuadratureRule::Trapezoid);

  // Weights derived from arbitrary (strictly increasing) abscissae.
  static SizeGrid from_points(std::vector<double> radii,
                              QuadratureRule rule = QuadratureRule::Trapezoid);

  [[nodiscard]] std::span<const double> radii() const noexcept { return radii_; }
  [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
  [[nodiscard]] std::size_t size() const noexcept { return radii_.size(); }
  [[nodiscard]] double r_min() const noexcept { return radii_.front(); }
  [[nodiscard]] double r_max() const noexcept { return radii_.back(); }

  // Sum of f_k * w_k.
  [[nodiscard]] double integrate(std::span<const double> values) const;

 private:
  std::vector<double> radii_;
  std::vector<double> weights_;
};

class WavelengthGrid {
 public:
  explicit WavelengthGrid(std::vector<double> wavelengths);

  static WavelengthGrid uniform(double lambda_min, double lambda_max, std::size_t n);

  [[nodiscard]] std::span<const double> values() const noexcept { return wavelengths_; }
  [[nodiscard]] std::size_t size() const noexcept { return wavelengths_.size(); }

 private:
  std::vector<double> wavelengths_;
};

}  // namespace psd
