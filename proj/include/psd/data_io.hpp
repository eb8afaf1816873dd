#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psd/grids.hpp"
#include "psd/mie.hpp"

namespace psd {

// ---------------------------------------------------------------------------
// Synthetic size distributions
// ---------------------------------------------------------------------------

enum class DistributionFamily { Gaussian, LogNormal, Bimodal };

[[nodiscard]] std::string to_string(DistributionFamily f);
[[nodiscard]] DistributionFamily distribution_family_from_string(const std::string& name);

// One mode. Gaussian: center = mean radius, width = standard deviation.
// Log-normal: center = median radius, width = standard deviation of ln r.
struct DistributionComponent {
  double weight = 1.0;
  double center = 0.25;
  double width = 0.05;
};

struct TrueDistributionSpec {
  DistributionFamily family = DistributionFamily::Bimodal;
  // Gaussian and LogNormal use the first component; Bimodal uses two
  // Gaussian components.
  std::vector<DistributionComponent> components;

  void validate() const;
};

// Non-negative density on the grid, renormalized so grid.integrate(rho) = 1.
[[nodiscard]] Eigen::VectorXd make_true_rho(const TrueDistributionSpec& spec, const SizeGrid& grid);

// ---------------------------------------------------------------------------
// Measurements and seeded noise
// ---------------------------------------------------------------------------

// Standard normal deviates from a seeded mt19937_64. The transform (Marsaglia
// polar method, logarithm evaluated with basic arithmetic only) uses no
// library transcendental, so a seed reproduces bit-for-bit on any IEEE-754
// platform.
class NormalGenerator {
 public:
  explicit NormalGenerator(std::uint64_t seed) : engine_(seed) {}

  double next();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Natural logarithm from frexp and an atanh series (portable, deterministic).
[[nodiscard]] double portable_log(double x);

enum class Provenance { Synthetic, External };

struct MeasurementSet {
  std::vector<double> wavelengths;
  std::vector<double> mu;
  // Per-row noise standard deviation, when the file carries one.
  std::vector<double> sigma;
  double sigma_used = 0.0;
  std::uint64_t seed = 0;
  Provenance provenance = Provenance::External;

  void validate() const;
  [[nodiscard]] WavelengthGrid grid() const { return WavelengthGrid(wavelengths); }
  [[nodiscard]] Eigen::VectorXd mu_vector() const;
};

// kernel * (rho o weights).
[[nodiscard]] Eigen::VectorXd forward_noiseless(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& rho,
                                                const SizeGrid& grid);

[[nodiscard]] MeasurementSet simulate_measurements(const Eigen::VectorXd& rho, const Eigen::MatrixXd& kernel,
                                                   const WavelengthGrid& wavelengths, const SizeGrid& grid,
                                                   double sigma, std::uint64_t seed);

[[nodiscard]] MeasurementSet simulate_measurements(const Eigen::VectorXd& rho, const OpticsConfig& optics,
                                                   const WavelengthGrid& wavelengths, const SizeGrid& grid,
                                                   double sigma, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

// 17 significant digits; parses back to the identical double.
[[nodiscard]] std::string format_double(double v);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

// Header `wavelength,mu[,sigma]`. Column names may carry a bracketed unit,
// e.g. `wavelength[um]`; when `length_unit` is non-empty a differing
// wavelength unit is rejected.
void write_measurements(const std::string& path, const MeasurementSet& set);
[[nodiscard]] MeasurementSet read_measurements(const std::string& path, const std::string& length_unit = "");

// Header `r,rho`.
void write_truth(const std::string& path, std::span<const double> radii, const Eigen::VectorXd& rho);
struct TruthTable {
  std::vector<double> r;
  std::vector<double> rho;
};
[[nodiscard]] TruthTable read_truth(const std::string& path);

// Header `r,rho_mean,rho_lo95,rho_hi95`.
struct ResultTable {
  std::vector<double> r;
  std::vector<double> rho_mean;
  std::vector<double> rho_lo95;
  std::vector<double> rho_hi95;
};
void write_result(const std::string& path, const ResultTable& table);
[[nodiscard]] ResultTable read_result(const std::string& path);

// Trapezoid (or midpoint) quadrature of the stored mean column.
[[nodiscard]] double result_integral(const ResultTable& table, QuadratureRule rule = QuadratureRule::Trapezoid);

// Loads a result table and checks the `sum_rho` recorded in its summary
// JSON against the recomputed quadrature (tolerance 1e-9).
[[nodiscard]] ResultTable load_checked_result(const std::string& result_csv, const std::string& summary_json);

}  // namespace psd
