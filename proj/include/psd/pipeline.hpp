#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

#include "psd/basis.hpp"
#include "psd/config.hpp"
#include "psd/data_io.hpp"
#include "psd/hyperopt.hpp"
#include "psd/inference.hpp"

namespace psd {

// Everything that depends on the optics, grids and basis but not on theta.
struct ForwardModel {
  SizeGrid sizes;
  WavelengthGrid wavelengths;
  Eigen::MatrixXd A;    // n_lambda x n_r
  Eigen::MatrixXd phi;  // n_r x q
  Eigen::MatrixXd psi_A;
  Eigen::RowVectorXd psi_B;
  DomainSpec domain;
  int q = 0;
};

[[nodiscard]] ForwardModel build_forward_model(const PipelineConfig& config, const WavelengthGrid& wavelengths);

struct Simulation {
  ForwardModel model;
  Eigen::VectorXd rho_true;
  Eigen::VectorXd mu_clean;
  MeasurementSet measurements;
};

// Truth, noiseless forward values and seeded noisy measurements on the
// configured wavelength grid.
[[nodiscard]] Simulation simulate(const PipelineConfig& config);
// Same scenario for a pre-built model (its grids must match the config).
[[nodiscard]] Simulation simulate(const PipelineConfig& config, ForwardModel model);

struct Inversion {
  PosteriorResult posterior;
  Theta theta;
  Eigen::VectorXd mu_hat;
  bool constrained = true;
  bool map = false;
};

[[nodiscard]] Inversion invert(const ForwardModel& model, const KernelHyperparams& kernel, double sigma_noise,
                               const Eigen::VectorXd& mu, bool constrained, bool map, double constraint_jitter = 0.0);

// Default search box when the config leaves a bound open:
// sigma_f in [1e-2, 1e3], ell in [0.02, 2] x width, sigma in [1e-5, 1] x max|mu|.
[[nodiscard]] LogBounds fit_bounds(const PipelineConfig& config, const Eigen::VectorXd& mu);

// Starting point: the config kernel, and sigma from the config, the data
// file, or 1% of max|mu| in that order, all clamped into the bounds.
[[nodiscard]] HyperState initial_state(const PipelineConfig& config, const MeasurementSet& data,
                                       const LogBounds& bounds);

[[nodiscard]] OptimizationResult fit(const PipelineConfig& config, const ForwardModel& model,
                                     const MeasurementSet& data);

// Noise level for invert: explicit value, else the RMS of the data's sigma
// column. Throws ConfigError when neither exists.
[[nodiscard]] double resolve_sigma(std::optional<double> explicit_sigma, const MeasurementSet& data);

[[nodiscard]] ResultTable to_result_table(const Inversion& inv);

struct EvalMetrics {
  double mse = 0.0;
  double sum_rho = 0.0;
  std::optional<double> forward_relative_rmse;
  bool interpolated = false;
};

// MSE against the truth on the truth grid. When the grids differ the
// estimate is linearly interpolated; a truth grid reaching outside the
// result grid is a DimensionError.
[[nodiscard]] EvalMetrics evaluate_result(const ResultTable& result, const TruthTable& truth,
                                          QuadratureRule rule = QuadratureRule::Trapezoid);

// RMS(a - b) / RMS(b).
[[nodiscard]] double relative_rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace psd
