#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "psd/basis.hpp"
#include "psd/data_io.hpp"
#include "psd/grids.hpp"
#include "psd/hyperopt.hpp"
#include "psd/kernels.hpp"
#include "psd/mie.hpp"

namespace psd {

struct SizeGridSpec {
  double r_min = 0.05;
  double r_max = 0.5;
  std::size_t n = 200;
  QuadratureRule rule = QuadratureRule::Trapezoid;

  [[nodiscard]] SizeGrid build() const { return SizeGrid::uniform(r_min, r_max, n, rule); }
};

struct WavelengthGridSpec {
  double min = 0.4;
  double max = 1.0;
  std::size_t n = 100;

  [[nodiscard]] WavelengthGrid build() const { return WavelengthGrid::uniform(min, max, n); }
};

struct NoiseSpec {
  // Injected sigma = relative * max |noiseless mu| unless `absolute` is set.
  double relative = 0.01;
  std::optional<double> absolute;
};

// Unset bounds are derived from the data and the size grid at fit time.
struct BoundsSpec {
  std::optional<std::array<double, 2>> sigma_f;
  std::optional<std::array<double, 2>> ell;
  std::optional<std::array<double, 2>> sigma;
};

struct OptimizerSpec {
  int restarts = 5;
  int max_evaluations = 600;
  Objective objective = Objective::Joint;
  BoundsSpec bounds;
};

struct InversionSpec {
  bool constrained = true;
  bool map = false;
};

struct PipelineConfig {
  OpticsConfig optics;
  SizeGridSpec size_grid;
  WavelengthGridSpec wavelength_grid;
  double half_width_factor = 1.0;
  KernelHyperparams kernel{KernelKind::SE, 1.0, 0.09, 1.5};
  // Noise level assumed by invert; unset means take it from the data file.
  std::optional<double> sigma_noise;
  int q = 128;
  double constraint_jitter = 0.0;
  TrueDistributionSpec truth;
  NoiseSpec noise;
  std::uint64_t seed = 0;
  OptimizerSpec optimizer;
  InversionSpec inversion;
  std::string length_unit = "um";

  PipelineConfig();

  [[nodiscard]] DomainSpec domain() const {
    return {size_grid.r_min, size_grid.r_max, half_width_factor};
  }
  void validate() const;
};

// Parses a JSON document; unknown keys anywhere are ConfigErrors.
[[nodiscard]] PipelineConfig parse_config(const std::string& json_text);
[[nodiscard]] PipelineConfig load_config(const std::string& path);
[[nodiscard]] std::string config_to_json(const PipelineConfig& config);

}  // namespace psd
