#include "psd/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "psd/errors.hpp"

namespace psd {

ForwardModel build_forward_model(const PipelineConfig& config, const WavelengthGrid& wavelengths) {
  config.validate();
  ForwardModel m{config.size_grid.build(), wavelengths, {}, {}, {}, {}, config.domain(), config.q};
  m.A = kernel_matrix(m.wavelengths, m.sizes, config.optics);
  const BasisExpansion basis = build_expansion(m.domain, m.q, config.kernel);
  m.phi = phi_matrix(basis, m.sizes.radii());
  const auto w = m.sizes.weights();
  m.psi_A = project_forward(m.A, m.phi, Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())));
  m.psi_B = (m.phi.transpose() * Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()))).transpose();
  return m;
}

Simulation simulate(const PipelineConfig& config) {
  return simulate(config, build_forward_model(config, config.wavelength_grid.build()));
}

Simulation simulate(const PipelineConfig& config, ForwardModel model) {
  Simulation s{std::move(model), {}, {}, {}};
  s.rho_true = make_true_rho(config.truth, s.model.sizes);
  s.mu_clean = forward_noiseless(s.model.A, s.rho_true, s.model.sizes);
  const double sigma = config.noise.absolute ? *config.noise.absolute
                                             : config.noise.relative * s.mu_clean.cwiseAbs().maxCoeff();
  s.measurements = simulate_measurements(s.rho_true, s.model.A, s.model.wavelengths, s.model.sizes, sigma, config.seed);
  return s;
}

Inversion invert(const ForwardModel& model, const KernelHyperparams& kernel, double sigma_noise,
                 const Eigen::VectorXd& mu, bool constrained, bool map, double constraint_jitter) {
  if (mu.size() != model.psi_A.rows())
    throw DimensionError("measurement vector has " + std::to_string(mu.size()) + " entries but the model has " +
                         std::to_string(model.psi_A.rows()) + " wavelengths");
  const BasisExpansion basis = build_expansion(model.domain, model.q, kernel);
  ForwardOperators ops{model.psi_A, model.psi_B, Eigen::VectorXd::Ones(1), sigma_noise, constraint_jitter};
  Inversion inv;
  inv.constrained = constrained;
  inv.map = map;
  if (!constrained)
    inv.posterior = posterior_unconstrained(ops, basis, model.sizes, mu);
  else if (map)
    inv.posterior = map_lagrange(ops, basis, model.sizes, mu);
  else
    inv.posterior = posterior_constrained(ops, basis, model.sizes, mu);
  inv.theta = {kernel.sigma_f, kernel.ell, sigma_noise};
  inv.mu_hat = predict_measurements(ops, inv.posterior.alpha_mean);
  return inv;
}

LogBounds fit_bounds(const PipelineConfig& config, const Eigen::VectorXd& mu) {
  const double width = config.size_grid.r_max - config.size_grid.r_min;
  const double scale = mu.size() > 0 ? mu.cwiseAbs().maxCoeff() : 0.0;
  if (!(scale > 0.0)) throw DomainError("measurements are identically zero; cannot derive noise bounds");
  const auto& b = config.optimizer.bounds;
  const std::array<double, 2> sf = b.sigma_f.value_or(std::array<double, 2>{1e-2, 1e3});
  const std::array<double, 2> ell = b.ell.value_or(std::array<double, 2>{0.02 * width, 2.0 * width});
  const std::array<double, 2> sg = b.sigma.value_or(std::array<double, 2>{1e-5 * scale, scale});
  return LogBounds::from_natural({sf[0], ell[0], sg[0]}, {sf[1], ell[1], sg[1]});
}

double resolve_sigma(std::optional<double> explicit_sigma, const MeasurementSet& data) {
  if (explicit_sigma) {
    if (!(*explicit_sigma > 0.0)) throw ConfigError("noise sigma must be positive");
    return *explicit_sigma;
  }
  if (!data.sigma.empty()) {
    double s2 = 0.0;
    for (double s : data.sigma) s2 += s * s;
    const double s = std::sqrt(s2 / static_cast<double>(data.sigma.size()));
    if (s > 0.0) return s;
  }
  throw ConfigError("no noise level: set sigma_noise in the config or provide a sigma column in the measurements");
}

HyperState initial_state(const PipelineConfig& config, const MeasurementSet& data, const LogBounds& bounds) {
  HyperState s;
  s.kind = config.kernel.kind;
  s.nu = config.kernel.nu;
  s.bounds = bounds;
  double sigma = 0.0;
  try {
    sigma = resolve_sigma(config.sigma_noise, data);
  } catch (const ConfigError&) {
    sigma = 0.01 * data.mu_vector().cwiseAbs().maxCoeff();
  }
  std::array<double, 3> x = Theta{config.kernel.sigma_f, config.kernel.ell, sigma}.to_log();
  for (int i = 0; i < 3; ++i) x[i] = std::clamp(x[i], bounds.lo[i], bounds.hi[i]);
  s.theta = Theta::from_log(x);
  return s;
}

OptimizationResult fit(const PipelineConfig& config, const ForwardModel& model, const MeasurementSet& data) {
  data.validate();
  const Eigen::VectorXd mu = data.mu_vector();
  if (mu.size() != model.psi_A.rows())
    throw DimensionError("measurement file has " + std::to_string(mu.size()) + " rows but the model has " +
                         std::to_string(model.psi_A.rows()) + " wavelengths");
  const BasisExpansion basis = build_expansion(model.domain, model.q, config.kernel);
  const MarginalLikelihood lml(model.psi_A, model.psi_B, basis.eigenvalues(), mu);
  const LogBounds bounds = fit_bounds(config, mu);
  OptimizerOptions opt;
  opt.restarts = config.optimizer.restarts;
  opt.max_evaluations = config.optimizer.max_evaluations;
  opt.seed = config.seed;
  return optimize(config.optimizer.objective, lml, initial_state(config, data, bounds), opt);
}

ResultTable to_result_table(const Inversion& inv) {
  const auto& p = inv.posterior;
  const Eigen::VectorXd lo = p.lower95(), hi = p.upper95();
  ResultTable t;
  t.r.assign(p.radii.data(), p.radii.data() + p.radii.size());
  t.rho_mean.assign(p.rho_mean.data(), p.rho_mean.data() + p.rho_mean.size());
  t.rho_lo95.assign(lo.data(), lo.data() + lo.size());
  t.rho_hi95.assign(hi.data(), hi.data() + hi.size());
  return t;
}

namespace {

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t k = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[k - 1]) / (x[k] - x[k - 1]);
  return y[k - 1] + t * (y[k] - y[k - 1]);
}

}  // namespace

EvalMetrics evaluate_result(const ResultTable& result, const TruthTable& truth, QuadratureRule rule) {
  if (result.r.empty() || truth.r.empty()) throw DimensionError("empty result or truth table");
  EvalMetrics m;
  m.interpolated = result.r != truth.r;
  if (m.interpolated) {
    const double tol = 1e-9 * (result.r.back() - result.r.front());
    if (truth.r.front() < result.r.front() - tol || truth.r.back() > result.r.back() + tol)
      throw DimensionError("truth grid [" + format_double(truth.r.front()) + ", " + format_double(truth.r.back()) +
                           "] (" + std::to_string(truth.r.size()) + " points) is not covered by the result grid [" +
                           format_double(result.r.front()) + ", " + format_double(result.r.back()) + "] (" +
                           std::to_string(result.r.size()) + " points)");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < truth.r.size(); ++k) {
    const double est = m.interpolated ? interpolate(result.r, result.rho_mean, truth.r[k]) : result.rho_mean[k];
    const double d = est - truth.rho[k];
    s += d * d;
  }
  m.mse = s / static_cast<double>(truth.r.size());
  m.sum_rho = result_integral(result, rule);
  return m;
}

double relative_rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || b.size() == 0) throw DimensionError("relative_rmse needs equal, non-empty vectors");
  const double denom = b.norm();
  if (!(denom > 0.0)) throw DomainError("relative_rmse reference is identically zero");
  return (a - b).norm() / denom;
}

}  // namespace psd
