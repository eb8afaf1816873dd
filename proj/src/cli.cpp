#include "psd/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "psd/config.hpp"
#include "psd/data_io.hpp"
#include "psd/errors.hpp"
#include "psd/pipeline.hpp"

namespace psd {
namespace {

using nlohmann::json;

struct Flags {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> q;
  std::optional<std::string> kernel;
  std::optional<double> nu;
  std::optional<std::string> objective;
  bool constrained = false, unconstrained = false;
  bool map = false, posterior = false;
  std::optional<int> restarts;
  std::string measurements;
  std::string theta;
  std::string result;
  std::string truth;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  sub->add_option("--out", f.out_dir, "output directory");
  sub->add_option("--seed", f.seed, "random seed");
  sub->add_option("--q", f.q, "number of basis functions");
  sub->add_option("--kernel", f.kernel, "se|matern");
  sub->add_option("--nu", f.nu, "Matern smoothness");
}

PipelineConfig resolve_config(const Flags& f) {
  PipelineConfig c = f.config_path.empty() ? PipelineConfig{} : load_config(f.config_path);
  if (f.seed) c.seed = *f.seed;
  if (f.q) c.q = *f.q;
  if (f.kernel) {
    try {
      c.kernel.kind = kernel_kind_from_string(*f.kernel);
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
  if (f.nu) c.kernel.nu = *f.nu;
  if (f.objective) {
    try {
      c.optimizer.objective = objective_from_string(*f.objective);
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
  if (f.restarts) c.optimizer.restarts = *f.restarts;
  if (f.constrained) c.inversion.constrained = true;
  if (f.unconstrained) c.inversion.constrained = false;
  if (f.map) c.inversion.map = true;
  if (f.posterior) c.inversion.map = false;
  c.validate();
  return c;
}

std::string out_path(const Flags& f, const std::string& name) {
  return (std::filesystem::path(f.out_dir) / name).string();
}

void write_json(const std::string& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

json theta_json(const Theta& t) { return {{"sigma_f", t.sigma_f}, {"ell", t.ell}, {"sigma", t.sigma_noise}}; }

// Kernel hyperparameters and noise level from a fit summary.
void apply_theta_file(const std::string& path, PipelineConfig& c, const Flags& f) {
  const json j = read_json(path);
  try {
    const json& t = j.at("theta");
    c.kernel.sigma_f = t.at("sigma_f").get<double>();
    c.kernel.ell = t.at("ell").get<double>();
    c.sigma_noise = t.at("sigma").get<double>();
    if (!f.kernel && j.contains("kernel")) c.kernel.kind = kernel_kind_from_string(j["kernel"].get<std::string>());
    if (!f.nu && j.contains("nu")) c.kernel.nu = j["nu"].get<double>();
  } catch (const json::exception& e) {
    throw ParseError(path + ": theta summary is incomplete: " + e.what(), 0);
  }
  c.validate();
}

const char* rule_name(QuadratureRule r) { return r == QuadratureRule::Midpoint ? "midpoint" : "trapezoid"; }

int cmd_mie_table(const Flags& f, std::ostream& out) {
  const PipelineConfig c = resolve_config(f);
  const SizeGrid sizes = c.size_grid.build();
  const WavelengthGrid waves = c.wavelength_grid.build();
  const Eigen::MatrixXd a = kernel_matrix(waves, sizes, c.optics);
  std::ostringstream csv;
  csv << "wavelength,radius,q_sca,A\n";
  for (std::size_t i = 0; i < waves.size(); ++i) {
    const double lambda = waves.values()[i];
    const Complex m = c.optics.relative_index_at(lambda);
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const double r = sizes.radii()[k];
      const double q = q_sca(size_parameter(r, lambda, c.optics.n_medium), m, c.optics);
      csv << format_double(lambda) << ',' << format_double(r) << ',' << format_double(q) << ','
          << format_double(a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))) << '\n';
    }
  }
  const std::string path = out_path(f, "mie_table.csv");
  write_file_atomic(path, csv.str());
  out << "wrote " << path << " (" << waves.size() * sizes.size() << " rows)\n";
  return kExitOk;
}

int cmd_simulate(const Flags& f, std::ostream& out) {
  const PipelineConfig c = resolve_config(f);
  const Simulation s = simulate(c);
  write_measurements(out_path(f, "measurements.csv"), s.measurements);
  write_truth(out_path(f, "truth.csv"), s.model.sizes.radii(), s.rho_true);
  write_json(out_path(f, "simulation.json"),
             {{"sigma_used", s.measurements.sigma_used},
              {"seed", s.measurements.seed},
              {"sum_rho_true", s.model.sizes.integrate(std::span<const double>(s.rho_true.data(), s.rho_true.size()))},
              {"truth_family", to_string(c.truth.family)}});
  out << "wrote " << out_path(f, "measurements.csv") << " and " << out_path(f, "truth.csv") << " (sigma "
      << s.measurements.sigma_used << ")\n";
  return kExitOk;
}

MeasurementSet load_measurements(const Flags& f, const PipelineConfig& c) {
  if (f.measurements.empty()) throw ConfigError("--measurements PATH is required");
  MeasurementSet m = read_measurements(f.measurements, c.length_unit);
  m.validate();
  return m;
}

int cmd_fit(const Flags& f, std::ostream& out) {
  const PipelineConfig c = resolve_config(f);
  const MeasurementSet data = load_measurements(f, c);
  const ForwardModel model = build_forward_model(c, data.grid());
  const OptimizationResult r = fit(c, model, data);
  const LogBounds b = fit_bounds(c, data.mu_vector());
  const Theta lo = Theta::from_log(b.lo), hi = Theta::from_log(b.hi);
  json restarts = json::array();
  for (const auto& rs : r.restarts)
    restarts.push_back({{"start", theta_json(rs.start)},
                        {"best", theta_json(rs.best)},
                        {"objective", rs.ok ? json(rs.objective) : json(nullptr)},
                        {"evaluations", rs.evaluations},
                        {"ok", rs.ok},
                        {"diagnostic", rs.diagnostic}});
  write_json(out_path(f, "fit_summary.json"),
             {{"objective_name", to_string(c.optimizer.objective)},
              {"objective", r.objective},
              {"theta", theta_json(r.best.theta)},
              {"kernel", to_string(c.kernel.kind)},
              {"nu", c.kernel.nu},
              {"q", c.q},
              {"seed", c.seed},
              {"best_restart", r.best_restart},
              {"bounds", {{"lo", theta_json(lo)}, {"hi", theta_json(hi)}}},
              {"restarts", restarts}});
  write_trace_csv(r.trace, out_path(f, "trace.csv"));
  out << "fit " << to_string(c.optimizer.objective) << " objective " << format_double(r.objective) << " sigma_f "
      << r.best.theta.sigma_f << " ell " << r.best.theta.ell << " sigma " << r.best.theta.sigma_noise << '\n';
  return kExitOk;
}

int cmd_invert(const Flags& f, std::ostream& out) {
  PipelineConfig c = resolve_config(f);
  if (!f.theta.empty()) apply_theta_file(f.theta, c, f);
  const MeasurementSet data = load_measurements(f, c);
  const double sigma = resolve_sigma(c.sigma_noise, data);
  const ForwardModel model = build_forward_model(c, data.grid());
  const Eigen::VectorXd mu = data.mu_vector();
  const Inversion inv = invert(model, c.kernel, sigma, mu, c.inversion.constrained, c.inversion.map,
                               c.constraint_jitter);
  const ResultTable table = to_result_table(inv);
  write_result(out_path(f, "result.csv"), table);
  json summary = {{"sum_rho", inv.posterior.sum_rho},
                  {"lagrange_c", inv.posterior.lagrange_c ? json(*inv.posterior.lagrange_c) : json(nullptr)},
                  {"theta", theta_json(inv.theta)},
                  {"q", c.q},
                  {"kernel", to_string(c.kernel.kind)},
                  {"nu", c.kernel.nu},
                  {"seed", c.seed},
                  {"constrained", c.inversion.constrained},
                  {"method", c.inversion.map ? "map" : "posterior"},
                  {"quadrature", rule_name(c.size_grid.rule)},
                  {"negative_mass_fraction", inv.posterior.negative_mass_fraction(model.sizes)},
                  {"forward_relative_rmse", relative_rmse(inv.mu_hat, mu)}};
  if (!f.truth.empty()) summary["mse_vs_truth"] = evaluate_result(table, read_truth(f.truth), c.size_grid.rule).mse;
  write_json(out_path(f, "summary.json"), summary);
  out << "invert " << (c.inversion.constrained ? "constrained" : "unconstrained") << ' '
      << (c.inversion.map ? "map" : "posterior") << " sum_rho " << format_double(inv.posterior.sum_rho) << '\n';
  return kExitOk;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const PipelineConfig c = resolve_config(f);
  if (f.result.empty() || f.truth.empty()) throw ConfigError("eval needs --result PATH and --truth PATH");
  const ResultTable result = read_result(f.result);
  const TruthTable truth = read_truth(f.truth);
  EvalMetrics m = evaluate_result(result, truth, c.size_grid.rule);
  if (!f.measurements.empty()) {
    const MeasurementSet data = load_measurements(f, c);
    const SizeGrid grid = SizeGrid::from_points(result.r, c.size_grid.rule);
    const Eigen::MatrixXd a = kernel_matrix(data.grid(), grid, c.optics);
    const Eigen::VectorXd rho = Eigen::Map<const Eigen::VectorXd>(result.rho_mean.data(),
                                                                  static_cast<Eigen::Index>(result.rho_mean.size()));
    m.forward_relative_rmse = relative_rmse(forward_noiseless(a, rho, grid), data.mu_vector());
  }
  json j = {{"mse", m.mse}, {"sum_rho", m.sum_rho}, {"interpolated", m.interpolated}};
  j["forward_relative_rmse"] = m.forward_relative_rmse ? json(*m.forward_relative_rmse) : json(nullptr);
  write_json(out_path(f, "metrics.json"), j);
  out << "eval mse " << format_double(m.mse) << " sum_rho " << format_double(m.sum_rho) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Particle size distribution inversion from scattering spectra", "psd_invert"};
  app.require_subcommand(1, 1);
  Flags f;

  CLI::App* mie = app.add_subcommand("mie-table", "tabulate Q_sca and A(lambda, r) on the configured grids");
  CLI::App* sim = app.add_subcommand("simulate", "write synthetic measurements and the true distribution");
  CLI::App* fit_cmd = app.add_subcommand("fit", "maximize the evidence over (sigma_f, ell, sigma)");
  CLI::App* inv = app.add_subcommand("invert", "reconstruct the size distribution");
  CLI::App* ev = app.add_subcommand("eval", "compare a result against the true distribution");
  for (CLI::App* sub : {mie, sim, fit_cmd, inv, ev}) add_common(sub, f);

  fit_cmd->add_option("--measurements", f.measurements, "measurement CSV")->check(CLI::ExistingFile);
  fit_cmd->add_option("--objective", f.objective, "standard|joint");
  fit_cmd->add_option("--restarts", f.restarts, "optimizer restarts");

  inv->add_option("--measurements", f.measurements, "measurement CSV")->check(CLI::ExistingFile);
  inv->add_option("--theta", f.theta, "fit_summary.json supplying sigma_f, ell, sigma")->check(CLI::ExistingFile);
  inv->add_option("--truth", f.truth, "truth CSV; adds mse_vs_truth to the summary")->check(CLI::ExistingFile);
  CLI::Option* con = inv->add_flag("--constrained", f.constrained, "enforce the normalization (default)");
  CLI::Option* uncon = inv->add_flag("--unconstrained", f.unconstrained, "measurements only");
  con->excludes(uncon);
  CLI::Option* map = inv->add_flag("--map", f.map, "Lagrange-multiplier MAP estimate");
  CLI::Option* post = inv->add_flag("--posterior", f.posterior, "posterior mean and band (default)");
  map->excludes(post);

  ev->add_option("--result", f.result, "result CSV")->check(CLI::ExistingFile);
  ev->add_option("--truth", f.truth, "truth CSV")->check(CLI::ExistingFile);
  ev->add_option("--measurements", f.measurements, "measurement CSV for the forward check")->check(CLI::ExistingFile);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (mie->parsed()) return cmd_mie_table(f, out);
    if (sim->parsed()) return cmd_simulate(f, out);
    if (fit_cmd->parsed()) return cmd_fit(f, out);
    if (inv->parsed()) return cmd_invert(f, out);
    return cmd_eval(f, out);
  } catch (const OptimizationError& e) {
    err << "optimization failed: " << e.what() << '\n';
    return kExitOptimization;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what()
        << "\nhint: the system is ill-conditioned; raise constraint_jitter (e.g. 1e-10 * sigma_f^2), "
           "increase sigma_noise, or reduce q\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << '\n';
    return kExitUnexpected;
  }
}

}  // namespace psd
