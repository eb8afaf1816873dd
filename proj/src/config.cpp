#include "psd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "psd/errors.hpp"

namespace psd {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown config key '" + where + "." + key + "'");
}

template <class T>
T get(const json& j, const std::string& where, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

template <class T>
void maybe(const json& j, const std::string& where, const char* key, T& out) {
  if (j.contains(key)) out = get<T>(j, where, key);
}

Complex parse_complex(const json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return {v[0].get<double>(), v[1].get<double>()};
  throw ConfigError(where + " must be a number or [re, im]");
}

std::array<double, 2> parse_range(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(where + " must be [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

QuadratureRule parse_rule(const std::string& s) {
  if (s == "trapezoid") return QuadratureRule::Trapezoid;
  if (s == "midpoint") return QuadratureRule::Midpoint;
  throw ConfigError("size_grid.quadrature must be trapezoid|midpoint, got '" + s + "'");
}

template <class F>
auto translate(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

void parse_optics(const json& j, OpticsConfig& o) {
  const std::string w = "optics";
  check_keys(j, w, {"n_particle", "n_medium", "volume_fraction", "truncation_margin", "index_table"});
  if (j.contains("n_particle")) o.n_particle = parse_complex(j["n_particle"], w + ".n_particle");
  maybe(j, w, "n_medium", o.n_medium);
  maybe(j, w, "volume_fraction", o.volume_fraction);
  maybe(j, w, "truncation_margin", o.truncation_margin);
  if (j.contains("index_table")) {
    const json& t = j["index_table"];
    if (!t.is_array()) throw ConfigError("optics.index_table must be an array of [wavelength, re, im]");
    o.index_wavelengths.clear();
    o.index_values.clear();
    for (const auto& row : t) {
      if (!row.is_array() || row.size() != 3 || !row[0].is_number() || !row[1].is_number() || !row[2].is_number())
        throw ConfigError("optics.index_table rows must be [wavelength, re, im]");
      o.index_wavelengths.push_back(row[0].get<double>());
      o.index_values.emplace_back(row[1].get<double>(), row[2].get<double>());
    }
  }
}

void parse_truth(const json& j, TrueDistributionSpec& t) {
  check_keys(j, "truth", {"family", "components"});
  if (j.contains("family"))
    t.family = translate([&] { return distribution_family_from_string(get<std::string>(j, "truth", "family")); });
  if (j.contains("components")) {
    const json& c = j["components"];
    if (!c.is_array()) throw ConfigError("truth.components must be an array");
    t.components.clear();
    for (const auto& comp : c) {
      check_keys(comp, "truth.components[]", {"weight", "center", "width"});
      DistributionComponent d;
      maybe(comp, "truth.components[]", "weight", d.weight);
      maybe(comp, "truth.components[]", "center", d.center);
      maybe(comp, "truth.components[]", "width", d.width);
      t.components.push_back(d);
    }
  }
}

json complex_json(Complex c) { return json::array({c.real(), c.imag()}); }

}  // namespace

PipelineConfig::PipelineConfig() {
  truth.family = DistributionFamily::Bimodal;
  truth.components = {{0.6, 0.085, 0.025}, {0.4, 0.30, 0.05}};
}

void PipelineConfig::validate() const {
  translate([&] {
    optics.validate();
    kernel.validate();
    domain().validate();
    truth.validate();
    (void)size_grid.build();
    (void)wavelength_grid.build();
    return 0;
  });
  if (q < 1) throw ConfigError("q must be >= 1");
  if (!(constraint_jitter >= 0.0)) throw ConfigError("constraint_jitter must be >= 0");
  if (sigma_noise && !(*sigma_noise > 0.0)) throw ConfigError("sigma_noise must be positive");
  if (!(noise.relative >= 0.0)) throw ConfigError("noise.relative must be >= 0");
  if (noise.absolute && !(*noise.absolute >= 0.0)) throw ConfigError("noise.sigma must be >= 0");
  if (optimizer.restarts < 1) throw ConfigError("optimizer.restarts must be >= 1");
  if (optimizer.max_evaluations < 4) throw ConfigError("optimizer.max_evaluations must be >= 4");
  for (const auto* b : {&optimizer.bounds.sigma_f, &optimizer.bounds.ell, &optimizer.bounds.sigma})
    if (*b && !((*b)->at(0) > 0.0 && (*b)->at(1) > (*b)->at(0)))
      throw ConfigError("optimizer bounds must satisfy 0 < lo < hi");
}

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig c;
  check_keys(j, "config",
             {"optics", "size_grid", "wavelength_grid", "domain", "kernel", "q", "constraint_jitter", "sigma_noise",
              "truth", "noise", "seed", "optimizer", "inversion", "length_unit"});
  if (j.contains("optics")) parse_optics(j["optics"], c.optics);
  if (j.contains("size_grid")) {
    const json& s = j["size_grid"];
    check_keys(s, "size_grid", {"r_min", "r_max", "n", "quadrature"});
    maybe(s, "size_grid", "r_min", c.size_grid.r_min);
    maybe(s, "size_grid", "r_max", c.size_grid.r_max);
    maybe(s, "size_grid", "n", c.size_grid.n);
    if (s.contains("quadrature")) c.size_grid.rule = parse_rule(get<std::string>(s, "size_grid", "quadrature"));
  }
  if (j.contains("wavelength_grid")) {
    const json& s = j["wavelength_grid"];
    check_keys(s, "wavelength_grid", {"min", "max", "n"});
    maybe(s, "wavelength_grid", "min", c.wavelength_grid.min);
    maybe(s, "wavelength_grid", "max", c.wavelength_grid.max);
    maybe(s, "wavelength_grid", "n", c.wavelength_grid.n);
  }
  if (j.contains("domain")) {
    check_keys(j["domain"], "domain", {"half_width_factor"});
    maybe(j["domain"], "domain", "half_width_factor", c.half_width_factor);
  }
  if (j.contains("kernel")) {
    const json& k = j["kernel"];
    check_keys(k, "kernel", {"kind", "sigma_f", "ell", "nu"});
    if (k.contains("kind"))
      c.kernel.kind = translate([&] { return kernel_kind_from_string(get<std::string>(k, "kernel", "kind")); });
    maybe(k, "kernel", "sigma_f", c.kernel.sigma_f);
    maybe(k, "kernel", "ell", c.kernel.ell);
    maybe(k, "kernel", "nu", c.kernel.nu);
  }
  maybe(j, "config", "q", c.q);
  maybe(j, "config", "constraint_jitter", c.constraint_jitter);
  if (j.contains("sigma_noise") && !j["sigma_noise"].is_null()) c.sigma_noise = get<double>(j, "config", "sigma_noise");
  if (j.contains("truth")) parse_truth(j["truth"], c.truth);
  if (j.contains("noise")) {
    const json& n = j["noise"];
    check_keys(n, "noise", {"relative", "sigma"});
    maybe(n, "noise", "relative", c.noise.relative);
    if (n.contains("sigma") && !n["sigma"].is_null()) c.noise.absolute = get<double>(n, "noise", "sigma");
  }
  maybe(j, "config", "seed", c.seed);
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    check_keys(o, "optimizer", {"restarts", "max_evaluations", "objective", "bounds"});
    maybe(o, "optimizer", "restarts", c.optimizer.restarts);
    maybe(o, "optimizer", "max_evaluations", c.optimizer.max_evaluations);
    if (o.contains("objective"))
      c.optimizer.objective = translate([&] { return objective_from_string(get<std::string>(o, "optimizer", "objective")); });
    if (o.contains("bounds")) {
      const json& b = o["bounds"];
      check_keys(b, "optimizer.bounds", {"sigma_f", "ell", "sigma"});
      if (b.contains("sigma_f")) c.optimizer.bounds.sigma_f = parse_range(b["sigma_f"], "optimizer.bounds.sigma_f");
      if (b.contains("ell")) c.optimizer.bounds.ell = parse_range(b["ell"], "optimizer.bounds.ell");
      if (b.contains("sigma")) c.optimizer.bounds.sigma = parse_range(b["sigma"], "optimizer.bounds.sigma");
    }
  }
  if (j.contains("inversion")) {
    const json& v = j["inversion"];
    check_keys(v, "inversion", {"constrained", "method"});
    maybe(v, "inversion", "constrained", c.inversion.constrained);
    if (v.contains("method")) {
      const auto m = get<std::string>(v, "inversion", "method");
      if (m != "map" && m != "posterior") throw ConfigError("inversion.method must be map|posterior");
      c.inversion.map = m == "map";
    }
  }
  maybe(j, "config", "length_unit", c.length_unit);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  j["optics"] = {{"n_particle", complex_json(c.optics.n_particle)},
                 {"n_medium", c.optics.n_medium},
                 {"volume_fraction", c.optics.volume_fraction},
                 {"truncation_margin", c.optics.truncation_margin}};
  if (!c.optics.index_wavelengths.empty()) {
    json t = json::array();
    for (std::size_t i = 0; i < c.optics.index_wavelengths.size(); ++i)
      t.push_back({c.optics.index_wavelengths[i], c.optics.index_values[i].real(), c.optics.index_values[i].imag()});
    j["optics"]["index_table"] = t;
  }
  j["size_grid"] = {{"r_min", c.size_grid.r_min},
                    {"r_max", c.size_grid.r_max},
                    {"n", c.size_grid.n},
                    {"quadrature", c.size_grid.rule == QuadratureRule::Midpoint ? "midpoint" : "trapezoid"}};
  j["wavelength_grid"] = {{"min", c.wavelength_grid.min}, {"max", c.wavelength_grid.max}, {"n", c.wavelength_grid.n}};
  j["domain"] = {{"half_width_factor", c.half_width_factor}};
  j["kernel"] = {{"kind", to_string(c.kernel.kind)},
                 {"sigma_f", c.kernel.sigma_f},
                 {"ell", c.kernel.ell},
                 {"nu", c.kernel.nu}};
  j["q"] = c.q;
  j["constraint_jitter"] = c.constraint_jitter;
  j["sigma_noise"] = c.sigma_noise ? json(*c.sigma_noise) : json(nullptr);
  json comps = json::array();
  for (const auto& d : c.truth.components)
    comps.push_back({{"weight", d.weight}, {"center", d.center}, {"width", d.width}});
  j["truth"] = {{"family", to_string(c.truth.family)}, {"components", comps}};
  j["noise"] = {{"relative", c.noise.relative}, {"sigma", c.noise.absolute ? json(*c.noise.absolute) : json(nullptr)}};
  j["seed"] = c.seed;
  json bounds = json::object();
  if (c.optimizer.bounds.sigma_f) bounds["sigma_f"] = *c.optimizer.bounds.sigma_f;
  if (c.optimizer.bounds.ell) bounds["ell"] = *c.optimizer.bounds.ell;
  if (c.optimizer.bounds.sigma) bounds["sigma"] = *c.optimizer.bounds.sigma;
  j["optimizer"] = {{"restarts", c.optimizer.restarts},
                    {"max_evaluations", c.optimizer.max_evaluations},
                    {"objective", to_string(c.optimizer.objective)},
                    {"bounds", bounds}};
  j["inversion"] = {{"constrained", c.inversion.constrained}, {"method", c.inversion.map ? "map" : "posterior"}};
  j["length_unit"] = c.length_unit;
  return j.dump(2) + "\n";
}

}  // namespace psd
