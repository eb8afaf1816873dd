#include "psd/data_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "psd/errors.hpp"

namespace psd {

std::string to_string(DistributionFamily f) {
  switch (f) {
    case DistributionFamily::Gaussian: return "gaussian";
    case DistributionFamily::LogNormal: return "lognormal";
    case DistributionFamily::Bimodal: return "bimodal";
  }
  return "bimodal";
}

DistributionFamily distribution_family_from_string(const std::string& name) {
  if (name == "gaussian") return DistributionFamily::Gaussian;
  if (name == "lognormal") return DistributionFamily::LogNormal;
  if (name == "bimodal") return DistributionFamily::Bimodal;
  throw DomainError("unknown distribution family '" + name + "' (expected gaussian|lognormal|bimodal)");
}

void TrueDistributionSpec::validate() const {
  const std::size_t needed = family == DistributionFamily::Bimodal ? 2 : 1;
  if (components.size() != needed)
    throw DomainError(to_string(family) + " distribution needs " + std::to_string(needed) + " component(s), got " +
                      std::to_string(components.size()));
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !(c.width > 0.0) || !std::isfinite(c.center))
      throw DomainError("distribution components need positive weight and width");
    if (family == DistributionFamily::LogNormal && !(c.center > 0.0))
      throw DomainError("log-normal median radius must be positive");
  }
}

Eigen::VectorXd make_true_rho(const TrueDistributionSpec& spec, const SizeGrid& grid) {
  spec.validate();
  const auto r = grid.radii();
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r.size()));
  for (const auto& c : spec.components) {
    for (std::size_t k = 0; k < r.size(); ++k) {
      double v;
      if (spec.family == DistributionFamily::LogNormal) {
        const double z = (std::log(r[k]) - std::log(c.center)) / c.width;
        v = std::exp(-0.5 * z * z) / (r[k] * c.width * std::sqrt(2.0 * std::numbers::pi));
      } else {
        const double z = (r[k] - c.center) / c.width;
        v = std::exp(-0.5 * z * z) / (c.width * std::sqrt(2.0 * std::numbers::pi));
      }
      rho[static_cast<Eigen::Index>(k)] += c.weight * v;
    }
  }
  const double mass = grid.integrate(std::span<const double>(rho.data(), rho.size()));
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw DomainError("distribution parameters give zero density on the radius grid");
  rho /= mass;
  return rho;
}

double portable_log(double x) {
  if (!(x > 0.0)) throw DomainError("portable_log needs a positive argument");
  int e = 0;
  double m = std::frexp(x, &e);  // x = m 2^e, m in [0.5, 1)
  if (m < std::numbers::sqrt2 / 2.0) {
    m *= 2.0;
    --e;
  }
  // log m = 2 atanh(t), |t| <= 0.1716.
  const double t = (m - 1.0) / (m + 1.0);
  const double t2 = t * t;
  double term = t, sum = 0.0;
  for (int k = 1; k <= 41; k += 2) {
    sum += term / k;
    term *= t2;
  }
  return static_cast<double>(e) * std::numbers::ln2 + 2.0 * sum;
}

double NormalGenerator::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  for (;;) {
    const double u = 2.0 * (static_cast<double>(engine_() >> 11) * 0x1.0p-53) - 1.0;
    const double v = 2.0 * (static_cast<double>(engine_() >> 11) * 0x1.0p-53) - 1.0;
    const double s = u * u + v * v;
    if (s >= 1.0 || s == 0.0) continue;
    const double f = std::sqrt(-2.0 * portable_log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }
}

void MeasurementSet::validate() const {
  if (wavelengths.empty()) throw DomainError("no measurements");
  if (mu.size() != wavelengths.size())
    throw DimensionError("measurement set has " + std::to_string(wavelengths.size()) + " wavelengths but " +
                         std::to_string(mu.size()) + " values");
  if (!sigma.empty() && sigma.size() != mu.size())
    throw DimensionError("measurement sigma column length does not match");
  for (double v : mu)
    if (!std::isfinite(v)) throw DomainError("measurement values must be finite");
  (void)grid();
}

Eigen::VectorXd MeasurementSet::mu_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
}

Eigen::VectorXd forward_noiseless(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& rho, const SizeGrid& grid) {
  const auto w = grid.weights();
  if (kernel.cols() != rho.size() || rho.size() != static_cast<Eigen::Index>(w.size()))
    throw DimensionError("forward model: kernel, density and grid sizes differ");
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  return kernel * rho.cwiseProduct(wv);
}

MeasurementSet simulate_measurements(const Eigen::VectorXd& rho, const Eigen::MatrixXd& kernel,
                                     const WavelengthGrid& wavelengths, const SizeGrid& grid, double sigma,
                                     std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw DomainError("noise sigma must be >= 0");
  if (kernel.rows() != static_cast<Eigen::Index>(wavelengths.size()))
    throw DimensionError("kernel rows do not match the wavelength grid");
  const Eigen::VectorXd clean = forward_noiseless(kernel, rho, grid);
  MeasurementSet set;
  set.wavelengths.assign(wavelengths.values().begin(), wavelengths.values().end());
  set.mu.resize(set.wavelengths.size());
  NormalGenerator gen(seed);
  for (std::size_t i = 0; i < set.mu.size(); ++i) {
    const double noise = sigma > 0.0 ? sigma * gen.next() : 0.0;
    set.mu[i] = clean[static_cast<Eigen::Index>(i)] + noise;
  }
  set.sigma.assign(set.mu.size(), sigma);
  set.sigma_used = sigma;
  set.seed = seed;
  set.provenance = Provenance::Synthetic;
  return set;
}

MeasurementSet simulate_measurements(const Eigen::VectorXd& rho, const OpticsConfig& optics,
                                     const WavelengthGrid& wavelengths, const SizeGrid& grid, double sigma,
                                     std::uint64_t seed) {
  return simulate_measurements(rho, kernel_matrix(wavelengths, grid, optics), wavelengths, grid, sigma, seed);
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw Error("cannot move " + tmp.string() + " to " + path + ": " + ec.message());
}

namespace {

struct Column {
  std::string name;
  std::string unit;  // empty when absent
};

struct CsvTable {
  std::vector<Column> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

Column parse_column(const std::string& raw, std::size_t line) {
  const std::string s = trim(raw);
  const auto open = s.find('[');
  if (open == std::string::npos) return {s, ""};
  if (s.back() != ']') throw ParseError("malformed unit in column '" + s + "'", line);
  return {s.substr(0, open), s.substr(open + 1, s.size() - open - 2)};
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path, 0);
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (!have_header) {
      for (const auto& f : fields) t.header.push_back(parse_column(f, line_no));
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError(path + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      const std::string s = trim(f);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ParseError(path + ": cannot parse number '" + s + "'", line_no);
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header) throw ParseError(path + ": file is empty", 0);
  return t;
}

void require_header(const CsvTable& t, const std::vector<std::string>& names, const std::string& path) {
  bool ok = t.header.size() == names.size();
  for (std::size_t i = 0; ok && i < names.size(); ++i) ok = t.header[i].name == names[i];
  if (!ok) {
    std::string expected;
    for (const auto& n : names) expected += (expected.empty() ? "" : ",") + n;
    throw ParseError(path + ": expected header '" + expected + "'", 1);
  }
}

std::vector<double> column(const CsvTable& t, std::size_t c) {
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) out.push_back(r[c]);
  return out;
}

}  // namespace

void write_measurements(const std::string& path, const MeasurementSet& set) {
  set.validate();
  std::ostringstream out;
  const bool with_sigma = !set.sigma.empty();
  out << (with_sigma ? "wavelength,mu,sigma\n" : "wavelength,mu\n");
  for (std::size_t i = 0; i < set.mu.size(); ++i) {
    out << format_double(set.wavelengths[i]) << ',' << format_double(set.mu[i]);
    if (with_sigma) out << ',' << format_double(set.sigma[i]);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

MeasurementSet read_measurements(const std::string& path, const std::string& length_unit) {
  const CsvTable t = read_csv(path);
  const bool with_sigma = t.header.size() == 3;
  require_header(t, with_sigma ? std::vector<std::string>{"wavelength", "mu", "sigma"}
                               : std::vector<std::string>{"wavelength", "mu"},
                 path);
  if (!length_unit.empty() && !t.header[0].unit.empty() && t.header[0].unit != length_unit)
    throw ParseError(path + ": wavelength unit '" + t.header[0].unit + "' disagrees with configured length unit '" +
                         length_unit + "'",
                     1);
  if (t.rows.empty()) throw ParseError(path + ": no measurements", 0);
  MeasurementSet set;
  set.wavelengths = column(t, 0);
  set.mu = column(t, 1);
  if (with_sigma) {
    set.sigma = column(t, 2);
    for (std::size_t i = 0; i < set.sigma.size(); ++i)
      if (!(set.sigma[i] >= 0.0)) throw ParseError(path + ": sigma must be >= 0", t.line_numbers[i]);
  }
  for (std::size_t i = 0; i < set.wavelengths.size(); ++i) {
    if (!(set.wavelengths[i] > 0.0)) throw ParseError(path + ": wavelength must be positive", t.line_numbers[i]);
    if (i > 0 && !(set.wavelengths[i] > set.wavelengths[i - 1]))
      throw ParseError(path + ": wavelengths must be strictly increasing", t.line_numbers[i]);
    if (!std::isfinite(set.mu[i])) throw ParseError(path + ": mu must be finite", t.line_numbers[i]);
  }
  set.provenance = Provenance::External;
  return set;
}

void write_truth(const std::string& path, std::span<const double> radii, const Eigen::VectorXd& rho) {
  if (static_cast<Eigen::Index>(radii.size()) != rho.size()) throw DimensionError("truth radii and density differ");
  std::ostringstream out;
  out << "r,rho\n";
  for (std::size_t k = 0; k < radii.size(); ++k)
    out << format_double(radii[k]) << ',' << format_double(rho[static_cast<Eigen::Index>(k)]) << '\n';
  write_file_atomic(path, out.str());
}

TruthTable read_truth(const std::string& path) {
  const CsvTable t = read_csv(path);
  require_header(t, {"r", "rho"}, path);
  if (t.rows.empty()) throw ParseError(path + ": no rows", 0);
  return {column(t, 0), column(t, 1)};
}

void write_result(const std::string& path, const ResultTable& table) {
  const std::size_t n = table.r.size();
  if (table.rho_mean.size() != n || table.rho_lo95.size() != n || table.rho_hi95.size() != n)
    throw DimensionError("result columns differ in length");
  std::ostringstream out;
  out << "r,rho_mean,rho_lo95,rho_hi95\n";
  for (std::size_t k = 0; k < n; ++k)
    out << format_double(table.r[k]) << ',' << format_double(table.rho_mean[k]) << ','
        << format_double(table.rho_lo95[k]) << ',' << format_double(table.rho_hi95[k]) << '\n';
  write_file_atomic(path, out.str());
}

ResultTable read_result(const std::string& path) {
  const CsvTable t = read_csv(path);
  require_header(t, {"r", "rho_mean", "rho_lo95", "rho_hi95"}, path);
  if (t.rows.empty()) throw ParseError(path + ": no rows", 0);
  return {column(t, 0), column(t, 1), column(t, 2), column(t, 3)};
}

double result_integral(const ResultTable& table, QuadratureRule rule) {
  const SizeGrid grid = SizeGrid::from_points(table.r, rule);
  return grid.integrate(table.rho_mean);
}

ResultTable load_checked_result(const std::string& result_csv, const std::string& summary_json) {
  ResultTable table = read_result(result_csv);
  std::ifstream in(summary_json);
  if (!in) throw ParseError("cannot open " + summary_json, 0);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(summary_json + ": " + e.what(), 0);
  }
  if (!j.contains("sum_rho") || !j["sum_rho"].is_number())
    throw ParseError(summary_json + ": missing numeric sum_rho", 0);
  const QuadratureRule rule =
      j.value("quadrature", std::string("trapezoid")) == "midpoint" ? QuadratureRule::Midpoint : QuadratureRule::Trapezoid;
  const double recorded = j["sum_rho"].get<double>();
  const double recomputed = result_integral(table, rule);
  if (std::abs(recorded - recomputed) > 1e-9)
    throw ParseError(summary_json + ": sum_rho " + format_double(recorded) + " disagrees with the quadrature " +
                         format_double(recomputed) + " of " + result_csv,
                     0);
  return table;
}

}  // namespace psd
