#include "psd/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <functional>
#include <random>
#include <sstream>

#include "psd/basis.hpp"
#include "psd/data_io.hpp"
#include "psd/errors.hpp"
#include "psd/linalg.hpp"

namespace psd {

std::array<double, 3> Theta::to_log() const {
  return {std::log(sigma_f), std::log(ell), std::log(sigma_noise)};
}

Theta Theta::from_log(const std::array<double, 3>& x) {
  return {std::exp(x[0]), std::exp(x[1]), std::exp(x[2])};
}

LogBounds LogBounds::from_natural(const Theta& lo, const Theta& hi) {
  LogBounds b{lo.to_log(), hi.to_log()};
  for (int i = 0; i < 3; ++i)
    if (!std::isfinite(b.lo[i]) || !std::isfinite(b.hi[i]) || !(b.hi[i] > b.lo[i]))
      throw DomainError("hyperparameter bounds must be positive, finite and increasing");
  return b;
}

bool LogBounds::contains(const Theta& t) const {
  const auto x = t.to_log();
  for (int i = 0; i < 3; ++i)
    if (x[i] < lo[i] - 1e-12 || x[i] > hi[i] + 1e-12) return false;
  return true;
}

std::string to_string(Objective o) { return o == Objective::Standard ? "standard" : "joint"; }

Objective objective_from_string(const std::string& name) {
  if (name == "standard") return Objective::Standard;
  if (name == "joint") return Objective::Joint;
  throw DomainError("unknown objective '" + name + "' (expected standard|joint)");
}

MarginalLikelihood::MarginalLikelihood(Eigen::MatrixXd psi_A, Eigen::RowVectorXd psi_B,
                                       Eigen::VectorXd eigenvalues, Eigen::VectorXd mu,
                                       double constraint_value)
    : psi_A_(std::move(psi_A)),
      psi_B_(std::move(psi_B)),
      eigenvalues_(std::move(eigenvalues)),
      mu_(std::move(mu)),
      z_(constraint_value) {
  if (psi_A_.cols() != eigenvalues_.size() || psi_B_.cols() != eigenvalues_.size())
    throw DimensionError("marginal likelihood: projections do not match the basis size");
  if (psi_A_.rows() != mu_.size())
    throw DimensionError("marginal likelihood: psi_A rows do not match the measurements");
  col_norm2_ = psi_A_.colwise().squaredNorm().transpose();
}

Eigen::VectorXd MarginalLikelihood::lambda_diag(const HyperState& state) const {
  return spectral_diagonal(eigenvalues_, state.kernel());
}

LmlBlocks MarginalLikelihood::blocks(const HyperState& state) const {
  if (!(state.theta.sigma_noise > 0.0)) throw DomainError("noise sigma must be positive");
  const Eigen::VectorXd lambda = lambda_diag(state);
  LmlBlocks b;
  const Eigen::MatrixXd pl = psi_A_ * lambda.asDiagonal();
  b.D = pl * psi_A_.transpose();
  b.D.diagonal().array() += state.theta.sigma_noise * state.theta.sigma_noise;
  b.V = pl * psi_B_.transpose();
  b.prior_constraint_var = (psi_B_.array().square() * lambda.transpose().array()).sum();
  b.Y = b.prior_constraint_var;
  if (b.D.rows() > 0) {
    const SpdFactor f = factor_spd(b.D, "measurement covariance D");
    b.Y -= b.V.dot(f.solve(b.V));
  }
  return b;
}

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::string echo(const Theta& t) {
  std::ostringstream s;
  s.precision(6);
  s << "theta=(sigma_f=" << t.sigma_f << ", ell=" << t.ell << ", sigma=" << t.sigma_noise << ")";
  return s.str();
}

}  // namespace

// Pieces of the Gaussian evidence shared by both objectives.
struct EvidenceTerms {
  double log_det_d = 0.0;
  double quad = 0.0;        // mu^T D^-1 mu
  double hlh = 0.0;         // Psi_B Lambda Psi_B^T
  double v_dinv_v = 0.0;    // V^T D^-1 V
  double v_dinv_mu = 0.0;   // V^T D^-1 mu
};

std::vector<Eigen::Index> MarginalLikelihood::active_modes(const Eigen::VectorXd& lambda) const {
  // A mode whose share of trace(Psi Lambda Psi^T) and of Psi_B Lambda Psi_B^T
  // is below 1e-20 cannot change D or Y in double precision.
  const Eigen::VectorXd ca = lambda.cwiseProduct(col_norm2_);
  const Eigen::VectorXd cb = lambda.cwiseProduct(psi_B_.transpose().cwiseAbs2());
  const double ta = ca.sum(), tb = cb.sum();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < lambda.size(); ++j)
    if (ca[j] > 1e-20 * ta || cb[j] > 1e-20 * tb) keep.push_back(j);
  if (keep.empty()) keep.push_back(0);
  return keep;
}

double MarginalLikelihood::standard(const HyperState& state) const {
  const auto n = static_cast<double>(mu_.size());
  if (mu_.size() == 0) return 0.0;
  try {
    const auto t = terms(state, false);
    return -0.5 * t.log_det_d - 0.5 * t.quad - 0.5 * n * kLog2Pi;
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at " + echo(state.theta));
  }
}

double MarginalLikelihood::joint(const HyperState& state) const {
  const auto n = static_cast<double>(mu_.size());
  EvidenceTerms t;
  try {
    t = terms(state, true);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at " + echo(state.theta));
  }
  const double y = t.hlh - t.v_dinv_v;
  const double innovation = z_ - t.v_dinv_mu;
  if (!(y > 1e-14 * t.hlh))
    throw NumericError("constraint Schur complement Y=" + std::to_string(y) + " is not positive at " +
                       echo(state.theta));
  return -0.5 * t.quad - 0.5 * innovation * innovation / y - 0.5 * t.log_det_d - 0.5 * std::log(y) -
         0.5 * (n + 1.0) * kLog2Pi;
}

EvidenceTerms MarginalLikelihood::terms(const HyperState& state, bool with_constraint) const {
  if (!(state.theta.sigma_noise > 0.0)) throw DomainError("noise sigma must be positive");
  const Eigen::VectorXd lambda = lambda_diag(state);
  const std::vector<Eigen::Index> keep = active_modes(lambda);
  const auto qa = static_cast<Eigen::Index>(keep.size());
  const Eigen::Index n = mu_.size();
  const double s2 = state.theta.sigma_noise * state.theta.sigma_noise;

  EvidenceTerms t;
  Eigen::MatrixXd g(n, qa);  // Psi_A S on the active modes
  Eigen::VectorXd hs(qa);
  for (Eigen::Index c = 0; c < qa; ++c) {
    const double sj = std::sqrt(lambda[keep[static_cast<std::size_t>(c)]]);
    g.col(c) = psi_A_.col(keep[static_cast<std::size_t>(c)]) * sj;
    hs[c] = psi_B_[keep[static_cast<std::size_t>(c)]] * sj;
  }
  t.hlh = (psi_B_.array().square() * lambda.transpose().array()).sum();
  if (n == 0) return t;

  if (qa < n) {
    // D = s2 (I + G G^T / s2): determinant and solves through the qa x qa
    // matrix B = I + G^T G / s2.
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(qa, qa);
    b.selfadjointView<Eigen::Lower>().rankUpdate(g.transpose(), 1.0 / s2);
    b.triangularView<Eigen::StrictlyUpper>() = b.transpose();
    const SpdFactor f = factor_spd(b, "measurement covariance D (basis form)");
    t.log_det_d = static_cast<double>(n) * std::log(s2) + f.log_det();
    const Eigen::VectorXd gmu = g.transpose() * mu_;
    const Eigen::VectorXd bgmu = f.solve(gmu);
    t.quad = (mu_.squaredNorm() - gmu.dot(bgmu) / s2) / s2;
    if (with_constraint) {
      // V = G hs, so G^T V = (G^T G) hs = s2 (B - I) hs.
      const Eigen::VectorXd gv = s2 * (b * hs - hs);
      const Eigen::VectorXd bgv = f.solve(gv);
      const Eigen::VectorXd v = g * hs;
      t.v_dinv_v = (v.squaredNorm() - gv.dot(bgv) / s2) / s2;
      t.v_dinv_mu = (v.dot(mu_) - gv.dot(bgmu) / s2) / s2;
    }
    return t;
  }

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  d.selfadjointView<Eigen::Lower>().rankUpdate(g);
  d.triangularView<Eigen::StrictlyUpper>() = d.transpose();
  d.diagonal().array() += s2;
  const SpdFactor f = factor_spd(d, "measurement covariance D");
  t.log_det_d = f.log_det();
  const Eigen::VectorXd d_mu = f.solve(mu_);
  t.quad = mu_.dot(d_mu);
  if (with_constraint) {
    const Eigen::VectorXd v = g * hs;
    t.v_dinv_v = v.dot(f.solve(v));
    t.v_dinv_mu = v.dot(d_mu);
  }
  return t;
}

double MarginalLikelihood::evaluate(Objective objective, const HyperState& state) const {
  return objective == Objective::Standard ? standard(state) : joint(state);
}

namespace {

using Point = std::array<double, 3>;

Point clamp_to(const Point& x, const LogBounds& b) {
  Point out;
  for (int i = 0; i < 3; ++i) out[i] = std::clamp(x[i], b.lo[i], b.hi[i]);
  return out;
}

double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

struct Vertex {
  Point x;
  double cost;  // negative log evidence, +inf on failure
};

// Minimises cost inside the box; every evaluation is appended to the trace.
RestartSummary nelder_mead(const std::function<double(const Point&)>& cost, const Point& start,
                           const LogBounds& bounds, const OptimizerOptions& opt) {
  RestartSummary summary;
  constexpr int dim = 3;
  std::vector<Vertex> simplex;
  simplex.reserve(dim + 1);
  const Point x0 = clamp_to(start, bounds);
  simplex.push_back({x0, cost(x0)});
  for (int i = 0; i < dim; ++i) {
    Point x = x0;
    // Step inward when the start sits on the upper face.
    x[i] = x0[i] + opt.initial_step <= bounds.hi[i] ? x0[i] + opt.initial_step : x0[i] - opt.initial_step;
    x = clamp_to(x, bounds);
    simplex.push_back({x, cost(x)});
  }
  int evals = dim + 1;
  auto by_cost = [](const Vertex& a, const Vertex& b) { return a.cost < b.cost; };

  while (evals < opt.max_evaluations) {
    std::stable_sort(simplex.begin(), simplex.end(), by_cost);
    const Vertex& best = simplex.front();
    const Vertex& worst = simplex.back();
    double spread = 0.0;
    for (const auto& v : simplex)
      for (int i = 0; i < dim; ++i) spread = std::max(spread, std::abs(v.x[i] - best.x[i]));
    if (std::isfinite(worst.cost) &&
        worst.cost - best.cost <= opt.f_tolerance * (1.0 + std::abs(best.cost)) && spread <= opt.x_tolerance)
      break;
    if (spread <= 1e-14) break;

    Point centroid{};
    for (int v = 0; v < dim; ++v)
      for (int i = 0; i < dim; ++i) centroid[i] += simplex[v].x[i] / dim;
    auto along = [&](double t) {
      Point p;
      for (int i = 0; i < dim; ++i) p[i] = centroid[i] + t * (worst.x[i] - centroid[i]);
      return clamp_to(p, bounds);
    };

    const Point xr = along(-1.0);
    const double fr = cost(xr);
    ++evals;
    if (fr < simplex[0].cost) {
      const Point xe = along(-2.0);
      const double fe = cost(xe);
      ++evals;
      simplex.back() = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
      continue;
    }
    if (fr < simplex[dim - 1].cost) {
      simplex.back() = {xr, fr};
      continue;
    }
    const bool outside = fr < worst.cost;
    const Point xc = along(outside ? -0.5 : 0.5);
    const double fc = cost(xc);
    ++evals;
    if (fc < (outside ? fr : worst.cost)) {
      simplex.back() = {xc, fc};
      continue;
    }
    for (int v = 1; v <= dim; ++v) {
      Point p;
      for (int i = 0; i < dim; ++i) p[i] = simplex[0].x[i] + 0.5 * (simplex[v].x[i] - simplex[0].x[i]);
      simplex[v] = {p, cost(p)};
      ++evals;
    }
  }
  std::stable_sort(simplex.begin(), simplex.end(), by_cost);
  summary.start = Theta::from_log(x0);
  summary.best = Theta::from_log(simplex.front().x);
  summary.objective = -simplex.front().cost;
  summary.evaluations = evals;
  summary.ok = std::isfinite(simplex.front().cost);
  return summary;
}

}  // namespace

OptimizationResult optimize(Objective objective, const MarginalLikelihood& model, const HyperState& init,
                            const OptimizerOptions& options) {
  if (options.restarts < 1) throw DomainError("optimizer needs at least one restart");
  if (!init.bounds.contains(init.theta))
    throw DomainError("initial hyperparameters " + echo(init.theta) + " lie outside the bounds");

  OptimizationResult result;
  std::mt19937_64 gen(options.seed);
  std::vector<Point> starts;
  starts.push_back(init.theta.to_log());
  for (int r = 1; r < options.restarts; ++r) {
    Point p;
    for (int i = 0; i < 3; ++i) p[i] = init.bounds.lo[i] + uniform01(gen) * (init.bounds.hi[i] - init.bounds.lo[i]);
    starts.push_back(p);
  }

  int best = -1;
  for (int r = 0; r < options.restarts; ++r) {
    int iter = 0;
    std::string last_error;
    auto cost = [&](const Point& x) {
      HyperState s = init;
      s.theta = Theta::from_log(x);
      double value = -std::numeric_limits<double>::infinity();
      try {
        value = model.evaluate(objective, s);
        if (!std::isfinite(value)) value = -std::numeric_limits<double>::infinity();
      } catch (const NumericError& e) {
        last_error = e.what();
      }
      result.trace.push_back({r, iter++, s.theta, value});
      return -value;
    };
    RestartSummary summary = nelder_mead(cost, starts[static_cast<std::size_t>(r)], init.bounds, options);
    if (!summary.ok) summary.diagnostic = last_error.empty() ? "no finite evaluation" : last_error;
    if (summary.ok && (best < 0 || summary.objective > result.restarts[static_cast<std::size_t>(best)].objective))
      best = r;
    result.restarts.push_back(std::move(summary));
  }

  if (best < 0) {
    std::ostringstream msg;
    msg << "all " << options.restarts << " optimizer restarts failed:";
    for (std::size_t r = 0; r < result.restarts.size(); ++r)
      msg << "\n  restart " << r << " from " << echo(result.restarts[r].start) << ": "
          << result.restarts[r].diagnostic;
    throw OptimizationError(msg.str());
  }
  result.best_restart = best;
  result.best = init;
  result.best.theta = result.restarts[static_cast<std::size_t>(best)].best;
  result.objective = result.restarts[static_cast<std::size_t>(best)].objective;
  return result;
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ostringstream out;
  out << "restart,iter,sigma_f,ell,sigma,objective\n";
  for (const auto& row : trace) {
    out << row.restart << ',' << row.iter << ',' << format_double(row.theta.sigma_f) << ','
        << format_double(row.theta.ell) << ',' << format_double(row.theta.sigma_noise) << ','
        << format_double(row.objective) << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace psd
