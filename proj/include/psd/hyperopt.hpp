#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psd/kernels.hpp"

namespace psd {

// theta = (sigma_f, ell, sigma).
struct Theta {
  double sigma_f = 1.0;
  double ell = 0.1;
  double sigma_noise = 1e-3;

  [[nodiscard]] std::array<double, 3> to_log() const;
  [[nodiscard]] static Theta from_log(const std::array<double, 3>& x);
};

// Box in natural-log parameter space, same ordering as Theta.
struct LogBounds {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};

  [[nodiscard]] static LogBounds from_natural(const Theta& lo, const Theta& hi);
  [[nodiscard]] bool contains(const Theta& t) const;
};

struct HyperState {
  Theta theta;
  KernelKind kind = KernelKind::SE;
  double nu = 1.5;  // fixed, never optimized
  LogBounds bounds;

  [[nodiscard]] KernelHyperparams kernel() const { return {kind, theta.sigma_f, theta.ell, nu}; }
};

// Blocks of the covariance of [mu; Z]: D = Psi_A Lambda Psi_A^T + sigma^2 I,
// V = Psi_A Lambda Psi_B^T and Y = Psi_B Lambda Psi_B^T - V^T D^-1 V.
struct LmlBlocks {
  Eigen::MatrixXd D;
  Eigen::VectorXd V;
  double prior_constraint_var = 0.0;  // Psi_B Lambda Psi_B^T
  double Y = 0.0;
};

enum class Objective { Standard, Joint };

struct EvidenceTerms;

[[nodiscard]] std::string to_string(Objective o);
[[nodiscard]] Objective objective_from_string(const std::string& name);

// Evidence of the measurements (and optionally the normalization
// pseudo-observation Z) as a function of theta. The projections are fixed;
// only the spectral diagonal and the noise level move with theta.
class MarginalLikelihood {
 public:
  MarginalLikelihood(Eigen::MatrixXd psi_A, Eigen::RowVectorXd psi_B, Eigen::VectorXd eigenvalues,
                     Eigen::VectorXd mu, double constraint_value = 1.0);

  [[nodiscard]] Eigen::VectorXd lambda_diag(const HyperState& state) const;
  [[nodiscard]] LmlBlocks blocks(const HyperState& state) const;

  // -1/2 log|D| - 1/2 mu^T D^-1 mu - n/2 log 2pi.
  [[nodiscard]] double standard(const HyperState& state) const;
  // Schur-complement form of log N([mu; Z] | 0, Sigma_yy).
  [[nodiscard]] double joint(const HyperState& state) const;
  [[nodiscard]] double evaluate(Objective objective, const HyperState& state) const;

  [[nodiscard]] const Eigen::VectorXd& mu() const noexcept { return mu_; }
  [[nodiscard]] const Eigen::MatrixXd& psi_A() const noexcept { return psi_A_; }
  [[nodiscard]] const Eigen::RowVectorXd& psi_B() const noexcept { return psi_B_; }
  [[nodiscard]] double constraint_value() const noexcept { return z_; }

 private:
  [[nodiscard]] std::vector<Eigen::Index> active_modes(const Eigen::VectorXd& lambda) const;
  [[nodiscard]] EvidenceTerms terms(const HyperState& state, bool with_constraint) const;

  Eigen::MatrixXd psi_A_;
  Eigen::VectorXd col_norm2_;
  Eigen::RowVectorXd psi_B_;
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd mu_;
  double z_;
};

struct TraceRow {
  int restart = 0;
  int iter = 0;
  Theta theta;
  double objective = 0.0;  // log evidence; -inf marks a failed evaluation
};

struct RestartSummary {
  Theta start;
  Theta best;
  double objective = 0.0;
  int evaluations = 0;
  bool ok = false;
  std::string diagnostic;
};

struct OptimizerOptions {
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_evaluations = 600;
  double initial_step = 0.5;  // log-space simplex edge
  double f_tolerance = 1e-10;
  double x_tolerance = 1e-7;
};

struct OptimizationResult {
  HyperState best;
  double objective = 0.0;
  int best_restart = 0;
  std::vector<TraceRow> trace;
  std::vector<RestartSummary> restarts;
};

// Nelder-Mead on log theta inside the bounds. Restart 0 starts from
// init.theta; the others start log-uniformly inside the box, drawn from a
// seeded mt19937_64. The best restart wins, ties to the lowest index.
[[nodiscard]] OptimizationResult optimize(Objective objective, const MarginalLikelihood& model,
                                          const HyperState& init, const OptimizerOptions& options);

// restart,iter,sigma_f,ell,sigma,objective
void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace psd
