#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "doctest.h"
#include "psd/basis.hpp"
#include "psd/errors.hpp"
#include "psd/hyperopt.hpp"
#include "support/oracles.hpp"

using namespace psd;

namespace {

Eigen::VectorXd eigenvalues(int q, double half_width = 0.45) {
  Eigen::VectorXd e(q);
  for (int j = 1; j <= q; ++j) e[j - 1] = eigenvalue(j, half_width);
  return e;
}

HyperState state(double sf, double ell, double sigma, KernelKind kind = KernelKind::SE) {
  HyperState s;
  s.theta = {sf, ell, sigma};
  s.kind = kind;
  s.bounds = LogBounds::from_natural({1e-2, 1e-2, 1e-4}, {1e2, 1.0, 10.0});
  return s;
}

// Data drawn from the model itself at the given state.
Eigen::VectorXd draw(std::mt19937_64& g, const Eigen::MatrixXd& psi, const Eigen::VectorXd& lambda, double sigma) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd alpha(lambda.size()), eps(psi.rows());
  for (Eigen::Index j = 0; j < alpha.size(); ++j) alpha[j] = std::sqrt(lambda[j]) * nd(g);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = sigma * nd(g);
  return psi * alpha + eps;
}

}  // namespace

TEST_CASE("scalar evidence of a unit-variance zero observation") {
  const HyperState s = state(1.0, 0.2, 0.6);
  const Eigen::VectorXd e = eigenvalues(1);
  const double lambda = spectral_density(s.kernel(), std::sqrt(e[0]));
  Eigen::MatrixXd psi(1, 1);
  psi(0, 0) = std::sqrt(0.64 / lambda);
  const MarginalLikelihood m(psi, Eigen::RowVectorXd::Ones(1), e, Eigen::VectorXd::Zero(1));
  CHECK(m.standard(s) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-13));
  CHECK(m.standard(s) == doctest::Approx(-0.918939).epsilon(1e-6));
}

TEST_CASE("factorized evidence equals the dense Gaussian log-density") {
  std::mt19937_64 g(1);
  const int n = 12;
  // q < n uses the basis-space identities, q >= n the measurement space.
  for (int q : {4, 8, 12, 16, 40, 128}) {
    for (KernelKind kind : {KernelKind::SE, KernelKind::Matern}) {
      const Eigen::MatrixXd psi = oracle::random_matrix(g, n, q);
      const Eigen::RowVectorXd h = oracle::random_matrix(g, 1, q, 0.1, 1.0);
      const Eigen::VectorXd mu = oracle::random_matrix(g, n, 1);
      const MarginalLikelihood m(psi, h, eigenvalues(q), mu);
      const HyperState s = state(1.3, 0.09, 0.2, kind);
      const LmlBlocks b = m.blocks(s);
      const Eigen::VectorXd lambda = m.lambda_diag(s);
      INFO("q=" << q);
      CHECK((b.D - (psi * lambda.asDiagonal() * psi.transpose() + 0.04 * Eigen::MatrixXd::Identity(n, n))).norm() <= 1e-12 * b.D.norm());
      const double ref_std = oracle::dense_log_pdf(b.D, mu);
      CHECK(std::abs(m.standard(s) - ref_std) <= 1e-9 * std::abs(ref_std));
      const double ref_joint = oracle::stacked_log_pdf(psi, h, lambda, mu, 0.04, 1.0);
      CHECK(std::abs(m.joint(s) - ref_joint) <= 1e-9 * std::abs(ref_joint));
      CHECK(m.evaluate(Objective::Joint, s) == m.joint(s));
      CHECK(b.Y > 0.0);
      CHECK(b.Y <= b.prior_constraint_var);
    }
  }
}

TEST_CASE("evidence without measurements") {
  const Eigen::RowVectorXd h = Eigen::RowVectorXd::Constant(6, 0.4);
  const MarginalLikelihood m(Eigen::MatrixXd(0, 6), h, eigenvalues(6), Eigen::VectorXd(0), 1.0);
  const HyperState s = state(1.0, 0.2, 0.1);
  CHECK(m.standard(s) == 0.0);
  const double hlh = (h.array().square() * m.lambda_diag(s).transpose().array()).sum();
  const double ref = -0.5 * std::log(2.0 * std::numbers::pi * hlh) - 0.5 / hlh;
  CHECK(m.joint(s) == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("evidence prefers the noise level that generated the data") {
  std::mt19937_64 g(2);
  const int n = 60, q = 24;
  const Eigen::MatrixXd psi = oracle::random_matrix(g, n, q);
  const Eigen::RowVectorXd h = oracle::random_matrix(g, 1, q, 0.1, 1.0);
  const HyperState truth = state(1.0, 0.1, 0.05);
  const MarginalLikelihood probe(psi, h, eigenvalues(q), Eigen::VectorXd::Zero(n));
  const Eigen::VectorXd mu = draw(g, psi, probe.lambda_diag(truth), 0.05);
  const MarginalLikelihood m(psi, h, eigenvalues(q), mu);
  const HyperState small = state(1.0, 0.1, 0.0005);
  CHECK(m.standard(truth) > m.standard(small));
  CHECK(m.joint(truth) > m.joint(small));
}

TEST_CASE("optimizer stays in bounds, is deterministic and reports a reproducible optimum") {
  std::mt19937_64 g(3);
  const int n = 40, q = 32;
  const Eigen::MatrixXd psi = oracle::random_matrix(g, n, q);
  const Eigen::RowVectorXd h = oracle::random_matrix(g, 1, q, 0.1, 1.0);
  HyperState init = state(1.0, 0.15, 0.2);
  const MarginalLikelihood probe(psi, h, eigenvalues(q), Eigen::VectorXd::Zero(n));
  const Eigen::VectorXd mu = draw(g, psi, probe.lambda_diag(state(2.0, 0.08, 0.05)), 0.05);
  const MarginalLikelihood m(psi, h, eigenvalues(q), mu);
  OptimizerOptions opt;
  opt.restarts = 3;
  opt.seed = 17;
  opt.max_evaluations = 300;
  for (Objective obj : {Objective::Standard, Objective::Joint}) {
    const OptimizationResult a = optimize(obj, m, init, opt);
    const OptimizationResult b = optimize(obj, m, init, opt);
    CHECK(a.objective == b.objective);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k) {
      CHECK(a.trace[k].theta.ell == b.trace[k].theta.ell);
      CHECK(init.bounds.contains(a.trace[k].theta));
    }
    CHECK(a.restarts.size() == 3);
    CHECK(a.objective >= m.evaluate(obj, init));
    for (const auto& r : a.restarts) CHECK(a.objective >= r.objective);
    CHECK(m.evaluate(obj, a.best) == a.objective);
    CHECK(a.best.nu == init.nu);
    CHECK(a.best.kind == init.kind);
  }
  opt.seed = 18;
  const OptimizationResult c = optimize(Objective::Standard, m, init, opt);
  const OptimizationResult d = optimize(Objective::Standard, m, init, OptimizerOptions{3, 17, 300});
  CHECK(c.restarts[1].start.ell != d.restarts[1].start.ell);
  CHECK(c.restarts[0].start.ell == doctest::Approx(init.theta.ell));
}

TEST_CASE("optimizer failure modes") {
  std::mt19937_64 g(4);
  const Eigen::MatrixXd psi = oracle::random_matrix(g, 5, 6);
  Eigen::VectorXd mu = oracle::random_matrix(g, 5, 1);
  mu[1] = std::numeric_limits<double>::quiet_NaN();
  const MarginalLikelihood m(psi, Eigen::RowVectorXd::Ones(6), eigenvalues(6), mu);
  OptimizerOptions opt;
  opt.restarts = 2;
  opt.max_evaluations = 30;
  CHECK_THROWS_WITH_AS((void)optimize(Objective::Standard, m, state(1.0, 0.1, 0.1), opt),
                       doctest::Contains("restart 1"), OptimizationError);
  HyperState outside = state(1.0, 0.1, 0.1);
  outside.theta.ell = 5.0;
  CHECK_THROWS_AS((void)optimize(Objective::Standard, m, outside, opt), DomainError);
  opt.restarts = 0;
  CHECK_THROWS_AS((void)optimize(Objective::Standard, m, state(1.0, 0.1, 0.1), opt), DomainError);

  // The constraint row measured almost noise-free leaves no constraint variance.
  const Eigen::RowVectorXd h = psi.row(0);
  const MarginalLikelihood pinned(psi.topRows(1), h, eigenvalues(6), Eigen::VectorXd::Zero(1));
  HyperState s = state(1.0, 0.3, 1e-4);
  s.theta.sigma_noise = 1e-12;
  CHECK_THROWS_WITH_AS((void)pinned.joint(s), doctest::Contains("sigma="), NumericError);
  CHECK_THROWS_AS((void)objective_from_string("evidence"), DomainError);
  CHECK(objective_from_string(to_string(Objective::Joint)) == Objective::Joint);
  CHECK_THROWS_AS(MarginalLikelihood(psi, Eigen::RowVectorXd::Ones(5), eigenvalues(6), mu), DimensionError);
  CHECK_THROWS_AS(LogBounds::from_natural({1.0, 1.0, 1.0}, {0.5, 2.0, 2.0}), DomainError);
}

TEST_CASE("trace CSV") {
  std::vector<TraceRow> rows{{0, 0, {1.0, 0.1, 0.01}, -3.5},
                             {1, 4, {2.0, 0.2, 0.02}, -std::numeric_limits<double>::infinity()}};
  const auto dir = std::filesystem::temp_directory_path() / "psd_trace_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "trace.csv").string();
  write_trace_csv(rows, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "restart,iter,sigma_f,ell,sigma,objective");
  std::getline(in, line);
  CHECK(line == "0,0,1,0.10000000000000001,0.01,-3.5");
  std::getline(in, line);
  CHECK(line.rfind("1,4,", 0) == 0);
  CHECK(line.find("inf") != std::string::npos);
  std::filesystem::remove_all(dir);
}
