#include "psd/inference.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "psd/errors.hpp"
#include "psd/linalg.hpp"

namespace psd {
namespace {

std::string shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_mu(const ForwardOperators& ops, const Eigen::VectorXd& mu) {
  if (mu.size() != ops.psi_A.rows())
    throw DimensionError("measurement vector has " + std::to_string(mu.size()) +
                         " entries but psi_A has " + std::to_string(ops.psi_A.rows()) + " rows");
  if (!mu.allFinite()) throw DomainError("measurement vector has non-finite entries");
}

Eigen::VectorXd to_vector(std::span<const double> s) {
  return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

PosteriorResult finish(Eigen::VectorXd alpha, Eigen::MatrixXd alpha_cov, const BasisExpansion& expansion,
                       const SizeGrid& output) {
  PosteriorResult res;
  const Eigen::MatrixXd phi = phi_matrix(expansion, output.radii());
  res.radii = to_vector(output.radii());
  res.rho_mean = phi * alpha;
  if (phi.rows() <= kFullCovarianceLimit) {
    res.rho_cov = symmetrized(phi * alpha_cov * phi.transpose());
  } else {
    res.cov_is_diagonal = true;
    res.rho_cov = ((phi * alpha_cov).array() * phi.array()).rowwise().sum().matrix();
  }
  res.sum_rho = output.integrate(std::span<const double>(res.rho_mean.data(), res.rho_mean.size()));
  res.alpha_mean = std::move(alpha);
  res.alpha_cov = std::move(alpha_cov);
  return res;
}

// Coefficient posterior given measurements only:
//   cov = (sigma^-2 Psi^T Psi + Lambda^-1)^-1, mean = sigma^-2 cov Psi^T mu,
// evaluated as S (I + sigma^-2 S Psi^T Psi S)^-1 S with S = Lambda^(1/2) so that
// vanishing prior variances stay harmless.
void measurement_posterior(const ForwardOperators& ops, const Eigen::VectorXd& lambda,
                           const Eigen::VectorXd& mu, Eigen::VectorXd& alpha, Eigen::MatrixXd& cov) {
  const Eigen::Index q = lambda.size();
  if (ops.psi_A.rows() == 0) {
    alpha = Eigen::VectorXd::Zero(q);
    cov = lambda.asDiagonal();
    return;
  }
  const Eigen::VectorXd s = lambda.cwiseSqrt();
  const double inv_s2 = 1.0 / (ops.sigma_noise * ops.sigma_noise);
  const Eigen::MatrixXd g = ops.psi_A * s.asDiagonal();
  Eigen::MatrixXd b = inv_s2 * (g.transpose() * g);
  b.diagonal().array() += 1.0;
  const SpdFactor f = factor_spd(b, "posterior precision (I + S Psi^T Psi S / sigma^2)");
  const Eigen::MatrixXd binv = f.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(q, q)));
  cov = symmetrized(s.asDiagonal() * binv * s.asDiagonal());
  alpha = inv_s2 * (s.asDiagonal() * f.solve(Eigen::VectorXd(g.transpose() * mu)));
}

}  // namespace

void ForwardOperators::validate(int q) const {
  if (psi_A.cols() != q)
    throw DimensionError("psi_A is " + shape(psi_A) + " but the basis has q=" + std::to_string(q));
  if (psi_B.cols() != q || psi_B.rows() < 1)
    throw DimensionError("psi_B is " + shape(psi_B) + " but the basis has q=" + std::to_string(q));
  if (constraint_targets.size() != psi_B.rows())
    throw DimensionError("constraint targets do not match the constraint rows");
  if (psi_B.isZero(0.0)) throw DomainError("constraint row psi_B is identically zero");
  if (!(sigma_noise > 0.0) || !std::isfinite(sigma_noise))
    throw DomainError("sigma_noise must be positive, got " + std::to_string(sigma_noise));
  if (!(constraint_jitter >= 0.0))
    throw DomainError("constraint_jitter must be >= 0, got " + std::to_string(constraint_jitter));
}

Eigen::VectorXd PosteriorResult::rho_variance() const {
  if (cov_is_diagonal) return rho_cov.col(0);
  return rho_cov.diagonal();
}

Eigen::VectorXd PosteriorResult::lower95() const {
  return rho_mean - 1.96 * rho_variance().cwiseMax(0.0).cwiseSqrt();
}

Eigen::VectorXd PosteriorResult::upper95() const {
  return rho_mean + 1.96 * rho_variance().cwiseMax(0.0).cwiseSqrt();
}

double PosteriorResult::negative_mass_fraction(const SizeGrid& grid) const {
  const auto w = grid.weights();
  if (static_cast<Eigen::Index>(w.size()) != rho_mean.size())
    throw DimensionError("grid does not match the posterior output");
  double neg = 0.0, total = 0.0;
  for (Eigen::Index k = 0; k < rho_mean.size(); ++k) {
    const double m = std::abs(rho_mean[k]) * w[static_cast<std::size_t>(k)];
    total += m;
    if (rho_mean[k] < 0.0) neg += m;
  }
  return total > 0.0 ? neg / total : 0.0;
}

Eigen::MatrixXd project_forward(const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& phi_quadrature,
                                const Eigen::VectorXd& weights) {
  if (kernel.cols() != phi_quadrature.rows() || weights.size() != kernel.cols())
    throw DimensionError("project_forward: kernel " + shape(kernel) + ", Phi " + shape(phi_quadrature) +
                         ", " + std::to_string(weights.size()) + " weights are not conformable");
  return kernel * weights.asDiagonal() * phi_quadrature;
}

ForwardOperators make_operators(const Eigen::MatrixXd& kernel, const SizeGrid& quadrature,
                                const BasisExpansion& expansion, double sigma_noise,
                                double constraint_jitter, ConstraintRow row) {
  ForwardOperators ops;
  const Eigen::MatrixXd phi = phi_matrix(expansion, quadrature.radii());
  const Eigen::VectorXd w = to_vector(quadrature.weights());
  ops.psi_A = project_forward(kernel, phi, w);
  if (row == ConstraintRow::Quadrature)
    ops.psi_B = (phi.transpose() * w).transpose();
  else
    ops.psi_B = basis_integral(expansion, expansion.domain().r_min, expansion.domain().r_max).transpose();
  ops.constraint_targets = Eigen::VectorXd::Ones(1);
  ops.sigma_noise = sigma_noise;
  ops.constraint_jitter = constraint_jitter;
  ops.validate(expansion.q());
  return ops;
}

PosteriorResult posterior_unconstrained(const ForwardOperators& ops, const BasisExpansion& expansion,
                                        const SizeGrid& output, const Eigen::VectorXd& mu) {
  ops.validate(expansion.q());
  require_mu(ops, mu);
  if (mu.size() == 0) throw DomainError("unconstrained posterior needs at least one measurement");
  Eigen::VectorXd alpha;
  Eigen::MatrixXd cov;
  measurement_posterior(ops, expansion.lambda_diag(), mu, alpha, cov);
  return finish(std::move(alpha), std::move(cov), expansion, output);
}

PosteriorResult posterior_constrained(const ForwardOperators& ops, const BasisExpansion& expansion,
                                      const SizeGrid& output, const Eigen::VectorXd& mu) {
  ops.validate(expansion.q());
  require_mu(ops, mu);
  const Eigen::VectorXd& lambda = expansion.lambda_diag();
  Eigen::VectorXd alpha;
  Eigen::MatrixXd cov;
  measurement_posterior(ops, lambda, mu, alpha, cov);

  // Condition on each constraint row in turn; with zero jitter the scalar
  // Schur complement h P h^T is the exact noise-free update.
  for (Eigen::Index r = 0; r < ops.psi_B.rows(); ++r) {
    const Eigen::RowVectorXd h = ops.psi_B.row(r);
    const Eigen::VectorXd ph = cov * h.transpose();
    const double schur = h.dot(ph) + ops.constraint_jitter;
    const double prior_scale = (h.array().square() * lambda.transpose().array()).sum() + ops.constraint_jitter;
    const double residual = ops.constraint_targets[r] - h.dot(alpha);
    if (!(schur > 1e-12 * prior_scale)) {
      if (std::abs(residual) <= 1e-8 * std::max(1.0, std::abs(ops.constraint_targets[r]))) continue;
      std::ostringstream msg;
      msg << "constraint Schur complement " << schur << " is degenerate (prior scale " << prior_scale
          << ") with residual " << residual << "; raise constraint_jitter";
      throw NumericError(msg.str());
    }
    const Eigen::VectorXd gain = ph / schur;
    alpha += gain * residual;
    cov = symmetrized(cov - gain * ph.transpose());
  }
  return finish(std::move(alpha), std::move(cov), expansion, output);
}

PosteriorResult map_lagrange(const ForwardOperators& ops, const BasisExpansion& expansion,
                             const SizeGrid& output, const Eigen::VectorXd& mu) {
  ops.validate(expansion.q());
  require_mu(ops, mu);
  const Eigen::VectorXd& lambda = expansion.lambda_diag();
  const Eigen::Index q = lambda.size();
  const Eigen::MatrixXd ht = ops.psi_B.transpose();  // q x k

  // M^-1 = Lambda - Lambda Psi^T (sigma^2 I + Psi Lambda Psi^T)^-1 Psi Lambda.
  Eigen::MatrixXd m_inv = lambda.asDiagonal();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(q);  // M^-1 Psi^T mu / sigma^2
  if (ops.psi_A.rows() > 0) {
    const Eigen::MatrixXd pl = ops.psi_A * lambda.asDiagonal();  // n x q
    Eigen::MatrixXd d = pl * ops.psi_A.transpose();
    d.diagonal().array() += ops.sigma_noise * ops.sigma_noise;
    const SpdFactor f = factor_spd(d, "measurement covariance D");
    m_inv = symmetrized(m_inv - pl.transpose() * f.solve(pl));
    u = pl.transpose() * f.solve(mu);
  }
  const Eigen::MatrixXd w = m_inv * ht;   // q x k
  const Eigen::MatrixXd hwh = ops.psi_B * w;
  const double scale = (ops.psi_B.array().square().rowwise() * lambda.transpose().array()).sum();
  if (!(hwh.diagonal().minCoeff() > 1e-14 * scale)) {
    std::ostringstream msg;
    msg << "h^T M^-1 h = " << hwh.diagonal().minCoeff() << " is not positive; the prior is degenerate";
    throw NumericError(msg.str());
  }
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(hwh);
  const Eigen::VectorXd c = cod.solve(Eigen::VectorXd(ops.psi_B * u - ops.constraint_targets));
  Eigen::VectorXd alpha = u - w * c;
  Eigen::MatrixXd cov = symmetrized(m_inv - w * cod.solve(Eigen::MatrixXd(w.transpose())));
  PosteriorResult res = finish(std::move(alpha), std::move(cov), expansion, output);
  res.lagrange_c = c[0];
  return res;
}

PosteriorResult posterior_dense_oracle(const KernelHyperparams& kernel, const Eigen::MatrixXd& kernel_matrix,
                                       const SizeGrid& grid, const Eigen::VectorXd& mu, double sigma2,
                                       bool constrained) {
  const std::size_t p = grid.size();
  if (p > kDenseOracleLimit)
    throw DomainError("dense-grid oracle refuses " + std::to_string(p) + " points (limit " +
                      std::to_string(kDenseOracleLimit) + ")");
  if (kernel_matrix.cols() != static_cast<Eigen::Index>(p) || kernel_matrix.rows() != mu.size())
    throw DimensionError("dense oracle: kernel matrix " + shape(kernel_matrix) + " does not match grid (" +
                         std::to_string(p) + ") and measurements (" + std::to_string(mu.size()) + ")");
  if (!(sigma2 > 0.0)) throw DomainError("dense oracle: noise variance must be positive");
  if (!constrained && mu.size() == 0) throw DomainError("dense oracle: nothing to condition on");

  const Eigen::VectorXd r = to_vector(grid.radii());
  const Eigen::VectorXd w = to_vector(grid.weights());
  const auto ip = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd k(ip, ip);
  for (Eigen::Index i = 0; i < ip; ++i)
    for (Eigen::Index j = 0; j < ip; ++j) k(i, j) = covariance(kernel, r[i], r[j]);

  const Eigen::MatrixXd a_op = kernel_matrix * w.asDiagonal();  // n x p
  const Eigen::Index n = a_op.rows();

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(ip);
  Eigen::MatrixXd cov = k;
  Eigen::MatrixXd pinv_ak;      // P^-1 A K,  n x p
  Eigen::VectorXd pinv_mu;      // P^-1 mu
  if (n > 0) {
    Eigen::MatrixXd pmat = a_op * k * a_op.transpose();
    pmat.diagonal().array() += sigma2;
    const SpdFactor f = factor_spd(pmat, "dense measurement covariance P");
    const Eigen::MatrixXd ak = a_op * k;
    pinv_ak = f.solve(ak);
    pinv_mu = f.solve(mu);
    mean = ak.transpose() * pinv_mu;
    cov -= ak.transpose() * pinv_ak;
  }
  if (constrained) {
    // Block elimination: S_c = B K B^T - B K A^T P^-1 A K B^T.
    const Eigen::RowVectorXd bk = w.transpose() * k;  // 1 x p
    double schur = bk.dot(w);
    Eigen::RowVectorXd cross = bk;                    // B K - B K A^T P^-1 A K
    double innovation = 1.0;
    if (n > 0) {
      const Eigen::VectorXd q_vec = a_op * bk.transpose();  // A K B^T
      schur -= q_vec.dot(pinv_ak * w);
      cross -= q_vec.transpose() * pinv_ak;
      innovation -= q_vec.dot(pinv_mu);
    }
    if (!(schur > 0.0)) throw NumericError("dense oracle: constraint Schur complement is not positive");
    mean += cross.transpose() * (innovation / schur);
    cov -= cross.transpose() * cross / schur;
  }

  PosteriorResult res;
  res.radii = r;
  res.rho_mean = mean;
  res.rho_cov = symmetrized(cov);
  res.sum_rho = grid.integrate(std::span<const double>(mean.data(), mean.size()));
  return res;
}

Eigen::VectorXd predict_measurements(const ForwardOperators& ops, const Eigen::VectorXd& alpha) {
  if (alpha.size() != ops.psi_A.cols())
    throw DimensionError("coefficient vector has " + std::to_string(alpha.size()) + " entries but psi_A is " +
                         shape(ops.psi_A));
  return ops.psi_A * alpha;
}

}  // namespace psd
