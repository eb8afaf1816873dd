#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace psd {

// Cholesky factor of a symmetric positive definite matrix. When the plain
// factorization fails, diagonal jitter of 1e-12, 1e-11, ... 1e-8 times the
// mean diagonal is tried in turn.
struct SpdFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt.solve(rhs); }
  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt.solve(rhs); }
  // log det of the (jittered) matrix.
  [[nodiscard]] double log_det() const;
};

// Throws NumericError naming `what` when every jitter level fails.
[[nodiscard]] SpdFactor factor_spd(const Eigen::MatrixXd& m, std::string_view what);

[[nodiscard]] Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m);

}  // namespace psd
