#include "psd/linalg.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "psd/errors.hpp"

namespace psd {

double SpdFactor::log_det() const {
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

SpdFactor factor_spd(const Eigen::MatrixXd& m, std::string_view what) {
  if (m.rows() != m.cols())
    throw DimensionError(std::string(what) + " is not square");
  if (!m.allFinite()) throw NumericError(std::string(what) + " has non-finite entries");
  SpdFactor f;
  f.llt.compute(m);
  if (f.llt.info() == Eigen::Success) return f;

  const double scale = m.rows() > 0 ? m.diagonal().mean() : 1.0;
  for (double rel = 1e-12; rel <= 1.0001e-8; rel *= 10.0) {
    f.jitter = rel * std::abs(scale);
    Eigen::MatrixXd jittered = m;
    jittered.diagonal().array() += f.jitter;
    f.llt.compute(jittered);
    if (f.llt.info() == Eigen::Success) return f;
  }
  std::ostringstream msg;
  msg << what << " is not positive definite after diagonal jitter up to 1e-8 of its mean diagonal ("
      << m.rows() << "x" << m.cols() << ", mean diagonal " << scale << ")";
  throw NumericError(msg.str());
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace psd
