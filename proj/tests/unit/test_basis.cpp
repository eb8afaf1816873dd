#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "psd/basis.hpp"
#include "psd/errors.hpp"
#include "psd/grids.hpp"

using namespace psd;

namespace {

// Unit half-width, centred at 1.
DomainSpec unit_domain() { return {0.5, 1.5, 1.0}; }

}  // namespace

TEST_CASE("Laplacian eigenvalues") {
  CHECK(eigenvalue(1, 1.0) == doctest::Approx(2.467401).epsilon(1e-6));
  CHECK(eigenvalue(2, 1.0) == doctest::Approx(9.869604).epsilon(1e-6));
  CHECK(eigenvalue(2, 1.0) == doctest::Approx(std::numbers::pi * std::numbers::pi).epsilon(1e-15));
  for (int j = 1; j <= 20; ++j) CHECK(eigenvalue(j, 2.0) == doctest::Approx(eigenvalue(j, 1.0) / 4.0).epsilon(1e-15));
  CHECK_THROWS_AS((void)eigenvalue(0, 1.0), DomainError);
  CHECK_THROWS_AS((void)eigenvalue(1, 0.0), DomainError);
}

TEST_CASE("basis functions") {
  CHECK(phi(1, 0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(phi(2, 0.0, 1.0)) < 1e-15);
  for (int j = 1; j <= 10; ++j) {
    CHECK(std::abs(phi(j, -1.0, 1.0)) < 1e-14);
    CHECK(std::abs(phi(j, 1.0, 1.0)) < 1e-14);
  }
  CHECK_THROWS_AS((void)phi(1, 1.01, 1.0), DomainError);
  CHECK_THROWS_AS((void)phi(0, 0.0, 1.0), DomainError);
  CHECK_NOTHROW((void)phi(1, 1.0 + 1e-14, 1.0));
}

TEST_CASE("orthonormality on a fine grid") {
  const double L = 0.45;
  const int m = 2048;
  const int q = 12;
  const double h = 2.0 * L / m;
  for (int i = 1; i <= q; ++i) {
    for (int j = i; j <= q; ++j) {
      double s = 0.0;
      for (int k = 0; k <= m; ++k) {
        const double x = -L + k * h;
        const double wk = (k == 0 || k == m) ? 0.5 * h : h;
        s += wk * phi(i, x, L) * phi(j, x, L);
      }
      CHECK(std::abs(s - (i == j ? 1.0 : 0.0)) < 1e-6);
    }
  }
}

TEST_CASE("phi_matrix matches the scalar basis") {
  const BasisExpansion e = build_expansion({0.05, 0.5, 1.0}, 16, {});
  const std::vector<double> r{0.05, 0.1, 0.27, 0.5};
  const Eigen::MatrixXd p = phi_matrix(e, r);
  CHECK(p.rows() == 4);
  CHECK(p.cols() == 16);
  for (int k = 0; k < 4; ++k)
    for (int j = 1; j <= 16; ++j) CHECK(p(k, j - 1) == doctest::Approx(phi(j, r[k] - e.center(), e.half_width())).epsilon(1e-12));
  const std::vector<double> outside{2.0};
  CHECK_THROWS_AS((void)phi_matrix(e, outside), DomainError);
}

TEST_CASE("expansion with a single mode") {
  const BasisExpansion e = build_expansion(unit_domain(), 1, {});
  CHECK(e.eigenvalues().size() == 1);
  CHECK(e.lambda_diag().size() == 1);
  const std::vector<double> r{1.0};
  CHECK(phi_matrix(e, r)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("spectral diagonal is positive and non-increasing") {
  for (KernelKind kind : {KernelKind::SE, KernelKind::Matern}) {
    const BasisExpansion e = build_expansion({0.05, 0.5, 1.0}, 256, {kind, 1.0, 0.02, 1.5});
    const Eigen::VectorXd& l = e.lambda_diag();
    CHECK(l.minCoeff() > 0.0);
    for (Eigen::Index j = 1; j < l.size(); ++j) CHECK(l[j] <= l[j - 1]);
  }
  // At ell = L the SE spectrum has fallen by more than 10x by the eighth mode.
  const BasisExpansion e = build_expansion(unit_domain(), 8, {KernelKind::SE, 1.0, 1.0, 1.5});
  CHECK(e.lambda_diag()[0] / e.lambda_diag()[7] >= 10.0);
  const BasisExpansion m = e.with_kernel({KernelKind::Matern, 2.0, 0.5, 0.5});
  CHECK(m.kernel().kind == KernelKind::Matern);
  CHECK(m.lambda_diag()[0] == doctest::Approx(spectral_density(m.kernel(), std::sqrt(m.eigenvalues()[0]))));
}

TEST_CASE("reduced-rank covariance reconstructs the kernel away from the boundary") {
  const DomainSpec d{0.05, 0.5, 1.0};
  const double width = d.r_max - d.r_min;
  const KernelHyperparams k{KernelKind::SE, 1.0, 0.2 * width, 1.5};
  auto max_error = [&](int q, const KernelHyperparams& kern) {
    const BasisExpansion e = build_expansion(d, q, kern);
    std::vector<double> r;
    for (int i = 0; i <= 40; ++i) r.push_back(d.r_min + 0.1 * width + 0.8 * width * i / 40.0);
    const Eigen::MatrixXd p = phi_matrix(e, r);
    const Eigen::MatrixXd approx = p * e.lambda_diag().asDiagonal() * p.transpose();
    double err = 0.0;
    for (std::size_t a = 0; a < r.size(); ++a)
      for (std::size_t b = 0; b < r.size(); ++b)
        err = std::max(err, std::abs(approx(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) -
                                     covariance(kern, r[a], r[b])));
    return err;
  };
  CHECK(max_error(128, k) <= 1e-2);
  // Max-abs error over the central 80% is non-increasing (to within 1%)
  // as q doubles.
  for (const KernelHyperparams& kern : {k, KernelHyperparams{KernelKind::Matern, 1.0, 0.2 * width, 1.5}}) {
    double prev = 1e300;
    for (int q : {16, 32, 64, 128, 256}) {
      const double err = max_error(q, kern);
      INFO("q=" << q << " err=" << err << " prev=" << prev);
      CHECK(err <= 1.01 * prev);
      prev = err;
    }
  }
}

TEST_CASE("analytic basis integrals") {
  const BasisExpansion e = build_expansion(unit_domain(), 6, {});
  const Eigen::VectorXd full = basis_integral(e, 0.0, 2.0);
  CHECK(full[0] == doctest::Approx(4.0 / std::numbers::pi).epsilon(1e-14));
  for (int j = 2; j <= 6; j += 2) CHECK(std::abs(full[j - 1]) < 1e-14);
  for (int j = 1; j <= 6; j += 2) CHECK(full[j - 1] == doctest::Approx(4.0 / (j * std::numbers::pi)).epsilon(1e-13));
  const Eigen::VectorXd left = basis_integral(e, 0.2, 0.9);
  const Eigen::VectorXd right = basis_integral(e, 0.9, 1.7);
  const Eigen::VectorXd both = basis_integral(e, 0.2, 1.7);
  CHECK((left + right - both).cwiseAbs().maxCoeff() < 1e-14);

  const BasisExpansion b = build_expansion({0.05, 0.5, 1.0}, 64, {});
  const Eigen::VectorXd exact = basis_integral(b, 0.05, 0.5);
  const SizeGrid g = SizeGrid::uniform(0.05, 0.5, 4097, QuadratureRule::Trapezoid);
  const Eigen::MatrixXd p = phi_matrix(b, g.radii());
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(g.weights().data(), static_cast<Eigen::Index>(g.size()));
  const Eigen::VectorXd trap = p.transpose() * w;
  CHECK((trap - exact).cwiseAbs().maxCoeff() <= 1e-5);
  // Composite Simpson on the same points.
  Eigen::VectorXd simpson = Eigen::VectorXd::Zero(64);
  const double h = 0.45 / 4096.0;
  for (Eigen::Index k = 0; k < 4097; ++k) {
    const double c = (k == 0 || k == 4096) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    simpson += (c * h / 3.0) * p.row(k).transpose();
  }
  CHECK((simpson - exact).cwiseAbs().maxCoeff() <= 1e-8);

  CHECK_THROWS_AS((void)basis_integral(e, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS((void)basis_integral(e, 0.1, 2.5), DomainError);
}

TEST_CASE("domain validation") {
  CHECK_THROWS_AS((void)build_expansion({0.05, 0.5, 0.4}, 8, {}), DomainError);
  CHECK_THROWS_AS((void)build_expansion({0.5, 0.05, 1.0}, 8, {}), DomainError);
  CHECK_THROWS_AS((void)build_expansion({0.05, 0.5, 1.0}, 0, {}), DomainError);
  CHECK_THROWS_AS((void)build_expansion({0.05, 0.5, 1.0}, 8, {KernelKind::SE, 1.0, 0.0, 1.5}), DomainError);
  const DomainSpec d{0.05, 0.5, 1.5};
  CHECK(d.half_width() == doctest::Approx(0.675));
  CHECK(d.center() == doctest::Approx(0.275));
}
