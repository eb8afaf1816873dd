#include <numeric>

#include "doctest.h"
#include "psd/errors.hpp"
#include "psd/grids.hpp"

using namespace psd;

TEST_CASE("uniform trapezoid grid: endpoints half-weighted, weights sum to the width") {
  const SizeGrid g = SizeGrid::uniform(0.05, 0.5, 200, QuadratureRule::Trapezoid);
  CHECK(g.size() == 200);
  CHECK(g.radii().front() == 0.05);
  CHECK(g.radii().back() == 0.5);
  const auto w = g.weights();
  const double h = 0.45 / 199.0;
  CHECK(w[0] == doctest::Approx(0.5 * h).epsilon(1e-14));
  CHECK(w[100] == doctest::Approx(h).epsilon(1e-14));
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  CHECK(std::abs(total - 0.45) <= 1e-12 * 0.45);
}

TEST_CASE("midpoint grid uses cell centres") {
  const SizeGrid g = SizeGrid::uniform(0.0 + 1.0, 2.0, 4, QuadratureRule::Midpoint);
  CHECK(g.radii()[0] == doctest::Approx(1.125));
  CHECK(g.radii()[3] == doctest::Approx(1.875));
  const auto w = g.weights();
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("from_points reproduces uniform weights") {
  for (auto rule : {QuadratureRule::Trapezoid, QuadratureRule::Midpoint}) {
    const SizeGrid u = SizeGrid::uniform(0.1, 0.9, 17, rule);
    const SizeGrid p = SizeGrid::from_points({u.radii().begin(), u.radii().end()}, rule);
    for (std::size_t k = 0; k < u.size(); ++k) CHECK(p.weights()[k] == doctest::Approx(u.weights()[k]).epsilon(1e-12));
  }
}

TEST_CASE("trapezoid integrates linear functions exactly") {
  const SizeGrid g = SizeGrid::uniform(0.05, 0.5, 37, QuadratureRule::Trapezoid);
  std::vector<double> f;
  for (double r : g.radii()) f.push_back(3.0 * r + 1.0);
  const double exact = 1.5 * (0.25 - 0.0025) + 0.45;
  CHECK(g.integrate(f) == doctest::Approx(exact).epsilon(1e-13));
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(SizeGrid({0.1, 0.1}, {1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(SizeGrid({-0.1, 0.1}, {1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(SizeGrid({0.1, 0.2}, {1.0}), DimensionError);
  CHECK_THROWS_AS(SizeGrid({0.1, 0.2}, {1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(WavelengthGrid({0.5, 0.4}), DomainError);
  CHECK_THROWS_AS(WavelengthGrid(std::vector<double>{}), DomainError);
  const SizeGrid g = SizeGrid::uniform(0.1, 0.2, 3, QuadratureRule::Trapezoid);
  CHECK_THROWS_AS((void)g.integrate(std::vector<double>{1.0}), DimensionError);
}
