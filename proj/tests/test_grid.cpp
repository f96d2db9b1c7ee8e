#include "divtree/grid.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"

using namespace divtree;

namespace {

const double kPi = 3.14159265358979323846;

// Independent cell count for the quarter-disk oracle: no Grid/Region code.
double disk_cell_count_measure(double h) {
  std::int64_t m = static_cast<std::int64_t>(std::llround(1.0 / h));
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < m; ++j) {
      double x = (static_cast<double>(i) + 0.5) * h - 0.5;
      double y = (static_cast<double>(j) + 0.5) * h - 0.5;
      if (x * x + y * y < 0.25) ++hits;
    }
  return static_cast<double>(hits) * h * h;
}

Region unit_square() { return Region::box(make_box({0, 0}, {1, 1}), 2); }

}  // namespace

TEST_CASE("measure tiles the unit box exactly") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 8, 2);
  CHECK(measure(unit_square(), g) == 1.0);
  CHECK(measure(Region::box(make_box({0, 0}, {0.5, 1}), 2), g) == 0.5);
}

TEST_CASE("measure of the centered disk approaches pi/4") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 64, 2);
  Region disk = Region::predicate(
      [](const Vec& x) {
        double dx = x[0] - 0.5, dy = x[1] - 0.5;
        return dx * dx + dy * dy < 0.25;
      },
      make_box({0, 0}, {1, 1}), 2);
  double m = measure(disk, g);
  double oracle = disk_cell_count_measure(1.0 / 256);
  CHECK(m == doctest::Approx(disk_cell_count_measure(1.0 / 64)).epsilon(1e-15));
  CHECK(std::abs(m - kPi / 4) <= 0.01);
  CHECK(std::abs(oracle - kPi / 4) <= 0.001);
}

TEST_CASE("measure is additive over disjoint boxes and monotone") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 16, 2);
  Box a = make_box({0, 0}, {0.5, 1});
  Box b = make_box({0.5, 0}, {1, 0.5});
  double ma = measure(Region::box(a, 2), g);
  double mb = measure(Region::box(b, 2), g);
  double mu = measure(Region::box_union({a, b}, 2), g);
  CHECK(mu == ma + mb);
  CHECK(ma <= measure(unit_square(), g));
}

TEST_CASE("region bounding box contains its boxes") {
  Region r = Region::box_union({make_box({0, 0}, {1, 1}), make_box({2, -1}, {3, 0.5})}, 2);
  const Box& bb = r.bounding_box();
  for (const Box& b : r.boxes()) CHECK(bb.contains_box(b, 2));
}

TEST_CASE("lp norm of constants is exact") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 8, 2);
  GridFunction f = make_function(g, 1, unit_square());
  for (std::int64_t i = 0; i < f.cells(); ++i) f.at(0, i) = 1.0;
  CHECK(weighted_lp_norm(f, nullptr, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(weighted_lp_norm(f, nullptr, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("lp norm of x matches the closed-form midpoint sum") {
  double h = 1.0 / 64;
  Grid g = make_grid(make_box({0, 0}, {1, 1}), h, 2);
  GridFunction f = make_function(g, 1, unit_square());
  for (std::int64_t i = 0; i < f.cells(); ++i) f.at(0, i) = g.center(i)[0];
  double got = weighted_lp_norm(f, nullptr, 2.0);
  // midpoint sum of x^2 over (0,1) is exactly 1/3 - h^2/12
  CHECK(got == doctest::Approx(std::sqrt(1.0 / 3 - h * h / 12)).epsilon(1e-13));
  CHECK(std::abs(got - 1.0 / std::sqrt(3.0)) <= 2 * h);
}

TEST_CASE("weights scale the norm and must be positive") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 8, 2);
  GridFunction f = make_function(g, 1, unit_square());
  GridFunction w = make_function(g, 1, unit_square());
  for (std::int64_t i = 0; i < f.cells(); ++i) {
    f.at(0, i) = 1.0 + g.center(i)[1];
    w.at(0, i) = 2.0;
  }
  CHECK(weighted_lp_norm(f, &w, 3.0) ==
        doctest::Approx(2.0 * weighted_lp_norm(f, nullptr, 3.0)).epsilon(1e-13));
  w.at(0, 17) = 0.0;
  CHECK_THROWS_WITH_AS(weighted_lp_norm(f, &w, 2.0),
                       doctest::Contains("invalid-weight"), Error);
}

TEST_CASE("divergence of a linear field is exact everywhere") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 16, 2);
  GridFunction u = make_function(g, 2, unit_square());
  for (std::int64_t i = 0; i < u.cells(); ++i) {
    Vec x = g.center(i);
    u.at(0, i) = x[0];
    u.at(1, i) = x[1];
  }
  GridFunction d = divergence_fd(u);
  for (std::int64_t i = 0; i < d.cells(); ++i)
    CHECK(d.at(0, i) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("divergence converges at second order inside the domain") {
  auto interior_error = [](double h) {
    Grid g = make_grid(make_box({0, 0}, {1, 1}), h, 2);
    GridFunction u = make_function(g, 2, unit_square());
    for (std::int64_t i = 0; i < u.cells(); ++i) {
      u.at(0, i) = std::sin(2 * kPi * g.center(i)[0]);
      u.at(1, i) = 0.0;
    }
    GridFunction d = divergence_fd(u);
    double worst = 0.0;
    for (std::int64_t i = 0; i < d.cells(); ++i) {
      IVec mi = g.unflatten(i);
      if (mi[0] == 0 || mi[0] == g.shape[0] - 1) continue;
      double want = 2 * kPi * std::cos(2 * kPi * g.center(i)[0]);
      worst = std::max(worst, std::abs(d.at(0, i) - want));
    }
    return worst;
  };
  double e1 = interior_error(1.0 / 32);
  double e2 = interior_error(1.0 / 64);
  CHECK(e2 < e1 / 3.2);  // ~4x for a second-order stencil
}

TEST_CASE("isolated cells get zero derivative") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 4, 2);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(g.cell_count()), 0);
  mask[5] = 1;
  GridFunction u = make_function(g, 2, mask);
  u.at(0, 5) = 3.0;
  u.at(1, 5) = -1.0;
  CHECK(divergence_fd(u).at(0, 5) == 0.0);
}

TEST_CASE("gradient of each coordinate is a unit row") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 8, 2);
  GridFunction u = make_function(g, 2, unit_square());
  for (std::int64_t i = 0; i < u.cells(); ++i) {
    u.at(0, i) = g.center(i)[0];
    u.at(1, i) = 2.0 * g.center(i)[1];
  }
  GridFunction J = gradient_fd(u);
  CHECK(J.components == 4);
  for (std::int64_t i = 0; i < J.cells(); ++i) {
    CHECK(J.at(0, i) == doctest::Approx(1.0));
    CHECK(J.at(1, i) == doctest::Approx(0.0));
    CHECK(J.at(2, i) == doctest::Approx(0.0));
    CHECK(J.at(3, i) == doctest::Approx(2.0));
  }
}

TEST_CASE("one dimensional grids work") {
  Grid g = make_grid(make_box({0}, {4}), 1.0 / 64, 1);
  CHECK(g.cell_count() == 256);
  CHECK(measure(Region::box(make_box({0}, {4}), 1), g) == doctest::Approx(4.0));
  CHECK(g.neighbor(0, 0, -1) == -1);
  CHECK(g.neighbor(0, 0, +1) == 1);
}

TEST_CASE("integral splits across disjoint masks") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 8, 2);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(-1, 1);
  GridFunction f = make_function(g, 1, unit_square());
  for (std::int64_t i = 0; i < f.cells(); ++i) f.at(0, i) = uni(rng);
  GridFunction left = f, right = f;
  for (std::int64_t i = 0; i < f.cells(); ++i) {
    bool l = g.center(i)[0] < 0.5;
    left.mask[static_cast<std::size_t>(i)] = l;
    right.mask[static_cast<std::size_t>(i)] = !l;
  }
  CHECK(integrate(f) == doctest::Approx(integrate(left) + integrate(right)).epsilon(1e-12));
  double p = 2.0;
  double whole = std::pow(weighted_lp_norm(f, nullptr, p), p);
  double parts = std::pow(weighted_lp_norm(left, nullptr, p), p) +
                 std::pow(weighted_lp_norm(right, nullptr, p), p);
  CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
}

TEST_CASE("csv roundtrip preserves mask and values") {
  Grid g = make_grid(make_box({0, 0}, {1, 1}), 1.0 / 8, 2);
  GridFunction f = make_function(g, 2, unit_square());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-1, 1);
  for (std::int64_t i = 0; i < f.cells(); ++i) {
    f.at(0, i) = uni(rng);
    f.at(1, i) = uni(rng);
  }
  f.mask[10] = 0;
  std::string path = "test_grid_roundtrip.csv";
  save_csv(f, path);
  GridFunction back = load_csv(path);
  REQUIRE(back.cells() == f.cells());
  CHECK(back.components == f.components);
  for (std::int64_t i = 0; i < f.cells(); ++i) {
    CHECK(back.mask[static_cast<std::size_t>(i)] == f.mask[static_cast<std::size_t>(i)]);
    if (f.active(i)) {
      CHECK(back.at(0, i) == f.at(0, i));
      CHECK(back.at(1, i) == f.at(1, i));
    }
  }
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());
}
