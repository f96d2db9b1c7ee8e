#include "doctest.h"

#include "divtree/cusp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "divtree/errors.hpp"
#include "divtree/tree.hpp"

using namespace divtree;

namespace {

// For phi(x) = x^2 the recurrence phi(x) = x_i - x is a quadratic whose
// positive root is explicit. Completely independent of the scan-and-bisect
// path in cusp_sequence.
double square_cusp_next(double xi) {
  return 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * xi));
}

// Plain bisection oracle on a profile where g(x) = phi(x) + x - x_i is
// strictly increasing, so the unique root is the largest one.
double increasing_profile_root(const CuspProfile& p, double xi) {
  double lo = 0.0, hi = xi;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (p.phi(mid) + mid - xi <= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double phi_sup(const CuspProfile& p, double lo, double hi, int n = 256) {
  double m = 0.0;
  for (int k = 0; k <= n; ++k) m = std::max(m, p.phi(lo + (hi - lo) * k / n));
  return m;
}

double phi_inf(const CuspProfile& p, double lo, double hi, int n = 256) {
  double m = p.phi(lo);
  for (int k = 1; k <= n; ++k) m = std::min(m, p.phi(lo + (hi - lo) * k / n));
  return m;
}

}  // namespace

TEST_CASE("square cusp sequence matches the closed form") {
  const CuspProfile p = power_cusp(2.0, 1.0);
  CHECK(p.k1 == doctest::Approx(2.0));
  CHECK(p.k2 == doctest::Approx(1.0));

  const auto xs = cusp_sequence(p, 10);
  REQUIRE(xs.size() == 11);
  CHECK(xs[0] == doctest::Approx(1.0));

  // Golden ratio at the first step, then the explicit quadratic recurrence.
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  CHECK(std::abs(xs[1] - golden) < 1e-12);
  double ref = 1.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    ref = square_cusp_next(ref);
    CHECK(std::abs(xs[i] - ref) < 1e-12);
    CHECK(std::abs(xs[i] - increasing_profile_root(p, xs[i - 1])) < 1e-12);
  }

  // x_2 in particular: (-1 + sqrt(1 + 4 x_1)) / 2 with x_1 the golden ratio.
  CHECK(std::abs(xs[2] - 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * golden))) < 1e-12);

  // Defining identity, strict decrease, positivity, decay.
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    CHECK(std::abs(p.phi(xs[i + 1]) + xs[i + 1] - xs[i]) < 1e-10);
    CHECK(xs[i + 1] < xs[i]);
    CHECK(xs[i + 1] > 0.0);
  }
  const auto deep = cusp_sequence(p, 40);
  CHECK(deep.back() < 0.06);
}

TEST_CASE("sequence keeps the scan-resolution largest-root property") {
  // For the oscillating profile g may dip more than once; the returned root
  // must still be the largest at the scan density the builder contracts.
  const CuspProfile p = oscillating_cusp(1.5, 1.0);
  const auto xs = cusp_sequence(p, 6);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    CHECK(std::abs(p.phi(xs[i + 1]) + xs[i + 1] - xs[i]) < 1e-10);
    CHECK(xs[i + 1] < xs[i]);
    const double step = xs[i] / 1024.0;
    for (double x = xs[i] - step; x > xs[i + 1] + step; x -= step)
      CHECK(p.phi(x) + x - xs[i] > 0.0);
  }
}

TEST_CASE("interval bounds from the declared constants hold on samples") {
  for (const CuspProfile& p :
       {power_cusp(2.0, 1.0), exp_cusp(0.5), oscillating_cusp(1.5, 1.0)}) {
    CAPTURE(p.name);
    const auto xs = cusp_sequence(p, 8);
    const double tol = 1.0 + 1e-9;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      // x and phi(x) are pinned to their values at x_{i+1} on [x_{i+1}, x_i].
      CHECK(xs[i] <= (p.k1 + 1.0) * xs[i + 1] * tol);
      const double lo = phi_inf(p, xs[i + 1], xs[i]);
      const double hi = phi_sup(p, xs[i + 1], xs[i]);
      CHECK(lo * tol >= p.phi(xs[i + 1]) / p.k2);
      CHECK(hi <= (p.k1 + 1.0) * p.phi(xs[i + 1]) * tol);
    }
    // Comparability of varpi = phi(x)/x across one slab [x_{i+2}, x_i]:
    // sup varpi <= k2^2 (k1+1)^2 inf varpi.
    const double cmp = p.k2 * p.k2 * (p.k1 + 1.0) * (p.k1 + 1.0);
    for (std::size_t i = 0; i + 2 < xs.size(); ++i) {
      double lo = 1e300, hi = 0.0;
      for (int k = 0; k <= 256; ++k) {
        const double x = xs[i + 2] + (xs[i] - xs[i + 2]) * k / 256;
        lo = std::min(lo, p.phi(x) / x);
        hi = std::max(hi, p.phi(x) / x);
      }
      CHECK(hi <= cmp * lo * tol);
    }
  }
}

TEST_CASE("profile checks accept the builtins and reject bad constants") {
  for (const CuspProfile& p :
       {power_cusp(2.0, 1.0), power_cusp(1.5, 2.0), exp_cusp(0.5), exp_cusp(2.0),
        oscillating_cusp(1.5, 1.0), oscillating_cusp(3.0, 0.7)}) {
    CAPTURE(p.name);
    const ProfileCheck r = verify_profile(p);
    CHECK(r.pass);
    CHECK(r.worst_slope <= p.k1 * (1.0 + 1e-12));
    CHECK(r.worst_ratio <= p.k2 * (1.0 + 1e-12));
  }

  // The slope check is sharp for the square cusp: quotients near x = 1
  // approach the declared k1 = 2.
  CHECK(verify_profile(power_cusp(2.0, 1.0)).worst_slope > 1.9);

  CuspProfile bad_k1 = power_cusp(2.0, 1.0);
  bad_k1.k1 = 1.5;
  CHECK_FALSE(verify_profile(bad_k1).lipschitz_ok);
  CHECK_THROWS_AS(cusp_sequence(bad_k1, 3), Error);
  try {
    cusp_sequence(bad_k1, 3);
  } catch (const Error& e) {
    CHECK(e.code() == errc::profile_violation);
  }

  CuspProfile bad_k2 = oscillating_cusp(1.5, 1.0);
  bad_k2.k2 = 1.1;
  CHECK_FALSE(verify_profile(bad_k2).quasi_monotone_ok);
  try {
    cusp_sequence(bad_k2, 3);
    FAIL("expected a profile violation");
  } catch (const Error& e) {
    CHECK(e.code() == errc::profile_violation);
  }
}

TEST_CASE("cusp cover builds a path tree with overlap two") {
  const CuspProfile p = power_cusp(2.0, 1.0);
  const Grid grid = make_grid(make_box({0.0, -1.0}, {1.0, 1.0}), 1.0 / 64, 2);
  const CuspCover cover = cusp_cover(p, 4, grid);

  REQUIRE(cover.tree.size() == 5);
  REQUIRE(cover.xs.size() == 7);
  CHECK(cover.tree.root == 0);
  CHECK(cover.tree.tail_node == 4);
  for (int i = 1; i <= 4; ++i) CHECK(cover.tree.nodes[i].parent == i - 1);

  const CoverReport rep = validate_tree(cover.tree);
  CHECK(rep.ok());
  CHECK(rep.max_cover <= 2);
  CHECK(rep.min_cover >= 1);

  // Slabs two apart share no cells; neighbors do.
  for (int i = 0; i + 1 < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) {
      std::vector<std::int64_t> common;
      std::set_intersection(cover.tree.omega_cells[i].begin(),
                            cover.tree.omega_cells[i].end(),
                            cover.tree.omega_cells[j].begin(),
                            cover.tree.omega_cells[j].end(),
                            std::back_inserter(common));
      if (j == i + 1)
        CHECK(!common.empty());
      else
        CHECK(common.empty());
    }
  }

  // W shrinks strictly along the path.
  for (int i = 0; i + 1 < 5; ++i)
    CHECK(cover.tree.w_measure[i] > cover.tree.w_measure[i + 1]);

  // Decompose a field living on the whole cusp: the trimmed tail mass lands
  // in the deepest piece, everything else keeps zero mean.
  const Region domain = cusp_domain(p, 2);
  const auto domain_mask = mask_from_region(grid, domain);
  const GridFunction f = random_field(grid, domain_mask, 77, true);
  const Decomposition dec = decompose(cover.tree, f);
  CHECK(dec.off_mask_cells > 0);
  CHECK(std::abs(dec.off_mask_mass) > 0.0);

  const GridFunction sum = decomposition_sum(cover.tree, dec);
  double l1 = 0.0;
  for (std::int64_t c = 0; c < grid.cell_count(); ++c)
    if (domain_mask[c]) l1 += std::abs(f.at(0, c)) * grid.cell_volume();
  for (std::int64_t c = 0; c < grid.cell_count(); ++c)
    if (cover.tree.mask[c])
      CHECK(std::abs(sum.at(0, c) - f.at(0, c)) <= 1e-12 * std::max(1.0, l1));

  for (int t = 0; t < 5; ++t) {
    const double want = t == 4 ? -dec.off_mask_mass : 0.0;
    CHECK(std::abs(dec.pieces[t].integral - want) <= 1e-12 * std::max(1.0, l1));
  }
}

TEST_CASE("varpi weight samples phi over x") {
  const CuspProfile p = power_cusp(2.0, 1.0);
  const Grid grid = make_grid(make_box({0.0, -1.0}, {1.0, 1.0}), 1.0 / 32, 2);
  const auto mask = mask_from_region(grid, cusp_domain(p, 2));
  REQUIRE(mask_count(mask) > 0);

  const CuspWeights w0 = varpi_weight(p, grid, mask, 0.0);
  const CuspWeights w = varpi_weight(p, grid, mask, 0.5);
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    if (!mask[c]) continue;
    const double x = grid.center(c)[0];
    CHECK(w.omega_bar.at(0, c) == doctest::Approx(x).epsilon(1e-14));
    CHECK(w.omega_bar.at(0, c) <= p.k1 * (1.0 + 1e-12));
    CHECK(w0.hat_w.at(0, c) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w.hat_w.at(0, c) ==
          doctest::Approx(std::pow(x, -0.5)).epsilon(1e-13));
  }

  std::vector<std::uint8_t> short_mask(grid.cell_count() - 1, 1);
  CHECK_THROWS_AS(varpi_weight(p, grid, short_mask, 0.0), Error);
}

TEST_CASE("star split passes its sampled test and keeps stable ratios") {
  const CuspProfile p = power_cusp(2.0, 1.0);
  const auto xs = cusp_sequence(p, 10);
  const int m = 65;  // 16 k1^2 k2^2 = 64 for this profile

  std::vector<double> worst_ratio(9, 0.0);
  for (int i = 0; i <= 8; ++i) {
    const auto slabs = star_split(p, xs, i, m);
    REQUIRE((int)slabs.size() == m - 1);

    const double width = xs[i] - xs[i + 2];
    const double delta = width / m;
    const double phi1 = p.phi(xs[i + 1]);

    // Slab width bounds tied to phi at the middle sequence point.
    CHECK(phi1 <= width * (1.0 + 1e-12));
    CHECK(width <= 2.0 * p.k2 * phi1 * (1.0 + 1e-12));
    CHECK(delta * (1.0 + 1e-12) >= phi1 / m);
    CHECK(delta <= phi1 / (8.0 * p.k1 * p.k1 * p.k2) * (1.0 + 1e-12));

    // phi stays within the two-sided band over the whole node interval.
    const double band = 2.0 * p.k1 * p.k2;
    CHECK(phi_inf(p, xs[i + 2], xs[i]) * (1.0 + 1e-12) >= phi1 / band);
    CHECK(phi_sup(p, xs[i + 2], xs[i]) <= band * phi1 * (1.0 + 1e-12));

    for (int j = 0; j < (int)slabs.size(); ++j) {
      const StarSlab& s = slabs[j];
      CHECK(s.radius == doctest::Approx(delta).epsilon(1e-12));
      CHECK(s.center[0] == doctest::Approx(xs[i + 2] + delta * (j + 1)).epsilon(1e-12));
      CHECK(s.center[1] == 0.0);
      CHECK(s.r_hi - s.r_lo == doctest::Approx(2.0 * delta).epsilon(1e-12));
      // Ball fits under the graph with room to spare.
      CHECK(s.radius < phi_inf(p, s.r_lo, s.r_hi));
      worst_ratio[i] = std::max(
          worst_ratio[i], galdi_constant_bound(s.bounds, s.radius, 2));
    }
  }

  // The per-node worst (R/rho)^(n+1) peaks at the widest node and must not
  // grow when the tree is truncated deeper.
  const double at4 = *std::max_element(worst_ratio.begin(), worst_ratio.begin() + 5);
  const double at8 = *std::max_element(worst_ratio.begin(), worst_ratio.end());
  CHECK(std::abs(at8 - at4) <= 0.05 * at4);

  // A profile whose constants are clamped up to 1 still splits cleanly.
  const CuspProfile e = exp_cusp(0.5);
  const auto exs = cusp_sequence(e, 3);
  CHECK((int)star_split(e, exs, 0, 17).size() == 16);
}

TEST_CASE("galdi bound arithmetic") {
  const Box b = make_box({0.0, 0.0}, {1.0, 1.0});
  const double r = std::sqrt(2.0) / 0.5;
  CHECK(galdi_constant_bound(b, 0.5, 2) == doctest::Approx(r * r * r).epsilon(1e-12));

  // Scale invariance.
  const Box big = make_box({0.0, 0.0}, {7.0, 7.0});
  CHECK(galdi_constant_bound(big, 3.5, 2) ==
        doctest::Approx(galdi_constant_bound(b, 0.5, 2)).epsilon(1e-12));

  CHECK_THROWS_AS(galdi_constant_bound(b, 0.0, 2), Error);
  try {
    galdi_constant_bound(b, 5.0, 2);
    FAIL("expected a containment error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::containment);
  }
}

TEST_CASE("cusp rejections point at the fix") {
  const CuspProfile p = power_cusp(2.0, 1.0);
  CHECK_THROWS_AS(power_cusp(1.0, 1.0), Error);
  CHECK_THROWS_AS(cusp_domain(p, 1), Error);
  CHECK_THROWS_AS(verify_profile(p, 1), Error);

  const auto xs = cusp_sequence(p, 4);
  CHECK_THROWS_AS(star_split(p, xs, 0, 64), Error);   // m not above 16 k1^2 k2^2
  CHECK_THROWS_AS(star_split(p, xs, 3, 65), Error);   // i+2 past the sequence end

  // Deep slabs are thinner than the cells of a coarse grid.
  const Grid coarse = make_grid(make_box({0.0, -1.0}, {1.0, 1.0}), 1.0 / 16, 2);
  try {
    cusp_cover(p, 8, coarse);
    FAIL("expected a resolution error");
  } catch (const Error& e) {
    const bool resolution = e.code() == errc::empty_domain ||
                            e.code() == errc::degenerate_connector;
    CHECK(resolution);
    CHECK(std::string(e.what()).find("refine") != std::string::npos);
  }
}
