#pragma once

#include <array>
#include <cstdint>

#include "divtree/errors.hpp"
#include "divtree/grid.hpp"

namespace divtree {

// Hard ceiling on cells per local solve; the kernel sum is O(cells^2).
// Callers with bigger subdomains coarsen locally first.
inline constexpr std::int64_t kMaxLocalCells = std::int64_t{1} << 14;

// A region star-shaped with respect to a ball it contains. The radius ratio
// diameter/ball_radius drives the local constant, so builders record it.
struct StarRegion {
  Region shape;
  Vec ball_center{};
  double ball_radius = 0.0;
  double diameter = 0.0;  // of the region; 0 means derive from the bounding box
};

struct StarCheck {
  bool ball_in_region = false;
  bool star_ok = false;
  std::int64_t checked_segments = 0;
  std::int64_t failures = 0;
  double radius_ratio = 0.0;  // diameter over ball radius
};

// Samples segments from ball points to region cell centers and walks them at
// half-cell steps; every sample must stay inside the region.
StarCheck verify_star(const StarRegion& star, const Grid& g, int max_segments,
                      std::uint64_t seed);

struct LocalSolveOptions {
  int threads = 0;          // 0: DIVTREE_THREADS, else hardware
  double mean_tol = 1e-10;  // relative to ||f||_1
  bool enforce_mean = true;
  // Source cells within 3h of the target are split this many times per axis
  // before kernel evaluation; the midpoint rule alone is too crude next to
  // the |x-y|^(1-n) singularity. 1 disables the refinement.
  int near_subdivision = 3;
};

// Velocity field u with div u = f on the region's active cells, u = 0 outside.
//
//   u(x) = sum_y f(y) h^n (x-y)/|x-y|^n * integral_{|x-y|}^{exit} theta(y + r e) r^{n-1} dr
//
// where e = (x-y)/|x-y| and theta is a polynomial bump on the ball, normalized
// so its cell sum is one. The radial integral runs over the chord where the
// ray meets the ball, with fixed Gauss-Legendre quadrature (the integrand is a
// polynomial there, so the rule is exact and the operator is linear in f).
// The cell y = x contributes zero: the kernel's average over ray directions
// vanishes, and any bounded surrogate is O(h^n).
//
// f must be scalar, supported on its mask, zero-mean to mean_tol relative.
// Throws mean-violation, containment (ball cells outside the mask),
// unsupported (cell cap), invalid-argument.
GridFunction bogovskii_solve(const GridFunction& f, const StarRegion& star,
                             const LocalSolveOptions& opt = {});

// Convenience wrapper: star = the box with its inscribed ball (radius half the
// shortest side). f is restricted to the box's cells.
GridFunction solve_on_box(const GridFunction& f, const Box& box,
                          const LocalSolveOptions& opt = {});

// Invertible affine change of variables x = B xhat + b.
struct AffineMap {
  int dim = 0;
  std::array<double, kMaxDim * kMaxDim> matrix{};  // row-major dim x dim
  Vec offset{};
};

AffineMap identity_map(int dim);
AffineMap scaling_map(int dim, double s, const Vec& offset = Vec{});
Vec map_point(const AffineMap& m, const Vec& x);
double det(const AffineMap& m);
AffineMap inverse(const AffineMap& m);  // throws invalid-map if singular
AffineMap transpose(const AffineMap& m);

// Operator norm of the matrix part on (R^dim, |.|_p). Exact for p in {1, 2,
// inf} (column sums, largest singular value, row sums); other p by a dense
// directional scan with local refinement, so approximate from below.
double matrix_p_norm(const AffineMap& m, double p);

// u(x) = B vhat(F^{-1}(x)) with nearest-cell resampling; cells whose preimage
// falls outside vhat's support come back inactive.
GridFunction affine_transfer(const GridFunction& v_hat, const AffineMap& map,
                             const Grid& target);

}  // namespace divtree
