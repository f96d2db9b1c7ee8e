#pragma once

#include <functional>
#include <string>
#include <vector>

#include "divtree/grid.hpp"
#include "divtree/tree.hpp"

namespace divtree {

// Cusp profile phi on [0, a]: phi(0) = 0, phi > 0 on (0, a], |phi'| <= k1,
// and phi(t)/t <= k2 phi(r)/r for 0 < t < r <= a. The constants are declared
// by the caller and checked by sampling, never estimated.
struct CuspProfile {
  std::function<double(double)> phi;
  double a = 1.0;
  double k1 = 0.0;
  double k2 = 0.0;
  std::string name;
};

// x^gamma with gamma > 1; k1 = gamma a^(gamma-1), k2 = 1.
CuspProfile power_cusp(double gamma, double a = 1.0);
// exp(-1/x^2), continued by 0 at the origin.
CuspProfile exp_cusp(double a = 0.5);
// x^gamma (2 + sin x^(1-gamma)) with gamma > 1.
CuspProfile oscillating_cusp(double gamma, double a = 1.0);

struct ProfileCheck {
  double worst_slope = 0.0;  // largest sampled |difference quotient|
  double worst_ratio = 0.0;  // largest sampled (phi(t)/t) / (phi(r)/r)
  bool positive = false;
  bool lipschitz_ok = false;
  bool quasi_monotone_ok = false;
  bool pass = false;
};
ProfileCheck verify_profile(const CuspProfile& p, int samples = 1024);

// x_0 = a; x_{i+1} is the largest solution of phi(x) = x_i - x in (0, x_i),
// bracketed by a downward scan in steps x_i/1024 and pinned by 60 bisections.
// Returns x_0..x_depth. Throws profile-violation when the declared constants
// fail their sampled checks or no bracket is found.
std::vector<double> cusp_sequence(const CuspProfile& p, int depth);

// The whole domain {0 < x < a, |y| < phi(x)}; y has dim-1 components.
Region cusp_domain(const CuspProfile& p, int dim);

// Path tree over the slabs Omega_i = {x_{i+2} < x < x_i, |y| < phi(x)} for
// i = 0..depth, root 0, overlap 2, connectors B_i = {x_{i+1} < x < x_i}. The
// deepest node absorbs the truncated tail mass beyond x_{depth+2}.
struct CuspCover {
  std::vector<double> xs;  // x_0..x_{depth+2}
  int depth = 0;
  DomainTree tree;
};
CuspCover cusp_cover(const CuspProfile& p, int depth, const Grid& grid);

// varpi = phi(x)/x sampled on the mask, and varpi^(-kappa).
struct CuspWeights {
  GridFunction omega_bar;
  GridFunction hat_w;
};
CuspWeights varpi_weight(const CuspProfile& p, const Grid& grid,
                         const std::vector<std::uint8_t>& mask, double kappa);

// One slab U_j = {r_{j-1} < x < r_{j+1}, |y| < phi(x)} of the star-shaped
// splitting of node i, with its candidate ball.
struct StarSlab {
  double r_lo = 0.0;    // r_{j-1}
  double r_hi = 0.0;    // r_{j+1}
  Vec center{};         // (r_j, 0, ...)
  double radius = 0.0;  // (r_{j+1} - r_{j-1}) / 2
  Box bounds;           // bounding box of the slab (y extent sampled)
  Region slab;
};

// m+1 equidistant points over [x_{i+2}, x_i]; requires m > 16 k1^2 k2^2 with
// the constants clamped to at least 1, the count that is sufficient for any
// admissible profile. Each slab is checked by sampling: segments from ball
// points to boundary-grazing slab points must stay under the graph (33
// samples per free parameter, worst-case in the y extremes). Throws
// profile-violation when a sampled segment escapes. With require_paper_m
// false any m >= 2 is accepted and the sampled test alone decides; callers
// use that to pick the coarsest split a concrete profile supports.
std::vector<StarSlab> star_split(const CuspProfile& p, const std::vector<double>& xs,
                                 int i, int m, bool require_paper_m = true);

// (R/rho)^(dim+1): bounding-box diagonal over ball radius.
double galdi_constant_bound(const Box& bounds, double ball_radius, int dim);

}  // namespace divtree
