#include "divtree/cusp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "divtree/errors.hpp"

namespace divtree {

namespace {

double clamp_one(double v) { return std::max(v, 1.0); }

// Largest sampled y extent of {|y| < phi(x)} over [lo, hi].
double sampled_sup(const CuspProfile& p, double lo, double hi) {
  double m = 0.0;
  const int n = 128;
  for (int k = 0; k <= n; ++k) {
    const double x = lo + (hi - lo) * k / n;
    m = std::max(m, p.phi(x));
  }
  return m;
}

}  // namespace

CuspProfile power_cusp(double gamma, double a) {
  if (!(gamma > 1.0) || !(a > 0.0))
    fail(errc::invalid_argument, "power cusp needs gamma > 1 and a > 0");
  CuspProfile p;
  p.phi = [gamma](double x) { return std::pow(x, gamma); };
  p.a = a;
  p.k1 = gamma * std::pow(a, gamma - 1.0);
  p.k2 = 1.0;  // phi(x)/x = x^(gamma-1) is increasing
  char buf[64];
  std::snprintf(buf, sizeof buf, "power(%g)", gamma);
  p.name = buf;
  return p;
}

CuspProfile exp_cusp(double a) {
  if (!(a > 0.0)) fail(errc::invalid_argument, "exp cusp needs a > 0");
  CuspProfile p;
  p.phi = [](double x) { return x > 0.0 ? std::exp(-1.0 / (x * x)) : 0.0; };
  p.a = a;
  // phi'(x) = 2 x^-3 exp(-1/x^2) peaks at x = sqrt(2/3).
  const double xc = std::sqrt(2.0 / 3.0);
  p.k1 = a >= xc ? 2.0 * std::pow(1.5, 1.5) * std::exp(-1.5)
                 : 2.0 * std::pow(a, -3.0) * std::exp(-1.0 / (a * a));
  // phi(x)/x increases up to x = sqrt(2) and decreases after.
  const double rt2 = std::sqrt(2.0);
  p.k2 = a <= rt2 ? 1.0
                  : (std::exp(-0.5) / rt2) * a * std::exp(1.0 / (a * a));
  p.name = "exp-cusp";
  return p;
}

CuspProfile oscillating_cusp(double gamma, double a) {
  if (!(gamma > 1.0) || !(a > 0.0))
    fail(errc::invalid_argument, "oscillating cusp needs gamma > 1 and a > 0");
  CuspProfile p;
  p.phi = [gamma](double x) {
    if (x <= 0.0) return 0.0;
    return std::pow(x, gamma) * (2.0 + std::sin(std::pow(x, 1.0 - gamma)));
  };
  p.a = a;
  // |phi'| <= 3 gamma x^(gamma-1) + (gamma-1)|cos(x^(1-gamma))|
  p.k1 = 3.0 * gamma * std::pow(a, gamma - 1.0) + (gamma - 1.0);
  // ratio of (2+sin) factors is at most 3; the power factor is increasing
  p.k2 = 3.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "oscillating(%g)", gamma);
  p.name = buf;
  return p;
}

ProfileCheck verify_profile(const CuspProfile& p, int samples) {
  if (!p.phi) fail(errc::invalid_argument, "profile has no function");
  if (samples < 2) fail(errc::invalid_argument, "need at least 2 samples");
  if (!(p.a > 0.0) || !(p.k1 > 0.0) || !(p.k2 > 0.0))
    fail(errc::invalid_argument, "profile constants must be positive");

  ProfileCheck r;
  const int n = samples;
  std::vector<double> x(n + 1), v(n + 1);
  for (int k = 0; k <= n; ++k) {
    x[k] = p.a * k / n;
    v[k] = p.phi(x[k]);
  }

  // phi vanishes at 0 and is positive on (0, a]. Values that underflow to
  // zero right next to the origin are tolerated (exp(-1/x^2) is below the
  // smallest double for x < 0.04); a zero past the first positive sample is
  // a genuine violation.
  r.positive = v[0] == 0.0 && v[n] > 0.0;
  bool seen_positive = false;
  for (int k = 1; k <= n; ++k) {
    if (v[k] < 0.0) r.positive = false;
    if (v[k] > 0.0)
      seen_positive = true;
    else if (seen_positive)
      r.positive = false;
  }

  // Difference quotients between consecutive samples, and from the origin.
  for (int k = 0; k < n; ++k) {
    const double q = std::abs(v[k + 1] - v[k]) / (x[k + 1] - x[k]);
    r.worst_slope = std::max(r.worst_slope, q);
  }
  for (int k = 1; k <= n; ++k)
    r.worst_slope = std::max(r.worst_slope, v[k] / x[k]);
  r.lipschitz_ok = r.worst_slope <= p.k1 * (1.0 + 1e-12);

  // Quasi-monotonicity of phi(x)/x over all sampled pairs.
  std::vector<double> q(n + 1, 0.0);
  for (int k = 1; k <= n; ++k) q[k] = v[k] / x[k];
  double lead = 0.0;  // max of q over indices <= current
  for (int k = 1; k <= n; ++k) {
    if (q[k] > 0.0) r.worst_ratio = std::max(r.worst_ratio, lead / q[k]);
    lead = std::max(lead, q[k]);
  }
  r.quasi_monotone_ok = r.worst_ratio <= p.k2 * (1.0 + 1e-12);

  r.pass = r.positive && r.lipschitz_ok && r.quasi_monotone_ok;
  return r;
}

std::vector<double> cusp_sequence(const CuspProfile& p, int depth) {
  if (depth < 0) fail(errc::invalid_argument, "depth must be nonnegative");
  const ProfileCheck chk = verify_profile(p);
  if (!chk.pass) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "declared constants fail the sampled check on '%s': "
                  "slope %.6g vs k1 %.6g, ratio %.6g vs k2 %.6g%s",
                  p.name.c_str(), chk.worst_slope, p.k1, chk.worst_ratio, p.k2,
                  chk.positive ? "" : ", profile not positive");
    fail(errc::profile_violation, buf);
  }

  std::vector<double> xs;
  xs.reserve(depth + 1);
  xs.push_back(p.a);
  for (int i = 0; i < depth; ++i) {
    const double xi = xs.back();
    auto g = [&](double x) { return p.phi(x) + x - xi; };
    // Scan down from x_i; g(x_i) = phi(x_i) > 0, and g < 0 near 0.
    const double step = xi / 1024.0;
    double hi = xi, lo = 0.0;
    bool bracketed = false;
    for (int k = 1; k <= 1023; ++k) {
      const double x = xi - k * step;
      if (g(x) <= 0.0) {
        lo = x;
        hi = xi - (k - 1) * step;
        bracketed = true;
        break;
      }
    }
    if (!bracketed) {
      char buf[128];
      std::snprintf(buf, sizeof buf,
                    "no root of phi(x) + x = %.17g bracketed below it on '%s'",
                    xi, p.name.c_str());
      fail(errc::profile_violation, buf);
    }
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (g(mid) <= 0.0)
        lo = mid;
      else
        hi = mid;
    }
    const double next = 0.5 * (lo + hi);
    if (!(next < xi * (1.0 - 1e-13))) {
      char buf[128];
      std::snprintf(buf, sizeof buf,
                    "sequence stalled at %.17g on '%s'; the profile is "
                    "numerically zero at that scale",
                    xi, p.name.c_str());
      fail(errc::profile_violation, buf);
    }
    xs.push_back(next);
  }
  return xs;
}

Region cusp_domain(const CuspProfile& p, int dim) {
  if (dim < 2 || dim > kMaxDim)
    fail(errc::invalid_argument, "cusp domain needs 2 <= dim <= 4");
  if (!(p.k1 > 0.0)) fail(errc::invalid_argument, "profile needs k1 > 0");
  const double yb = p.k1 * p.a;  // phi(x) <= k1 x <= k1 a
  Box bb;
  bb.lo[0] = 0.0;
  bb.hi[0] = p.a;
  for (int d = 1; d < dim; ++d) {
    bb.lo[d] = -yb;
    bb.hi[d] = yb;
  }
  auto phi = p.phi;
  const double a = p.a;
  auto fn = [phi, a, dim](const Vec& q) {
    if (!(q[0] > 0.0 && q[0] < a)) return false;
    double y2 = 0.0;
    for (int d = 1; d < dim; ++d) y2 += q[d] * q[d];
    const double f = phi(q[0]);
    return y2 < f * f;
  };
  return Region::predicate(fn, bb, dim);
}

namespace {

// Slab {xlo < x < xhi, |y| < phi(x)} as a predicate region.
Region slab_region(const CuspProfile& p, double xlo, double xhi, int dim) {
  const double yb = sampled_sup(p, xlo, xhi) * (1.0 + 1e-9);
  Box bb;
  bb.lo[0] = xlo;
  bb.hi[0] = xhi;
  for (int d = 1; d < dim; ++d) {
    bb.lo[d] = -yb;
    bb.hi[d] = yb;
  }
  auto phi = p.phi;
  auto fn = [phi, xlo, xhi, dim](const Vec& q) {
    if (!(q[0] > xlo && q[0] < xhi)) return false;
    double y2 = 0.0;
    for (int d = 1; d < dim; ++d) y2 += q[d] * q[d];
    const double f = phi(q[0]);
    return y2 < f * f;
  };
  return Region::predicate(fn, bb, dim);
}

}  // namespace

CuspCover cusp_cover(const CuspProfile& p, int depth, const Grid& grid) {
  if (depth < 0) fail(errc::invalid_argument, "depth must be nonnegative");
  const int dim = grid.dim;
  if (dim < 2) fail(errc::invalid_argument, "cusp cover needs dim >= 2");

  CuspCover out;
  out.depth = depth;
  out.xs = cusp_sequence(p, depth + 2);

  std::vector<TreeNode> nodes(depth + 1);
  for (int i = 0; i <= depth; ++i) {
    nodes[i].parent = i - 1;
    nodes[i].omega = slab_region(p, out.xs[i + 2], out.xs[i], dim);
    if (i > 0) nodes[i].connector = slab_region(p, out.xs[i + 1], out.xs[i], dim);
  }
  out.tree = make_tree(grid, std::move(nodes), /*overlap_bound=*/2,
                       /*tail_node=*/depth);
  return out;
}

CuspWeights varpi_weight(const CuspProfile& p, const Grid& grid,
                         const std::vector<std::uint8_t>& mask, double kappa) {
  if ((int)mask.size() != grid.cell_count())
    fail(errc::invalid_argument, "mask size does not match the grid");
  CuspWeights w;
  w.omega_bar = make_function(grid, 1, mask);
  w.hat_w = make_function(grid, 1, mask);
  for (int c = 0; c < grid.cell_count(); ++c) {
    if (!mask[c]) continue;
    const Vec q = grid.center(c);
    if (!(q[0] > 0.0))
      fail(errc::invalid_weight, "masked cell with x <= 0; varpi undefined");
    const double varpi = p.phi(q[0]) / q[0];
    if (!(varpi > 0.0))
      fail(errc::invalid_weight, "varpi vanishes on a masked cell");
    w.omega_bar.at(0, c) = varpi;
    w.hat_w.at(0, c) = std::pow(varpi, -kappa);
  }
  return w;
}

std::vector<StarSlab> star_split(const CuspProfile& p,
                                 const std::vector<double>& xs, int i, int m,
                                 bool require_paper_m) {
  if (i < 0 || i + 2 >= (int)xs.size())
    fail(errc::invalid_argument, "node index outside the sequence");
  if (m < 2) fail(errc::invalid_argument, "need m >= 2 for at least one slab");
  const double need = 16.0 * clamp_one(p.k1) * clamp_one(p.k1) *
                      clamp_one(p.k2) * clamp_one(p.k2);
  if (require_paper_m && !((double)m > need)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "m = %d must exceed 16 k1^2 k2^2 = %g", m,
                  need);
    fail(errc::invalid_argument, buf);
  }

  const double x_lo = xs[i + 2], x_hi = xs[i];
  const double delta = (x_hi - x_lo) / m;
  const int dim = 2;  // splitting happens in the planar section

  std::vector<StarSlab> slabs;
  slabs.reserve(m - 1);
  for (int j = 1; j <= m - 1; ++j) {
    StarSlab s;
    s.r_lo = x_lo + delta * (j - 1);
    s.r_hi = x_lo + delta * (j + 1);
    s.radius = 0.5 * (s.r_hi - s.r_lo);
    s.center = Vec{};
    s.center[0] = x_lo + delta * j;

    const double yb = sampled_sup(p, s.r_lo, s.r_hi) * (1.0 + 1e-9);
    s.bounds.lo[0] = s.r_lo;
    s.bounds.hi[0] = s.r_hi;
    s.bounds.lo[1] = -yb;
    s.bounds.hi[1] = yb;
    s.slab = slab_region(p, s.r_lo, s.r_hi, dim);

    // Sampled star-shape test. A segment from a ball point (bx, by) to a
    // slab point (sx, sy) stays inside iff its height stays under the graph;
    // the worst case has by and sy at their positive extremes, so the scan
    // is over bx, sx and the segment parameter only.
    const int ns = 33;
    bool ok = true;
    double worst = -1.0;
    for (int kb = 0; kb < ns && ok; ++kb) {
      const double u = -1.0 + 2.0 * (kb + 0.5) / ns;
      const double bx = s.center[0] + s.radius * u;
      const double by =
          s.radius * std::sqrt(std::max(0.0, 1.0 - u * u)) * (1.0 - 1e-9);
      if (!(by < p.phi(bx))) {  // ball must sit inside the slab
        ok = false;
        worst = by - p.phi(bx);
        break;
      }
      for (int kx = 0; kx < ns && ok; ++kx) {
        const double sx = s.r_lo + (s.r_hi - s.r_lo) * (kx + 0.5) / ns;
        const double sy = p.phi(sx) * (1.0 - 1e-9);
        for (int kt = 0; kt < ns; ++kt) {
          const double t = (kt + 0.5) / ns;
          const double mx = t * bx + (1.0 - t) * sx;
          const double my = t * by + (1.0 - t) * sy;
          if (!(my < p.phi(mx))) {
            ok = false;
            worst = my - p.phi(mx);
            break;
          }
        }
      }
    }
    if (!ok) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "slab %d of node %d is not star shaped with respect to "
                    "its ball (excess %.3g); the profile constants are off",
                    j, i, worst);
      fail(errc::profile_violation, buf);
    }
    slabs.push_back(std::move(s));
  }
  return slabs;
}

double galdi_constant_bound(const Box& bounds, double ball_radius, int dim) {
  if (!(ball_radius > 0.0))
    fail(errc::invalid_argument, "ball radius must be positive");
  const double diag = bounds.diameter(dim);
  if (!(diag > 0.0)) fail(errc::invalid_argument, "degenerate bounding box");
  if (ball_radius > diag)
    fail(errc::containment, "ball radius exceeds the bounding box diagonal");
  return std::pow(diag / ball_radius, dim + 1);
}

}  // namespace divtree
