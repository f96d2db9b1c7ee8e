#include "divtree/holder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "divtree/errors.hpp"

namespace divtree {

namespace {

// Lattice over the horizontal box [lo, hi]^(dim-1), k points per axis,
// endpoints included. Calls fn with a Vec whose first dim-1 entries are set.
template <typename F>
void horizontal_lattice(double lo, double hi, int k, int haxes, F&& fn) {
  std::vector<int> odo(haxes, 0);
  Vec x{};
  for (;;) {
    for (int d = 0; d < haxes; ++d)
      x[d] = k == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * odo[d] / (k - 1);
    fn(x);
    int d = 0;
    while (d < haxes && ++odo[d] == k) odo[d++] = 0;
    if (d == haxes) break;
  }
}

// The same walk with per-axis bounds.
template <typename F>
void face_lattice(const Vec& lo, const Vec& hi, int k, int haxes, F&& fn) {
  std::vector<int> odo(haxes, 0);
  Vec x{};
  for (;;) {
    for (int d = 0; d < haxes; ++d)
      x[d] = k == 1 ? 0.5 * (lo[d] + hi[d])
                    : lo[d] + (hi[d] - lo[d]) * odo[d] / (k - 1);
    fn(x);
    int d = 0;
    while (d < haxes && ++odo[d] == k) odo[d++] = 0;
    if (d == haxes) break;
  }
}

// Does the tripled upward shift of q fit under the graph? The tripled cube
// shares q's horizontal center with half-width 3 side/2 and reaches up to
// y1 + 3 side; it fits iff its footprint stays inside (-3l/2, 3l/2)^(n-1)
// and phi clears its top plane at every face sample.
bool triple_fits(const HolderProfile& p, const PiledCube& q, int face_samples) {
  const int haxes = p.dim - 1;
  const double slack = 1e-12 * p.l;
  Vec flo{}, fhi{};
  for (int d = 0; d < haxes; ++d) {
    const double c = 0.5 * (q.box.lo[d] + q.box.hi[d]);
    flo[d] = c - 1.5 * q.side;
    fhi[d] = c + 1.5 * q.side;
    if (flo[d] < -1.5 * p.l - slack || fhi[d] > 1.5 * p.l + slack) return false;
  }
  const double top = q.box.lo[p.dim - 1] + 3.0 * q.side;
  bool fits = true;
  face_lattice(flo, fhi, face_samples, haxes, [&](const Vec& x) {
    if (!(p.phi(x) > top)) fits = false;
  });
  return fits;
}

std::vector<Vec> graph_cloud(const HolderProfile& p, double step) {
  const int haxes = p.dim - 1;
  const double half = 2.5 * p.l;
  std::vector<Vec> pts;
  if (haxes == 1) {
    // Subdivide until the declared modulus certifies that every curve point
    // between two neighbors lies within step of one of them. A uniform
    // lattice cannot do this: near a vertex of an alpha < 1 graph the rise
    // over one x interval is K (dx)^alpha, far larger than dx.
    auto at = [&](double x) {
      Vec q{};
      q[0] = x;
      q[1] = p.phi(Vec{x});
      return q;
    };
    struct Seg {
      double a, b;
      int depth;
    };
    pts.push_back(at(-half));
    std::vector<Seg> work{{-half, half, 0}};
    while (!work.empty()) {
      const Seg s = work.back();
      work.pop_back();
      const double hw = 0.5 * (s.b - s.a);
      if (s.depth >= 48 || hw + p.k_phi * std::pow(hw, p.alpha) <= step) {
        pts.push_back(at(s.b));
        continue;
      }
      const double m = s.a + hw;
      work.push_back({m, s.b, s.depth + 1});
      work.push_back({s.a, m, s.depth + 1});
    }
    return pts;
  }
  // For three or more dimensions keep a plain lattice at the requested
  // spacing; the off-lattice error then carries the K step^alpha term.
  int k = static_cast<int>(std::ceil(2.0 * half / step)) + 1;
  k = std::max(k, 2);
  horizontal_lattice(-half, half, k, haxes, [&](const Vec& x) {
    Vec q = x;
    q[p.dim - 1] = p.phi(x);
    pts.push_back(q);
  });
  return pts;
}

double point_cloud_distance(const Vec& c, const std::vector<Vec>& pts, int dim) {
  double best = 1e300;
  for (const Vec& q : pts) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) s += (c[d] - q[d]) * (c[d] - q[d]);
    best = std::min(best, s);
  }
  return std::sqrt(best);
}

}  // namespace

HolderProfile power_hump(double alpha, double l, int dim, double c) {
  if (!(alpha > 0.0) || alpha > 1.0 || !(l > 0.0) || l > 1.0)
    fail(errc::invalid_argument, "power hump needs alpha in (0,1] and l in (0,1]");
  if (dim < 2 || dim > kMaxDim)
    fail(errc::invalid_argument, "power hump needs 2 <= dim <= 4");
  if (c < 0.0) c = std::pow(l, 1.0 - alpha);
  HolderProfile p;
  const int haxes = dim - 1;
  p.phi = [alpha, l, c, haxes](const Vec& x) {
    double r2 = 0.0;
    for (int d = 0; d < haxes; ++d) r2 += x[d] * x[d];
    return 2.0 * l + c * std::pow(r2, 0.5 * alpha);
  };
  p.alpha = alpha;
  p.k_phi = c;  // | |x|^a - |x'|^a | <= |x - x'|^a for a <= 1
  p.l = l;
  p.dim = dim;
  char buf[64];
  std::snprintf(buf, sizeof buf, "power-hump(%g)", alpha);
  p.name = buf;
  return p;
}

HolderProfile flat_graph(double c, double l, int dim) {
  if (!(l > 0.0) || l > 1.0 || !(c >= 2.0 * l))
    fail(errc::invalid_argument, "flat graph needs 0 < l <= 1 and c >= 2l");
  HolderProfile p;
  p.phi = [c](const Vec&) { return c; };
  p.alpha = 1.0;
  p.k_phi = 0.0;
  p.l = l;
  p.dim = dim;
  char buf[64];
  std::snprintf(buf, sizeof buf, "flat(%g)", c);
  p.name = buf;
  return p;
}

HolderProfileCheck verify_profile(const HolderProfile& p, int samples) {
  if (!p.phi) fail(errc::invalid_argument, "profile has no function");
  if (p.dim < 2 || p.dim > kMaxDim)
    fail(errc::invalid_argument, "profile needs 2 <= dim <= 4");
  if (!(p.alpha > 0.0) || p.alpha > 1.0 || !(p.l > 0.0) || p.l > 1.0 ||
      p.k_phi < 0.0)
    fail(errc::invalid_argument, "profile constants out of range");
  if (samples < 2) fail(errc::invalid_argument, "need at least 2 samples");

  const int haxes = p.dim - 1;
  int per_axis = samples;
  if (haxes > 1)
    per_axis = std::max(
        9, static_cast<int>(std::round(std::pow(samples, 1.0 / haxes))));

  std::vector<Vec> xs;
  std::vector<double> vs;
  horizontal_lattice(-2.5 * p.l, 2.5 * p.l, per_axis, haxes, [&](const Vec& x) {
    xs.push_back(x);
    vs.push_back(p.phi(x));
  });

  HolderProfileCheck r;
  r.min_phi = *std::min_element(vs.begin(), vs.end());
  r.above_2l = r.min_phi >= 2.0 * p.l;
  r.dips_below_3l = r.min_phi < 3.0 * p.l;

  r.holder_ok = true;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double dv = std::abs(vs[i] - vs[j]);
      double dx = 0.0;
      for (int d = 0; d < haxes; ++d)
        dx += (xs[i][d] - xs[j][d]) * (xs[i][d] - xs[j][d]);
      dx = std::sqrt(dx);
      if (p.k_phi == 0.0) {
        if (dv > 0.0) r.holder_ok = false;
        continue;
      }
      const double ratio = dv / (p.k_phi * std::pow(dx, p.alpha));
      r.worst_holder_ratio = std::max(r.worst_holder_ratio, ratio);
    }
  if (r.worst_holder_ratio > 1.0 + 1e-12) r.holder_ok = false;

  r.pass = r.holder_ok && r.above_2l && r.dips_below_3l;
  return r;
}

PiledCubes pile_cubes(const HolderProfile& p, int max_levels,
                      const PileOptions& opt) {
  if (max_levels < 0) fail(errc::invalid_argument, "max_levels must be >= 0");
  if (opt.face_samples < 2)
    fail(errc::invalid_argument, "need at least 2 face samples per axis");
  const HolderProfileCheck chk = verify_profile(p);
  if (!chk.pass) {
    char buf[192];
    std::snprintf(buf, sizeof buf,
                  "profile '%s' fails its sampled invariants: holder ratio "
                  "%.6g, min phi %.6g vs [2l, 3l) = [%.6g, %.6g)",
                  p.name.c_str(), chk.worst_holder_ratio, chk.min_phi,
                  2.0 * p.l, 3.0 * p.l);
    fail(errc::profile_violation, buf);
  }

  const int dim = p.dim;
  const int haxes = dim - 1;

  PiledCubes out;
  out.dim = dim;
  PiledCube root;
  for (int d = 0; d < haxes; ++d) {
    root.box.lo[d] = -0.5 * p.l;
    root.box.hi[d] = 0.5 * p.l;
  }
  root.box.lo[dim - 1] = 0.0;
  root.box.hi[dim - 1] = p.l;
  root.side = p.l;
  out.cubes.push_back(root);
  out.levels = 1;

  std::vector<int> frontier{0};
  for (int level = 0; level < max_levels && !frontier.empty(); ++level) {
    std::vector<int> next;
    for (int idx : frontier) {
      const PiledCube q = out.cubes[idx];
      const double y2 = q.box.hi[dim - 1];
      if (triple_fits(p, q, opt.face_samples)) {
        PiledCube c = q;
        c.box.lo[dim - 1] = y2;
        c.box.hi[dim - 1] = y2 + q.side;
        c.level = level + 1;
        c.parent = idx;
        next.push_back(static_cast<int>(out.cubes.size()));
        out.cubes.push_back(c);
      } else {
        const double hs = 0.5 * q.side;
        if (hs < opt.min_side) continue;  // would underflow the grid
        for (int bits = 0; bits < (1 << haxes); ++bits) {
          PiledCube c;
          for (int d = 0; d < haxes; ++d) {
            c.box.lo[d] = q.box.lo[d] + ((bits >> d) & 1 ? hs : 0.0);
            c.box.hi[d] = c.box.lo[d] + hs;
          }
          c.box.lo[dim - 1] = y2;
          c.box.hi[dim - 1] = y2 + hs;
          c.side = hs;
          c.level = level + 1;
          c.parent = idx;
          next.push_back(static_cast<int>(out.cubes.size()));
          out.cubes.push_back(c);
        }
      }
    }
    if (!next.empty()) out.levels = level + 2;
    frontier = std::move(next);
  }
  return out;
}

Region holder_domain(const HolderProfile& p) {
  const int dim = p.dim;
  const int haxes = dim - 1;
  double top = 0.0;
  horizontal_lattice(-0.5 * p.l, 0.5 * p.l, 257, haxes,
                     [&](const Vec& x) { top = std::max(top, p.phi(x)); });
  Box bb;
  for (int d = 0; d < haxes; ++d) {
    bb.lo[d] = -0.5 * p.l;
    bb.hi[d] = 0.5 * p.l;
  }
  bb.lo[dim - 1] = 0.0;
  bb.hi[dim - 1] = top * (1.0 + 1e-9);
  auto phi = p.phi;
  const double half = 0.5 * p.l;
  auto fn = [phi, half, dim, haxes](const Vec& q) {
    for (int d = 0; d < haxes; ++d)
      if (!(q[d] > -half && q[d] < half)) return false;
    return q[dim - 1] > 0.0 && q[dim - 1] < phi(q);
  };
  return Region::predicate(fn, bb, dim);
}

GridFunction graph_distance(const HolderProfile& p, const Grid& grid,
                            double step) {
  if (grid.dim != p.dim)
    fail(errc::invalid_argument, "grid dimension does not match the profile");
  if (step <= 0.0) step = 0.5 * grid.h;
  const std::vector<Vec> pts = graph_cloud(p, step);
  GridFunction out = make_function(
      grid, 1, std::vector<std::uint8_t>(grid.cell_count(), 1));
  for (std::int64_t c = 0; c < grid.cell_count(); ++c)
    out.at(0, c) = point_cloud_distance(grid.center(c), pts, p.dim);
  return out;
}

std::vector<double> cube_distances(const PiledCubes& piled,
                                   const HolderProfile& p, double step) {
  if (!(step > 0.0)) fail(errc::invalid_argument, "step must be positive");
  const std::vector<Vec> pts = graph_cloud(p, step);
  std::vector<double> out(piled.cubes.size(), 1e300);
  for (std::size_t i = 0; i < piled.cubes.size(); ++i)
    for (const Vec& q : pts)
      out[i] = std::min(out[i], piled.cubes[i].box.distance_to(q, p.dim));
  return out;
}

DomainTree holder_tree(const PiledCubes& piled, const Grid& grid) {
  if (piled.cubes.empty()) fail(errc::empty_domain, "no piled cubes");
  if (grid.dim != piled.dim)
    fail(errc::invalid_argument, "grid dimension does not match the pile");
  const int dim = piled.dim;

  std::vector<TreeNode> nodes(piled.cubes.size());
  for (std::size_t i = 0; i < piled.cubes.size(); ++i) {
    const PiledCube& q = piled.cubes[i];
    nodes[i].parent = q.parent;
    if (q.parent < 0) {
      nodes[i].omega = Region::box(q.box, dim);
      continue;
    }
    Box om = q.box;
    om.lo[dim - 1] -= 0.5 * q.side;
    nodes[i].omega = Region::box(om, dim);
    Box b = om;
    b.hi[dim - 1] = q.box.lo[dim - 1];
    nodes[i].connector = Region::box(b, dim);
  }
  return make_tree(grid, std::move(nodes), /*overlap_bound=*/2,
                   /*tail_node=*/-1);
}

HolderWeights holder_weights(const PiledCubes& piled, const HolderProfile& p,
                             const DomainTree& tree, double kappa) {
  if (kappa < 0.0) fail(errc::invalid_argument, "kappa must be >= 0");
  if (piled.cubes.size() != tree.nodes.size())
    fail(errc::invalid_argument, "pile and tree sizes differ");

  const Grid& grid = tree.grid;
  const GridFunction d = graph_distance(p, grid, 0.0);

  HolderWeights w;
  w.omega_bar = make_function(grid, 1, tree.mask);
  w.hat_w = make_function(grid, 1, tree.mask);
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    if (!tree.mask[static_cast<std::size_t>(c)]) continue;
    const double dd = d.at(0, c);
    if (!(dd > 0.0))
      fail(errc::invalid_weight, "graph distance vanishes on a masked cell");
    w.omega_bar.at(0, c) = std::pow(dd, 1.0 - p.alpha);
    w.hat_w.at(0, c) = std::pow(dd, -kappa);
  }

  const GridFunction om = tree_weight(tree);
  HolderWeightReport& rep = w.report;
  rep.node_ratio.assign(tree.nodes.size(), 0.0);
  rep.finite = true;
  for (int t = 0; t < tree.size(); ++t) {
    double sup_bar = 0.0, inf_om = 1e300;
    for (std::int64_t c : tree.omega_cells[t]) {
      sup_bar = std::max(sup_bar, w.omega_bar.at(0, c));
      inf_om = std::min(inf_om, om.at(0, c));
    }
    if (!(inf_om > 0.0) || !std::isfinite(sup_bar)) {
      rep.finite = false;
      continue;
    }
    rep.node_ratio[t] = sup_bar / inf_om;
    rep.m1 = std::max(rep.m1, rep.node_ratio[t]);

    const double lt = piled.cubes[t].side;
    const double cap =
        (p.k_phi + std::pow(lt, 1.0 - p.alpha)) * std::pow(lt, p.dim - 1 + p.alpha);
    rep.shadow_constant = std::max(rep.shadow_constant, tree.w_measure[t] / cap);
  }
  rep.finite = rep.finite && std::isfinite(rep.m1) && rep.m1 > 0.0;
  return w;
}

}  // namespace divtree
