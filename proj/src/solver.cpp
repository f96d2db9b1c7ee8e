#include "divtree/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace divtree {

namespace {

bool same_grid(const Grid& a, const Grid& b) {
  if (a.dim != b.dim || a.h != b.h) return false;
  for (int d = 0; d < a.dim; ++d)
    if (a.origin[d] != b.origin[d] || a.shape[d] != b.shape[d]) return false;
  return true;
}

void check_weight_field(const GridFunction& w, const DomainTree& tree,
                        const char* label) {
  if (w.components != 1)
    fail(errc::invalid_argument, std::string(label) + " must be scalar");
  if (!same_grid(w.grid, tree.grid))
    fail(errc::invalid_argument,
         std::string(label) + " lives on a different grid");
  for (std::int64_t c = 0; c < w.cells(); ++c)
    if (tree.mask[static_cast<std::size_t>(c)] &&
        (!w.active(c) || !(w.at(0, c) > 0.0)))
      fail(errc::invalid_weight, std::string(label) +
                                     " is not positive on masked cell " +
                                     std::to_string(c));
}

std::vector<std::uint8_t> cells_mask(const Grid& g,
                                     const std::vector<std::int64_t>& cells) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(g.cell_count()), 0);
  for (std::int64_t c : cells) m[static_cast<std::size_t>(c)] = 1;
  return m;
}

GridFunction restrict_to_mask(const GridFunction& f, const DomainTree& tree) {
  GridFunction out = make_function(tree.grid, 1, tree.mask);
  for (std::int64_t c = 0; c < out.cells(); ++c)
    if (tree.mask[static_cast<std::size_t>(c)] && f.active(c))
      out.at(0, c) = f.at(0, c);
  return out;
}

double region_diameter(const StarRegion& s, int dim) {
  return s.diameter > 0.0 ? s.diameter : s.shape.bounding_box().diameter(dim);
}

// Coarse grid over the box, spacing factor*h, cell faces aligned with the
// fine grid so restriction is a plain index shift.
Grid coarse_grid(const Grid& g, const Box& bb, int factor) {
  Grid gc;
  gc.dim = g.dim;
  gc.h = g.h * factor;
  for (int d = 0; d < g.dim; ++d) {
    gc.origin[d] =
        g.origin[d] + std::floor((bb.lo[d] - g.origin[d]) / gc.h) * gc.h;
    gc.shape[d] = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(
               std::ceil((bb.hi[d] - gc.origin[d]) / gc.h - 1e-12)));
  }
  return gc;
}

double sample_multilinear(const GridFunction& u, int comp, const Vec& x) {
  const Grid& gc = u.grid;
  const int dim = gc.dim;
  std::int64_t base[kMaxDim];
  double frac[kMaxDim];
  for (int d = 0; d < dim; ++d) {
    const double s = (x[d] - gc.origin[d]) / gc.h - 0.5;
    const double fl = std::floor(s);
    std::int64_t i0 = static_cast<std::int64_t>(fl);
    double w = s - fl;
    if (i0 < 0) {
      i0 = 0;
      w = 0.0;
    }
    if (i0 >= gc.shape[d] - 1) {
      i0 = std::max<std::int64_t>(0, gc.shape[d] - 2);
      w = gc.shape[d] > 1 ? 1.0 : 0.0;
    }
    base[d] = i0;
    frac[d] = w;
  }
  double acc = 0.0;
  for (int corner = 0; corner < (1 << dim); ++corner) {
    IVec mi{};
    double cw = 1.0;
    for (int d = 0; d < dim; ++d) {
      const int bit = (corner >> d) & 1;
      mi[d] = base[d] + bit;
      cw *= bit ? frac[d] : 1.0 - frac[d];
    }
    if (cw == 0.0) continue;
    acc += cw * u.at(comp, gc.flatten(mi));
  }
  return acc;
}

// The divergence stencil of the full mask, restricted to one node: rows are
// the node's cells plus the ring of active outside cells whose stencils read
// them, columns the node's field values. Mirrors divergence_fd exactly:
// centered where both neighbors are masked, one-sided at mask boundaries.
struct SeamSystem {
  std::vector<std::int64_t> rows;  // flat cell per row, node cells first
  std::size_t node_rows = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::int32_t> cols;  // node ordinal * dim + axis
  std::vector<double> vals;

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double s = 0.0;
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
        s += vals[k] * x[static_cast<std::size_t>(cols[k])];
      y[r] = s;
    }
  }
  void apply_t(const std::vector<double>& y, std::vector<double>& x) const {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
        x[static_cast<std::size_t>(cols[k])] += vals[k] * y[r];
  }
};

SeamSystem build_seam_system(const Grid& g,
                             const std::vector<std::int64_t>& cells,
                             const std::vector<std::uint8_t>& mask) {
  const int dim = g.dim;
  std::vector<std::int32_t> ord(static_cast<std::size_t>(g.cell_count()), -1);
  for (std::size_t k = 0; k < cells.size(); ++k)
    ord[static_cast<std::size_t>(cells[k])] = static_cast<std::int32_t>(k);

  SeamSystem sys;
  sys.rows = cells;
  sys.node_rows = cells.size();
  std::vector<std::int64_t> ring;
  for (std::int64_t c : cells)
    for (int d = 0; d < dim; ++d)
      for (int s = -1; s <= 1; s += 2) {
        const std::int64_t nb = g.neighbor(c, d, s);
        if (nb >= 0 && mask[static_cast<std::size_t>(nb)] &&
            ord[static_cast<std::size_t>(nb)] < 0)
          ring.push_back(nb);
      }
  std::sort(ring.begin(), ring.end());
  ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
  sys.rows.insert(sys.rows.end(), ring.begin(), ring.end());

  const double h = g.h;
  sys.row_ptr.push_back(0);
  auto push = [&](std::int64_t cell, int axis, double v) {
    const std::int32_t o = ord[static_cast<std::size_t>(cell)];
    if (o < 0) return;  // fixed zero outside the node
    sys.cols.push_back(o * dim + axis);
    sys.vals.push_back(v);
  };
  for (std::int64_t c : sys.rows) {
    for (int d = 0; d < dim; ++d) {
      const std::int64_t ip = g.neighbor(c, d, +1);
      const std::int64_t im = g.neighbor(c, d, -1);
      const bool okp = ip >= 0 && mask[static_cast<std::size_t>(ip)];
      const bool okm = im >= 0 && mask[static_cast<std::size_t>(im)];
      if (okp && okm) {
        push(ip, d, 0.5 / h);
        push(im, d, -0.5 / h);
      } else if (okp) {
        push(ip, d, 1.0 / h);
        push(c, d, -1.0 / h);
      } else if (okm) {
        push(c, d, 1.0 / h);
        push(im, d, -1.0 / h);
      }
    }
    sys.row_ptr.push_back(sys.cols.size());
  }
  return sys;
}

// Least-squares polish of one node's field against the embedded stencil.
// CGLS with a geometry-sized budget; the iteration is linear in the data, so
// the glue stays linear and deterministic. Returns iterations spent.
int complete_divergence(const SeamSystem& sys, std::vector<double>& rhs,
                        std::vector<double>& x, int budget) {
  const std::size_t m = sys.rows.size();
  const std::size_t n = x.size();
  std::vector<double> s(n), p(n), q(m);
  sys.apply_t(rhs, s);
  double gamma = 0.0;
  for (double v : s) gamma += v * v;
  if (gamma == 0.0) return 0;
  p = s;
  double r0 = 0.0;
  for (double v : rhs) r0 += v * v;
  const double floor2 = r0 * 1e-24;
  int it = 0;
  for (; it < budget; ++it) {
    sys.apply(p, q);
    double qq = 0.0;
    for (double v : q) qq += v * v;
    if (qq == 0.0) break;
    const double alpha = gamma / qq;
    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
    double rr = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      rhs[i] -= alpha * q[i];
      rr += rhs[i] * rhs[i];
    }
    if (rr < floor2) {
      ++it;
      break;
    }
    sys.apply_t(rhs, s);
    double gnew = 0.0;
    for (double v : s) gnew += v * v;
    const double beta = gnew / gamma;
    gamma = gnew;
    for (std::size_t i = 0; i < n; ++i) p[i] = s[i] + beta * p[i];
  }
  return it;
}

// Local solve that honors the cell cap: oversized data are restricted to a
// coarsened copy of the node's subgrid (conservative cell averaging), solved
// there, and brought back by multilinear interpolation. The mass dropped by
// cells that land outside the coarse region is recorded, and the coarse
// datum is shifted to zero mean before solving; both enter the residual, not
// a silent renormalization.
GridFunction capped_star_solve(const GridFunction& gt, const StarRegion& star,
                               const LocalSolveOptions& lopt,
                               NodeSolveStats& st) {
  const Grid& g = gt.grid;
  const int dim = g.dim;
  std::vector<std::int64_t> fine;
  for (std::int64_t c = 0; c < gt.cells(); ++c)
    if (gt.active(c)) fine.push_back(c);
  if (static_cast<std::int64_t>(fine.size()) <= kMaxLocalCells)
    return bogovskii_solve(gt, star, lopt);

  const Box bb = star.shape.bounding_box();
  const double vf = g.cell_volume();
  for (int factor = 2; factor <= 256; factor *= 2) {
    const Grid gc = coarse_grid(g, bb, factor);
    std::vector<std::int64_t> ccells = cells_in_region(gc, star.shape);
    if (static_cast<std::int64_t>(ccells.size()) > kMaxLocalCells) continue;
    if (ccells.empty())
      fail(errc::empty_domain, "coarse region resolves to zero cells");

    GridFunction fc = make_function(gc, 1, cells_mask(gc, ccells));
    const double vc = gc.cell_volume();
    double dropped = 0.0, l1 = 0.0;
    for (std::int64_t c : fine) {
      const double v = gt.at(0, c);
      l1 += std::abs(v) * vf;
      const Vec x = g.center(c);
      IVec mi{};
      bool inside = true;
      for (int d = 0; d < dim; ++d) {
        mi[d] = static_cast<std::int64_t>(
            std::floor((x[d] - gc.origin[d]) / gc.h));
        inside = inside && mi[d] >= 0 && mi[d] < gc.shape[d];
      }
      const std::int64_t cc = inside ? gc.flatten(mi) : -1;
      if (cc >= 0 && fc.active(cc))
        fc.at(0, cc) += v * (vf / vc);
      else
        dropped += v * vf;
    }
    double cmass = 0.0;
    for (std::int64_t c : ccells) cmass += fc.at(0, c);
    const double shift = cmass / static_cast<double>(ccells.size());
    for (std::int64_t c : ccells) fc.at(0, c) -= shift;
    st.coarsen = factor;
    st.mean_leak = l1 > 0.0 ? std::abs(dropped) / l1 : 0.0;

    const GridFunction uc = bogovskii_solve(fc, star, lopt);
    GridFunction out = make_function(g, dim, gt.mask);
    for (std::int64_t c : fine) {
      const Vec x = g.center(c);
      for (int d = 0; d < dim; ++d)
        out.at(d, c) = sample_multilinear(uc, d, x);
    }
    return out;
  }
  fail(errc::unsupported,
       "node stays over the local cell cap even coarsened 256-fold");
}

// Chain glue for a node that is a union of overlapping star slabs: an inner
// path tree rooted at the last (widest) link re-decomposes the node datum,
// every inner piece is solved on its own star, and the fields sum.
GridFunction chain_solve(const GridFunction& gt,
                         const std::vector<StarRegion>& chain,
                         const LocalSolveOptions& lopt, NodeSolveStats& st) {
  const Grid& g = gt.grid;
  const int dim = g.dim;
  const int links = static_cast<int>(chain.size());
  st.chain_links = links;
  for (const StarRegion& s : chain)
    st.star_ratio =
        std::max(st.star_ratio, region_diameter(s, dim) / s.ball_radius);
  if (links == 1) return capped_star_solve(gt, chain[0], lopt, st);

  std::vector<TreeNode> nodes(static_cast<std::size_t>(links));
  for (int j = 0; j < links; ++j) {
    nodes[static_cast<std::size_t>(j)].parent = j + 1 < links ? j + 1 : -1;
    nodes[static_cast<std::size_t>(j)].omega = chain[static_cast<std::size_t>(j)].shape;
    if (j + 1 == links) continue;
    const Box& a = chain[static_cast<std::size_t>(j)].shape.bounding_box();
    const Box& b = chain[static_cast<std::size_t>(j) + 1].shape.bounding_box();
    Box ib;
    for (int d = 0; d < dim; ++d) {
      ib.lo[d] = std::max(a.lo[d], b.lo[d]);
      ib.hi[d] = std::min(a.hi[d], b.hi[d]);
    }
    Region left = chain[static_cast<std::size_t>(j)].shape;
    Region right = chain[static_cast<std::size_t>(j) + 1].shape;
    nodes[static_cast<std::size_t>(j)].connector = Region::predicate(
        [left, right](const Vec& z) {
          return left.contains(z) && right.contains(z);
        },
        ib, dim);
  }
  DomainTree inner = make_tree(g, std::move(nodes), 2.0, -1);

  Decomposition dec = decompose(inner, gt);
  if (dec.off_mask_cells > 0)
    fail(errc::cover_gap, "chain slabs miss " +
                              std::to_string(dec.off_mask_cells) +
                              " cells of the node datum");

  GridFunction out = make_function(g, dim, gt.mask);
  for (int j : inner.order) {
    const NodePiece& piece = dec.pieces[static_cast<std::size_t>(j)];
    bool nonzero = false;
    for (double v : piece.g)
      if (v != 0.0) {
        nonzero = true;
        break;
      }
    if (!nonzero) continue;
    const auto& cells = inner.omega_cells[static_cast<std::size_t>(j)];
    GridFunction gj = make_function(g, 1, cells_mask(g, cells));
    for (std::size_t k = 0; k < cells.size(); ++k)
      gj.at(0, cells[k]) = piece.g[k];
    NodeSolveStats link_st;
    const GridFunction uj =
        capped_star_solve(gj, chain[static_cast<std::size_t>(j)], lopt, link_st);
    st.coarsen = std::max(st.coarsen, link_st.coarsen);
    st.mean_leak = std::max(st.mean_leak, link_st.mean_leak);
    for (std::int64_t c : cells)
      for (int d = 0; d < dim; ++d) out.at(d, c) += uj.at(d, c);
  }
  return out;
}

}  // namespace

std::vector<LocalShape> box_local_shapes(const DomainTree& tree) {
  const int dim = tree.grid.dim;
  std::vector<LocalShape> out(static_cast<std::size_t>(tree.size()));
  for (int t = 0; t < tree.size(); ++t) {
    const Region& om = tree.nodes[static_cast<std::size_t>(t)].omega;
    if (!om.is_box())
      fail(errc::containment, "omega of node " + std::to_string(t) +
                                  " is not a box; register a star shape");
    const Box& b = om.boxes()[0];
    StarRegion s;
    s.shape = om;
    s.ball_center = b.center(dim);
    s.ball_radius = 0.5 * b.shortest_side(dim);
    s.diameter = b.diameter(dim);
    out[static_cast<std::size_t>(t)].star = s;
  }
  return out;
}

std::vector<LocalShape> cusp_local_shapes(const CuspProfile& p,
                                          const CuspCover& cover,
                                          const Grid& grid, double min_ball_h) {
  if (grid.dim != 2)
    fail(errc::unsupported, "cusp chains are planar; use a 2d grid");
  if (!(min_ball_h > 0.0))
    fail(errc::invalid_argument, "min_ball_h must be positive");
  const int n = cover.tree.size();
  if (static_cast<int>(cover.xs.size()) < n + 2)
    fail(errc::invalid_argument, "cover sequence too short for its tree");

  static const int ladder[] = {2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128};
  std::vector<LocalShape> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double w = cover.xs[static_cast<std::size_t>(i)] -
                     cover.xs[static_cast<std::size_t>(i) + 2];
    const int cap =
        static_cast<int>(std::floor(w / (min_ball_h * grid.h)));
    if (cap < 2) {
      char buf[128];
      std::snprintf(buf, sizeof buf,
                    "node %d is %.3g wide, too thin for its slab balls at "
                    "h = %g; refine the grid",
                    i, w, grid.h);
      fail(errc::degenerate_connector, buf);
    }
    std::vector<int> tries;
    for (int m : ladder)
      if (m <= cap) tries.push_back(m);
    if (tries.empty() || tries.back() != cap) tries.push_back(std::min(cap, 192));

    // A ball of radius w/m centered on the axis peaks at height w/m, and the
    // graph over its slab is lowest at the node's thin end, so the ball fits
    // under the graph only when m phi(x_{i+2}) > w. Smaller m cannot work;
    // skip them without scanning.
    const double thin_end = p.phi(cover.xs[static_cast<std::size_t>(i) + 2]);

    std::vector<StarSlab> slabs;
    std::string last_reason;
    for (int m : tries) {
      if (!(static_cast<double>(m) * thin_end > w)) {
        char buf[96];
        std::snprintf(buf, sizeof buf,
                      "ball of radius %.3g cannot fit under graph height %.3g",
                      w / m, thin_end);
        last_reason = buf;
        continue;
      }
      try {
        slabs = star_split(p, cover.xs, i, m, false);
        break;
      } catch (const Error& e) {
        if (e.code() != errc::profile_violation) throw;
        last_reason = e.what();
        slabs.clear();
      }
    }
    if (slabs.empty())
      fail(errc::profile_violation,
           "no slab count up to " + std::to_string(tries.back()) +
               " makes node " + std::to_string(i) +
               " a chain of sampled star slabs; " + last_reason);

    LocalShape& sh = out[static_cast<std::size_t>(i)];
    sh.chain.reserve(slabs.size());
    for (const StarSlab& s : slabs) {
      StarRegion r;
      r.shape = s.slab;
      r.ball_center = s.center;
      r.ball_radius = s.radius;
      r.diameter = s.bounds.diameter(2);
      sh.chain.push_back(std::move(r));
    }
  }
  return out;
}

SolveWeights unit_weights(const DomainTree& tree) {
  SolveWeights w;
  w.omega_bar = make_function(tree.grid, 1, tree.mask);
  w.hat_w = make_function(tree.grid, 1, tree.mask);
  for (std::int64_t c = 0; c < w.omega_bar.cells(); ++c)
    if (tree.mask[static_cast<std::size_t>(c)]) {
      w.omega_bar.at(0, c) = 1.0;
      w.hat_w.at(0, c) = 1.0;
    }
  return w;
}

double glued_constant(double p, double overlap, double m1, double m2,
                      double mt) {
  if (!(p > 1.0)) fail(errc::invalid_argument, "p must exceed 1");
  return 2.0 * overlap * m1 * m2 *
         std::pow(overlap + 2.0 * std::pow(mt, p), 1.0 / p);
}

double corollary_divp_constant(double p, double overlap, double m1,
                               double m2) {
  if (!(p > 1.0)) fail(errc::invalid_argument, "p must exceed 1");
  return 2.0 * m1 * m2 * std::pow(overlap, 1.0 + 1.0 / p) *
         std::pow(1.0 + std::pow(2.0, p + 1.0) * p / (p - 1.0), 1.0 / p);
}

SolveResult solve_divergence(const GridFunction& f, const DomainTree& tree,
                             const std::vector<LocalShape>& shapes,
                             const SolveWeights& weights, double p,
                             const SolveOptions& opt) {
  const Grid& g = tree.grid;
  const int dim = g.dim;
  if (!(p > 1.0)) fail(errc::invalid_argument, "p must exceed 1");
  if (f.components != 1) fail(errc::invalid_argument, "f must be scalar");
  if (!same_grid(f.grid, g))
    fail(errc::invalid_argument, "f lives on a different grid");
  if (static_cast<int>(shapes.size()) != tree.size())
    fail(errc::invalid_argument, "need one local shape per tree node");
  check_weight_field(weights.omega_bar, tree, "omega_bar");
  check_weight_field(weights.hat_w, tree, "hat_w");

  const CoverReport cover = validate_tree(tree);
  if (!cover.ok())
    fail(errc::cover_gap, "tree failed validation: " + cover.detail);

  const double vol = g.cell_volume();
  double mass = 0.0, l1 = 0.0, off = 0.0;
  for (std::int64_t c = 0; c < f.cells(); ++c) {
    if (!f.active(c)) continue;
    const double v = f.at(0, c);
    if (tree.mask[static_cast<std::size_t>(c)]) {
      mass += v;
      l1 += std::abs(v);
    } else {
      off += std::abs(v);
    }
  }
  mass *= vol;
  l1 *= vol;
  off *= vol;

  SolveResult res;
  res.u = make_function(g, dim, tree.mask);
  SolveReport& rep = res.report;
  rep.p = p;
  rep.overlap = tree.overlap_bound;

  const GridFunction omega = tree_weight(tree);
  for (int t = 0; t < tree.size(); ++t) {
    double sup_bar = 0.0, inf_om = 1e300;
    for (std::int64_t c : tree.omega_cells[static_cast<std::size_t>(t)]) {
      sup_bar = std::max(sup_bar, weights.omega_bar.at(0, c));
      inf_om = std::min(inf_om, omega.at(0, c));
    }
    rep.m1_empirical = std::max(rep.m1_empirical, sup_bar / inf_om);
  }

  bool unit_hat = true;
  for (std::int64_t c = 0; c < g.cell_count() && unit_hat; ++c)
    if (tree.mask[static_cast<std::size_t>(c)] && weights.hat_w.at(0, c) != 1.0)
      unit_hat = false;
  if (unit_hat)
    rep.mt_theoretical = hardy_bound_constant(p, tree.overlap_bound);

  rep.nodes.resize(static_cast<std::size_t>(tree.size()));
  for (int t = 0; t < tree.size(); ++t) {
    rep.nodes[static_cast<std::size_t>(t)].node = t;
    rep.nodes[static_cast<std::size_t>(t)].cells = static_cast<std::int64_t>(
        tree.omega_cells[static_cast<std::size_t>(t)].size());
  }

  if (l1 == 0.0) {
    if (off > 0.0)
      fail(errc::invalid_argument, "f has mass outside the covering");
    rep.c_theoretical = glued_constant(p, rep.overlap, rep.m1_empirical,
                                       rep.m2_empirical, rep.mt_empirical);
    rep.estimate_pass = true;
    return res;
  }
  if (off > 1e-12 * l1)
    fail(errc::invalid_argument,
         "f has mass outside the covering; restrict it to the tree mask");
  if (std::abs(mass) > opt.mean_tol * l1) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "f has mean %.6g, %.3g of its L1 mass",
                  mass, std::abs(mass) / l1);
    fail(errc::mean_violation, buf);
  }

  const GridFunction fr = restrict_to_mask(f, tree);
  rep.f_norm = weighted_lp_norm(fr, &weights.hat_w, p);

  const GridFunction tf = hardy_tree_operator(tree, fr);
  rep.mt_empirical =
      rep.f_norm > 0.0
          ? weighted_lp_norm(tf, &weights.hat_w, p) / rep.f_norm
          : 0.0;

  const Decomposition dec = decompose(tree, fr);

  for (int t : tree.order) {
    NodeSolveStats& st = rep.nodes[static_cast<std::size_t>(t)];
    const NodePiece& piece = dec.pieces[static_cast<std::size_t>(t)];
    bool nonzero = false;
    for (double v : piece.g)
      if (v != 0.0) {
        nonzero = true;
        break;
      }
    if (!nonzero) continue;

    const auto& cells = tree.omega_cells[static_cast<std::size_t>(t)];
    const std::vector<std::uint8_t> nmask = cells_mask(g, cells);
    GridFunction gt = make_function(g, 1, nmask);
    for (std::size_t k = 0; k < cells.size(); ++k)
      gt.at(0, cells[k]) = piece.g[k];
    st.g_norm = weighted_lp_norm(gt, &weights.hat_w, p);

    const LocalShape& shape = shapes[static_cast<std::size_t>(t)];
    if (shape.chain.empty())
      st.star_ratio =
          shape.star.ball_radius > 0.0
              ? region_diameter(shape.star, dim) / shape.star.ball_radius
              : 0.0;

    GridFunction ut;
    try {
      ut = shape.chain.empty()
               ? capped_star_solve(gt, shape.star, opt.local, st)
               : chain_solve(gt, shape.chain, opt.local, st);
    } catch (const Error& e) {
      throw Error(e.code(),
                  "node " + std::to_string(t) + ": " + e.what());
    }

    if (tree.size() > 1 && opt.completion_budget != 0) {
      const SeamSystem sys = build_seam_system(g, cells, tree.mask);
      const std::size_t n = cells.size() * static_cast<std::size_t>(dim);
      std::vector<double> x0(n);
      for (std::size_t k = 0; k < cells.size(); ++k)
        for (int d = 0; d < dim; ++d)
          x0[k * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)] =
              ut.at(d, cells[k]);
      std::vector<double> rhs(sys.rows.size(), 0.0);
      sys.apply(x0, rhs);
      double g_l2 = 0.0, r_l2 = 0.0;
      for (std::size_t r = 0; r < sys.rows.size(); ++r) {
        const double target =
            r < sys.node_rows ? piece.g[r] : 0.0;
        rhs[r] = target - rhs[r];
        r_l2 += rhs[r] * rhs[r];
      }
      for (double v : piece.g) g_l2 += v * v;
      g_l2 = std::sqrt(g_l2);
      st.seed_residual = g_l2 > 0.0 ? std::sqrt(r_l2) / g_l2 : 0.0;

      const int budget =
          opt.completion_budget > 0
              ? opt.completion_budget
              : 60 + 6 * static_cast<int>(std::sqrt(
                             static_cast<double>(sys.rows.size())));
      std::vector<double> w(n, 0.0);
      st.completion_iters = complete_divergence(sys, rhs, w, budget);
      r_l2 = 0.0;
      for (double v : rhs) r_l2 += v * v;
      st.local_residual = g_l2 > 0.0 ? std::sqrt(r_l2) / g_l2 : 0.0;
      for (std::size_t k = 0; k < cells.size(); ++k)
        for (int d = 0; d < dim; ++d)
          ut.at(d, cells[k]) +=
              w[k * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)];
    }

    const GridFunction dut = gradient_fd(ut);
    st.du_norm = weighted_lp_norm(dut, &weights.hat_w, p);
    st.ratio = st.g_norm > 0.0 ? st.du_norm / st.g_norm : 0.0;
    rep.m2_empirical = std::max(rep.m2_empirical, st.ratio);

    for (std::int64_t c : cells)
      for (int d = 0; d < dim; ++d) res.u.at(d, c) += ut.at(d, c);
  }

  GridFunction w_prod = make_function(g, 1, tree.mask);
  for (std::int64_t c = 0; c < w_prod.cells(); ++c)
    if (tree.mask[static_cast<std::size_t>(c)])
      w_prod.at(0, c) = weights.omega_bar.at(0, c) * weights.hat_w.at(0, c);

  const GridFunction du = gradient_fd(res.u);
  rep.du_norm = weighted_lp_norm(du, &w_prod, p);
  rep.c_empirical = rep.du_norm / rep.f_norm;
  rep.c_theoretical = glued_constant(p, rep.overlap, rep.m1_empirical,
                                     rep.m2_empirical, rep.mt_empirical);
  rep.estimate_pass = rep.c_empirical <= rep.c_theoretical;

  const GridFunction divu = divergence_fd(res.u);
  double num = 0.0, den = 0.0;
  for (std::int64_t c = 0; c < g.cell_count(); ++c) {
    if (!tree.mask[static_cast<std::size_t>(c)]) continue;
    const double r = divu.at(0, c) - fr.at(0, c);
    num += r * r;
    den += fr.at(0, c) * fr.at(0, c);
  }
  rep.residual = std::sqrt(num / den);
  return res;
}

SolveResult unweighted_divp_check(const GridFunction& f, const DomainTree& tree,
                                  const std::vector<LocalShape>& shapes,
                                  double p, double m1_declared,
                                  const SolveOptions& opt) {
  if (!(m1_declared > 0.0))
    fail(errc::invalid_argument, "M1 must be positive");
  const GridFunction omega = tree_weight(tree);
  const double floor_w = 1.0 / m1_declared;
  for (std::int64_t c = 0; c < omega.cells(); ++c) {
    if (!tree.mask[static_cast<std::size_t>(c)]) continue;
    if (omega.at(0, c) >= floor_w * (1.0 - 1e-12)) continue;
    int guilty = -1;
    for (int t = 0; t < tree.size() && guilty < 0; ++t) {
      const auto& bc = tree.b_cells[static_cast<std::size_t>(t)];
      if (std::binary_search(bc.begin(), bc.end(), c)) guilty = t;
    }
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "omega = %.6g < 1/M1 = %.6g on the connector of node %d",
                  omega.at(0, c), floor_w, guilty);
    fail(errc::invalid_weight, buf);
  }
  SolveResult res =
      solve_divergence(f, tree, shapes, unit_weights(tree), p, opt);
  res.report.m1_theoretical = m1_declared;
  res.report.c_theoretical = corollary_divp_constant(
      p, res.report.overlap, m1_declared, res.report.m2_empirical);
  res.report.estimate_pass =
      res.report.c_empirical <= res.report.c_theoretical;
  return res;
}

SolveReport operator_T_weighted_check(const DomainTree& tree,
                                      const GridFunction* hat_w, double p,
                                      int trials, std::uint64_t seed) {
  if (!(p > 1.0)) fail(errc::invalid_argument, "p must exceed 1");
  if (trials < 1) fail(errc::invalid_argument, "need at least one trial");
  if (hat_w) check_weight_field(*hat_w, tree, "hat_w");

  SolveReport rep;
  rep.p = p;
  rep.overlap = tree.overlap_bound;
  bool unit = true;
  if (hat_w)
    for (std::int64_t c = 0; c < hat_w->cells() && unit; ++c)
      if (tree.mask[static_cast<std::size_t>(c)] && hat_w->at(0, c) != 1.0)
        unit = false;
  if (unit) rep.mt_theoretical = hardy_bound_constant(p, tree.overlap_bound);

  for (int k = 0; k < trials; ++k) {
    const GridFunction gf = random_field(
        tree.grid, tree.mask, seed + static_cast<std::uint64_t>(k), false);
    const double gn = weighted_lp_norm(gf, hat_w, p);
    if (!(gn > 0.0)) continue;
    const GridFunction tg = hardy_tree_operator(tree, gf);
    rep.mt_empirical =
        std::max(rep.mt_empirical, weighted_lp_norm(tg, hat_w, p) / gn);
  }
  rep.estimate_pass =
      std::isfinite(rep.mt_empirical) &&
      (rep.mt_theoretical == 0.0 || rep.mt_empirical <= rep.mt_theoretical);
  return rep;
}

}  // namespace divtree
