#include "divtree/whitney.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>

namespace divtree {

namespace {

// Midpoints of lattice edges where membership flips, on a lattice of the
// given spacing extended one step beyond the bounding box. Every point sits
// within step/2 of the true boundary.
std::vector<Vec> boundary_cloud(const Region& domain, double step) {
  const int dim = domain.dim();
  const Box& bb = domain.bounding_box();
  IVec counts{};
  Vec lo{};
  for (int d = 0; d < dim; ++d) {
    lo[d] = bb.lo[d] - step;
    counts[d] = static_cast<std::int64_t>(std::floor((bb.hi[d] + step - lo[d]) / step)) + 2;
  }
  std::vector<Vec> cloud;
  IVec it{};
  while (true) {
    Vec p{};
    for (int d = 0; d < dim; ++d) p[d] = lo[d] + static_cast<double>(it[d]) * step;
    bool m0 = domain.contains(p);
    for (int d = 0; d < dim; ++d) {
      if (it[d] + 1 >= counts[d]) continue;
      Vec q = p;
      q[d] += step;
      if (domain.contains(q) != m0) {
        Vec mid = p;
        mid[d] += step / 2;
        cloud.push_back(mid);
      }
    }
    int d = dim - 1;
    while (d >= 0 && ++it[d] == counts[d]) it[d--] = 0;
    if (d < 0) break;
  }
  return cloud;
}

double cloud_distance(const Box& b, const std::vector<Vec>& cloud, int dim) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& p : cloud) best = std::min(best, b.distance_to(p, dim));
  return best;
}

struct Selector {
  const Grid& grid;
  const std::vector<std::uint8_t>& domain_mask;
  const std::vector<Vec>& cloud;
  Vec origin;
  double base;
  int max_level;
  int dim;
  std::vector<WhitneyCube> out;

  Box cube_box(int level, const IVec& idx) const {
    double side = std::ldexp(base, -level);
    Box b;
    for (int d = 0; d < dim; ++d) {
      b.lo[d] = origin[d] + static_cast<double>(idx[d]) * side;
      b.hi[d] = b.lo[d] + side;
    }
    return b;
  }

  void visit(int level, const IVec& idx) {
    Box b = cube_box(level, idx);
    auto cells = cells_in_box(grid, b);
    bool any = false;
    bool all = !cells.empty();
    for (std::int64_t c : cells) {
      if (domain_mask[static_cast<std::size_t>(c)])
        any = true;
      else
        all = false;
    }
    if (!any) return;
    if (all) {
      double dist = cloud_distance(b, cloud, dim);
      if (b.diameter(dim) <= dist) {
        WhitneyCube q;
        q.idx = idx;
        q.level = level;
        q.box = b;
        q.side = std::ldexp(base, -level);
        q.boundary_distance = dist;
        out.push_back(q);
        return;
      }
    }
    if (level == max_level) return;  // dropped; counted afterwards
    for (int bit = 0; bit < (1 << dim); ++bit) {
      IVec child{};
      for (int d = 0; d < dim; ++d) child[d] = 2 * idx[d] + ((bit >> d) & 1);
      visit(level + 1, child);
    }
  }
};

// Integer corner at scale 2^max_level; the cube spans unit = 2^(max_level - level).
struct IntCube {
  IVec lo{};
  std::int64_t unit = 0;
};

IntCube int_cube(const WhitneyCube& q, int max_level, int dim) {
  IntCube c;
  c.unit = std::int64_t{1} << (max_level - q.level);
  for (int d = 0; d < dim; ++d) c.lo[d] = q.idx[d] * c.unit;
  return c;
}

bool closed_touch(const IntCube& a, const IntCube& b, int dim) {
  for (int d = 0; d < dim; ++d)
    if (a.lo[d] > b.lo[d] + b.unit || b.lo[d] > a.lo[d] + a.unit) return false;
  return true;
}

bool open_overlap(const IntCube& a, const IntCube& b, int dim) {
  for (int d = 0; d < dim; ++d)
    if (a.lo[d] + a.unit <= b.lo[d] || b.lo[d] + b.unit <= a.lo[d]) return false;
  return true;
}

// Shared face: touching along exactly one axis, positive overlap elsewhere.
// Dyadic intervals nest, so the overlap is the smaller cube's whole face.
int shared_face_axis(const IntCube& a, const IntCube& b, int dim) {
  int axis = -1;
  for (int d = 0; d < dim; ++d) {
    bool touch = a.lo[d] + a.unit == b.lo[d] || b.lo[d] + b.unit == a.lo[d];
    bool positive = a.lo[d] + a.unit > b.lo[d] && b.lo[d] + b.unit > a.lo[d];
    if (touch) {
      if (axis >= 0) return -1;  // corner or edge contact only
      axis = d;
    } else if (!positive) {
      return -1;
    }
  }
  return axis;
}

}  // namespace

WhitneyCover build_whitney(const Region& domain, const Grid& grid,
                           const WhitneyOptions& opt) {
  const int dim = grid.dim;
  if (domain.dim() != dim) fail(errc::invalid_argument, "domain and grid dimension differ");
  if (opt.max_level < 0 || opt.max_level > 40)
    fail(errc::invalid_argument, "max_level out of range");

  WhitneyCover cover;
  cover.dim = dim;
  cover.max_level = opt.max_level;
  cover.boundary_step = opt.boundary_step > 0 ? opt.boundary_step : grid.h / 2;

  const Box& bb = domain.bounding_box();
  cover.origin = bb.lo;
  cover.base_side = 0;
  for (int d = 0; d < dim; ++d)
    cover.base_side = std::max(cover.base_side, bb.hi[d] - bb.lo[d]);
  if (cover.base_side <= 0) fail(errc::empty_domain, "domain bounding box is degenerate");

  auto domain_mask = mask_from_region(grid, domain);
  if (mask_count(domain_mask) == 0) fail(errc::empty_domain, "no grid cell lies in the domain");
  auto cloud = boundary_cloud(domain, cover.boundary_step);
  if (cloud.empty()) fail(errc::empty_domain, "boundary sampling found no membership flips");

  Selector sel{grid, domain_mask, cloud, cover.origin, cover.base_side,
               opt.max_level, dim, {}};
  sel.visit(0, IVec{});
  cover.cubes = std::move(sel.out);
  if (cover.cubes.empty())
    fail(errc::empty_domain,
         "no dyadic cube fits the domain; raise max_level or refine the grid");

  std::sort(cover.cubes.begin(), cover.cubes.end(),
            [](const WhitneyCube& a, const WhitneyCube& b) {
              if (a.level != b.level) return a.level < b.level;
              return a.idx < b.idx;
            });

  const int m = static_cast<int>(cover.cubes.size());
  std::vector<IntCube> ic(m);
  for (int i = 0; i < m; ++i) ic[i] = int_cube(cover.cubes[i], opt.max_level, dim);

  cover.touching.assign(m, {});
  std::vector<std::vector<int>> faces(m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      if (!closed_touch(ic[i], ic[j], dim)) continue;
      cover.touching[i].push_back(j);
      cover.touching[j].push_back(i);
      if (shared_face_axis(ic[i], ic[j], dim) >= 0) {
        faces[i].push_back(j);
        faces[j].push_back(i);
      }
    }

  // Root: a largest cube, nearest the domain barycenter.
  Vec bary{};
  std::int64_t inside = 0;
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    if (!domain_mask[static_cast<std::size_t>(c)]) continue;
    Vec x = grid.center(c);
    for (int d = 0; d < dim; ++d) bary[d] += x[d];
    ++inside;
  }
  for (int d = 0; d < dim; ++d) bary[d] /= static_cast<double>(inside);
  int root = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    if (cover.cubes[i].level != cover.cubes[0].level) break;  // sorted by level
    Vec c = cover.cubes[i].box.center(dim);
    double d2 = 0;
    for (int d = 0; d < dim; ++d) d2 += (c[d] - bary[d]) * (c[d] - bary[d]);
    if (d2 < best) {
      best = d2;
      root = i;
    }
  }
  cover.root = root;

  // Breadth-first chains over shared faces; every chain is a shortest path
  // and shares each prefix with its parent's chain.
  std::vector<int> parent(m, -2);
  parent[root] = -1;
  std::deque<int> queue{root};
  int reached = 0;
  while (!queue.empty()) {
    int t = queue.front();
    queue.pop_front();
    ++reached;
    for (int s : faces[t])
      if (parent[s] == -2) {
        parent[s] = t;
        queue.push_back(s);
      }
  }
  if (reached != m)
    fail(errc::disconnected, "face graph does not reach every cube (" +
                                 std::to_string(m - reached) + " unreached)");
  for (int i = 0; i < m; ++i) {
    cover.cubes[i].parent = parent[i];
    if (parent[i] < 0) continue;
    const IntCube& a = ic[i];
    const IntCube& b = ic[parent[i]];
    int axis = shared_face_axis(a, b, dim);
    cover.cubes[i].shared_axis = axis;
    std::int64_t plane =
        a.lo[axis] + a.unit == b.lo[axis] ? b.lo[axis] : a.lo[axis];
    cover.cubes[i].shared_plane =
        cover.origin[axis] +
        std::ldexp(cover.base_side * static_cast<double>(plane), -opt.max_level);
  }

  std::int64_t owned = 0;
  {
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(grid.cell_count()), 0);
    for (const WhitneyCube& q : cover.cubes)
      for (std::int64_t c : cells_in_box(grid, q.box))
        if (domain_mask[static_cast<std::size_t>(c)] && !seen[static_cast<std::size_t>(c)]) {
          seen[static_cast<std::size_t>(c)] = 1;
          ++owned;
        }
  }
  cover.dropped_cells = inside - owned;
  return cover;
}

DomainTree whitney_tree(const WhitneyCover& cover, const Grid& grid,
                        const WhitneyOptions& opt) {
  const int dim = grid.dim;
  const double eps = opt.eps_tree;
  if (!(eps > 0 && eps < 0.25))
    fail(errc::invalid_argument, "eps_tree must lie in (0, 1/4)");
  const int m = static_cast<int>(cover.cubes.size());

  DomainTree tree;
  tree.grid = grid;
  tree.overlap_bound = std::pow(12.0, dim);
  tree.tail_node = -1;
  tree.nodes.resize(m);
  tree.omega_cells.resize(m);
  tree.b_cells.resize(m);

  std::vector<Box> expanded(m);
  for (int i = 0; i < m; ++i) {
    const WhitneyCube& q = cover.cubes[i];
    double ext = eps * q.side / 2;
    Box e = q.box;
    for (int d = 0; d < dim; ++d) {
      e.lo[d] -= ext;
      e.hi[d] += ext;
    }
    expanded[i] = e;
    tree.nodes[i].parent = q.parent;
    tree.nodes[i].omega = Region::box(e, dim);
    tree.omega_cells[i] = cells_in_box(grid, e);
  }

  std::vector<std::uint8_t> claimed(static_cast<std::size_t>(grid.cell_count()), 0);
  for (int i = 0; i < m; ++i) {
    const WhitneyCube& q = cover.cubes[i];
    if (q.parent < 0) continue;
    const WhitneyCube& p = cover.cubes[q.parent];
    double lmin = std::min(q.side, p.side);
    if (grid.h >= eps * lmin)
      fail(errc::degenerate_connector,
           "grid step " + std::to_string(grid.h) + " too coarse for a connector at side " +
               std::to_string(lmin) + "; refine the grid so h < " +
               std::to_string(eps * lmin));

    int axis = q.shared_axis;
    Box band;
    for (int d = 0; d < dim; ++d) {
      if (d == axis) {
        band.lo[d] = q.shared_plane - grid.h;
        band.hi[d] = q.shared_plane + grid.h;
      } else {
        band.lo[d] = std::max(q.box.lo[d], p.box.lo[d]) + 1.5 * grid.h;
        band.hi[d] = std::min(q.box.hi[d], p.box.hi[d]) - 1.5 * grid.h;
      }
    }
    tree.nodes[i].connector = Region::box(band, dim);
    const std::vector<std::int64_t> cand = cells_in_box(grid, band);
    auto usable = [&](std::int64_t c) {
      if (claimed[static_cast<std::size_t>(c)]) return false;
      Vec x = grid.center(c);
      return expanded[i].contains(x, dim) && expanded[q.parent].contains(x, dim);
    };
    // Claim cells in 2x2 (2^dim) blocks. Interior divergence stencils are all
    // centered, so they decouple the even/odd index sublattices; a connector
    // spike is reachable by a field on the node only when it loads each
    // sublattice equally, which any full block does regardless of alignment.
    if (!cand.empty()) {
      const IVec first = grid.unflatten(cand.front());
      const IVec last = grid.unflatten(cand.back());
      IVec bs = first;
      for (;;) {
        std::int64_t block[1 << kMaxDim];
        bool full = true;
        for (int k = 0; k < (1 << dim) && full; ++k) {
          IVec mi = bs;
          for (int d = 0; d < dim; ++d) mi[d] += (k >> d) & 1;
          for (int d = 0; d < dim; ++d)
            if (mi[d] > last[d]) full = false;
          if (!full) break;
          block[k] = grid.flatten(mi);
          full = usable(block[k]);
        }
        if (full)
          for (int k = 0; k < (1 << dim); ++k) {
            claimed[static_cast<std::size_t>(block[k])] = 1;
            tree.b_cells[i].push_back(block[k]);
          }
        int d = dim - 1;
        while (d >= 0) {
          bs[d] += 2;
          if (bs[d] <= last[d]) break;
          bs[d] = first[d];
          --d;
        }
        if (d < 0) break;
      }
    }
    // A band one cell wide in some direction fits no block; take what it has.
    if (tree.b_cells[i].empty())
      for (std::int64_t c : cand) {
        if (!usable(c)) continue;
        claimed[static_cast<std::size_t>(c)] = 1;
        tree.b_cells[i].push_back(c);
      }
    if (tree.b_cells[i].empty())
      fail(errc::degenerate_connector, "connector band of cube " + std::to_string(i) +
                                           " claimed no cells; refine the grid");
    std::sort(tree.b_cells[i].begin(), tree.b_cells[i].end());
  }

  finalize_tree(tree);
  return tree;
}

GridFunction shadow_weight(const WhitneyCover& cover, const DomainTree& tree) {
  const Grid& grid = tree.grid;
  const int dim = grid.dim;
  const int m = static_cast<int>(cover.cubes.size());
  if (tree.size() != m) fail(errc::invalid_argument, "tree and cover sizes differ");

  std::vector<double> ratio(m), v(m);
  for (int i = 0; i < m; ++i)
    ratio[i] = std::pow(cover.cubes[i].side, dim) / tree.w_measure[i];
  for (int i = 0; i < m; ++i) {
    v[i] = ratio[i];
    for (int j : cover.touching[i]) v[i] = std::min(v[i], ratio[j]);
  }

  GridFunction w = make_function(grid, 1, tree.mask);
  const double unset = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> owned(static_cast<std::size_t>(grid.cell_count()), 0);
  for (std::int64_t c = 0; c < grid.cell_count(); ++c)
    if (w.active(c)) w.at(0, c) = unset;
  // Cube interiors first: half-open boxes give each cell one owner.
  for (int i = 0; i < m; ++i)
    for (std::int64_t c : cells_in_box(grid, cover.cubes[i].box))
      if (w.active(c)) {
        w.at(0, c) = v[i];
        owned[static_cast<std::size_t>(c)] = 1;
      }
  // Cells seen only by expansions take the smallest value among them.
  for (int i = 0; i < m; ++i)
    for (std::int64_t c : tree.omega_cells[i])
      if (!owned[static_cast<std::size_t>(c)])
        w.at(0, c) = std::min(w.at(0, c), v[i]);
  for (std::int64_t c = 0; c < grid.cell_count(); ++c)
    if (w.active(c) && w.at(0, c) == unset)
      fail(errc::cover_gap, "masked cell " + std::to_string(c) + " lies in no cube");
  return w;
}

M1Check verify_m1(const WhitneyCover& cover, const DomainTree& tree) {
  GridFunction sw = shadow_weight(cover, tree);
  GridFunction tw = tree_weight(tree);
  M1Check out;
  out.ceiling = std::ldexp(1.0, 11 * tree.grid.dim);
  for (int t = 0; t < tree.size(); ++t) {
    double sup_sw = 0;
    double inf_tw = std::numeric_limits<double>::infinity();
    for (std::int64_t c : tree.omega_cells[t]) {
      sup_sw = std::max(sup_sw, sw.at(0, c));
      inf_tw = std::min(inf_tw, tw.at(0, c));
    }
    out.observed = std::max(out.observed, sup_sw / inf_tw);
  }
  out.pass = out.observed <= out.ceiling;
  return out;
}

WhitneyGeometryReport verify_whitney_geometry(const WhitneyCover& cover,
                                              const Grid& grid, const Region& domain) {
  const int dim = grid.dim;
  const int m = static_cast<int>(cover.cubes.size());
  WhitneyGeometryReport rep;
  rep.tolerance = cover.boundary_step;
  rep.worst_lower = std::numeric_limits<double>::infinity();
  rep.worst_upper = 0;

  bool ratio_ok = true;
  for (const WhitneyCube& q : cover.cubes) {
    double diam = q.box.diameter(dim);
    double r = q.boundary_distance / diam;
    rep.worst_lower = std::min(rep.worst_lower, r);
    rep.worst_upper = std::max(rep.worst_upper, r);
    if (q.boundary_distance + rep.tolerance < diam) ratio_ok = false;
    if (q.boundary_distance > 4 * diam + rep.tolerance) ratio_ok = false;
  }

  std::vector<IntCube> ic(m);
  for (int i = 0; i < m; ++i) ic[i] = int_cube(cover.cubes[i], cover.max_level, dim);

  rep.worst_side_ratio = 1;
  for (int i = 0; i < m; ++i)
    for (int j : cover.touching[i]) {
      std::int64_t hi = std::max(ic[i].unit, ic[j].unit);
      std::int64_t lo = std::min(ic[i].unit, ic[j].unit);
      rep.worst_side_ratio = std::max<int>(rep.worst_side_ratio,
                                           static_cast<int>(hi / lo));
    }

  rep.interiors_disjoint = true;
  for (int i = 0; i < m && rep.interiors_disjoint; ++i)
    for (int j = i + 1; j < m; ++j)
      if (open_overlap(ic[i], ic[j], dim)) {
        rep.interiors_disjoint = false;
        break;
      }

  auto domain_mask = mask_from_region(grid, domain);
  std::vector<std::uint8_t> owners(static_cast<std::size_t>(grid.cell_count()), 0);
  for (const WhitneyCube& q : cover.cubes)
    for (std::int64_t c : cells_in_box(grid, q.box))
      ++owners[static_cast<std::size_t>(c)];
  std::int64_t uncovered = 0;
  rep.partition_ok = true;
  for (std::int64_t c = 0; c < grid.cell_count(); ++c) {
    if (!domain_mask[static_cast<std::size_t>(c)]) continue;
    if (owners[static_cast<std::size_t>(c)] == 0)
      ++uncovered;
    else if (owners[static_cast<std::size_t>(c)] > 1)
      rep.partition_ok = false;
  }
  if (uncovered != cover.dropped_cells) rep.partition_ok = false;

  rep.pass = ratio_ok && rep.worst_side_ratio <= 4 && rep.interiors_disjoint &&
             rep.partition_ok;
  return rep;
}

ConnectorGeometry verify_connector_geometry(const WhitneyCover& cover) {
  // Everything runs in ticks of base_side * 2^-(max_level + 10): cube corners,
  // the 2^-7 expansions (4 ticks at the finest level), and the connector
  // half-sides (1 tick at the finest level) are all integers. The scalar
  // margin side/8 - 8 eps side - eps side/8 comes out as 128 - 64 - 1 ticks
  // of side/2^10, so the geometry below has 63 ticks of slack by design.
  const int n = static_cast<int>(cover.cubes.size());
  ConnectorGeometry out;
  out.disjoint = true;
  out.meets_only_pair = true;
  out.margin_inequality = (std::int64_t{1} << 7) - (std::int64_t{1} << 6) - 1 > 0;

  if (n == 0) return out;
  const int dims = cover.dim;
  const int shift = cover.max_level + 10;
  std::vector<IVec> lo(n);
  std::vector<std::int64_t> unit(n);
  for (int i = 0; i < n; ++i) {
    unit[i] = std::int64_t{1} << (shift - cover.cubes[i].level);
    for (int d = 0; d < dims; ++d) lo[i][d] = cover.cubes[i].idx[d] * unit[i];
  }

  struct IBox {
    IVec lo{}, hi{};
  };
  auto open_meet = [&](const IBox& a, const IBox& b) {
    for (int d = 0; d < dims; ++d)
      if (a.hi[d] <= b.lo[d] || b.hi[d] <= a.lo[d]) return false;
    return true;
  };

  std::vector<IBox> bball(n);
  std::vector<char> has_b(n, 0);
  for (int i = 0; i < n; ++i) {
    int p = cover.cubes[i].parent;
    if (p < 0) continue;
    int axis = cover.cubes[i].shared_axis;
    std::int64_t plane = lo[i][axis] + unit[i] == lo[p][axis] ? lo[p][axis] : lo[i][axis];
    IVec c{};
    c[axis] = plane;
    std::int64_t olen = std::numeric_limits<std::int64_t>::max();
    for (int d = 0; d < dims; ++d) {
      if (d == axis) continue;
      std::int64_t a = std::max(lo[i][d], lo[p][d]);
      std::int64_t b = std::min(lo[i][d] + unit[i], lo[p][d] + unit[p]);
      olen = std::min(olen, b - a);
      c[d] = (a + b) / 2;  // corners are multiples of 2^10, so this is exact
    }
    if (dims > 1 && olen * 4 < unit[i]) {
      out.margin_inequality = false;
      out.detail = "face of cube " + std::to_string(i) + " shorter than a quarter side";
    }
    std::int64_t half = unit[i] >> 10;  // (2^-7 / 8) side
    IBox bb;
    for (int d = 0; d < dims; ++d) {
      bb.lo[d] = c[d] - half;
      bb.hi[d] = c[d] + half;
    }
    bball[i] = bb;
    has_b[i] = 1;

    // Chebyshev distance from the face center to every other cube must be at
    // least an eighth of the side.
    for (int s = 0; s < n; ++s) {
      if (s == i || s == p) continue;
      std::int64_t cheb = 0;
      for (int d = 0; d < dims; ++d) {
        std::int64_t gap = std::max<std::int64_t>(
            {lo[s][d] - c[d], c[d] - (lo[s][d] + unit[s]), 0});
        cheb = std::max(cheb, gap);
      }
      if (cheb * 8 < unit[i]) {
        out.margin_inequality = false;
        out.detail = "face center of cube " + std::to_string(i) +
                     " closer than side/8 to cube " + std::to_string(s);
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    if (!has_b[i]) continue;
    for (int j = i + 1; j < n; ++j) {
      if (!has_b[j]) continue;
      if (open_meet(bball[i], bball[j])) {
        out.disjoint = false;
        out.detail = "connectors of cubes " + std::to_string(i) + " and " +
                     std::to_string(j) + " overlap";
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    if (!has_b[i]) continue;
    int p = cover.cubes[i].parent;
    for (int s = 0; s < n; ++s) {
      ++out.pairs_checked;
      IBox star;
      std::int64_t ext = unit[s] >> 8;  // 2^-7 side / 2
      for (int d = 0; d < dims; ++d) {
        star.lo[d] = lo[s][d] - ext;
        star.hi[d] = lo[s][d] + unit[s] + ext;
      }
      bool meets = open_meet(bball[i], star);
      if (meets && s != i && s != p) {
        out.meets_only_pair = false;
        out.detail = "connector of cube " + std::to_string(i) +
                     " meets expanded cube " + std::to_string(s);
      }
      if (!meets && (s == i || s == p)) {
        out.meets_only_pair = false;
        out.detail = "connector of cube " + std::to_string(i) +
                     " misses its own expanded cube " + std::to_string(s);
      }
    }
  }
  return out;
}

void save_cubes_csv(const WhitneyCover& cover, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot open " + path);
  const int dims = cover.dim;
  out << "id,level,parent,shared_axis,boundary_distance";
  for (int d = 0; d < dims; ++d) out << ",idx" << d;
  for (int d = 0; d < dims; ++d) out << ",lo" << d;
  for (int d = 0; d < dims; ++d) out << ",hi" << d;
  out << "\n";
  char buf[32];
  for (int i = 0; i < static_cast<int>(cover.cubes.size()); ++i) {
    const WhitneyCube& q = cover.cubes[i];
    out << i << ',' << q.level << ',' << q.parent << ',' << q.shared_axis;
    std::snprintf(buf, sizeof buf, "%.17g", q.boundary_distance);
    out << ',' << buf;
    for (int d = 0; d < dims; ++d) out << ',' << q.idx[d];
    for (int d = 0; d < dims; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", q.box.lo[d]);
      out << ',' << buf;
    }
    for (int d = 0; d < dims; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", q.box.hi[d]);
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace divtree
