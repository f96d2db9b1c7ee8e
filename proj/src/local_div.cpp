#include "divtree/local_div.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <thread>
#include <vector>

namespace divtree {

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DIVTREE_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return std::min(n, 64);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(std::min(hw, 16u)) : 1;
}

struct GaussRule {
  std::array<double, 16> node{};
  std::array<double, 16> weight{};
};

// Legendre roots by Newton; the radial integrand is a polynomial of degree
// at most 11 on the chord, so 16 points integrate it exactly.
const GaussRule& gauss16() {
  static const GaussRule rule = [] {
    GaussRule r{};
    constexpr int n = 16;
    for (int k = 0; k < n; ++k) {
      double x = std::cos(M_PI * (static_cast<double>(k) + 0.75) / (n + 0.5));
      double dp = 1.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int j = 2; j <= n; ++j) {
          double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        double step = p1 / dp;
        x -= step;
        if (std::abs(step) < 1e-16) break;
      }
      r.node[k] = x;
      r.weight[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }();
  return rule;
}

double power_int(double r, int e) {
  double out = 1.0;
  for (int i = 0; i < e; ++i) out *= r;
  return out;
}

double vec_p_norm(const double* x, int dim, double p) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += std::pow(std::abs(x[d]), p);
  return std::pow(s, 1.0 / p);
}

}  // namespace

StarCheck verify_star(const StarRegion& star, const Grid& g, int max_segments,
                      std::uint64_t seed) {
  StarCheck out;
  const int dim = g.dim;
  const Vec c0 = star.ball_center;
  const double rho = star.ball_radius;
  if (!(rho > 0.0)) fail(errc::invalid_argument, "ball radius must be positive");

  std::vector<std::int64_t> cells = cells_in_region(g, star.shape);
  if (cells.empty()) fail(errc::empty_domain, "star region resolves to zero cells");

  Box ball_box;
  for (int d = 0; d < dim; ++d) {
    ball_box.lo[d] = c0[d] - rho;
    ball_box.hi[d] = c0[d] + rho;
  }
  out.ball_in_region = true;
  for (std::int64_t c : cells_in_box(g, ball_box)) {
    Vec z = g.center(c);
    double d2 = 0.0;
    for (int d = 0; d < dim; ++d) d2 += (z[d] - c0[d]) * (z[d] - c0[d]);
    if (d2 < rho * rho && !star.shape.contains(z)) out.ball_in_region = false;
  }

  double diam = star.diameter > 0.0 ? star.diameter : star.shape.bounding_box().diameter(dim);
  out.radius_ratio = diam / rho;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  for (int s = 0; s < max_segments; ++s) {
    Vec b{};
    bool found = false;
    for (int attempt = 0; attempt < 200 && !found; ++attempt) {
      double d2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        b[d] = c0[d] + rho * uni(rng);
        d2 += (b[d] - c0[d]) * (b[d] - c0[d]);
      }
      found = d2 < rho * rho;
    }
    if (!found) continue;
    Vec x = g.center(cells[pick(rng)]);
    double len = 0.0;
    for (int d = 0; d < dim; ++d) len += (x[d] - b[d]) * (x[d] - b[d]);
    len = std::sqrt(len);
    int steps = std::max(2, static_cast<int>(std::ceil(2.0 * len / g.h)));
    bool inside = true;
    for (int k = 0; k <= steps && inside; ++k) {
      double t = static_cast<double>(k) / steps;
      Vec z{};
      for (int d = 0; d < dim; ++d) z[d] = b[d] + t * (x[d] - b[d]);
      inside = star.shape.contains(z);
    }
    ++out.checked_segments;
    if (!inside) ++out.failures;
  }
  out.star_ok = out.ball_in_region && out.failures == 0;
  return out;
}

GridFunction bogovskii_solve(const GridFunction& f, const StarRegion& star,
                             const LocalSolveOptions& opt) {
  if (f.components != 1) fail(errc::invalid_argument, "scalar f required");
  const Grid& g = f.grid;
  const int dim = g.dim;
  const double rho = star.ball_radius;
  if (!(rho > 0.0)) fail(errc::invalid_argument, "ball radius must be positive");

  std::vector<std::int64_t> cells;
  for (std::int64_t c = 0; c < f.cells(); ++c)
    if (f.active(c)) cells.push_back(c);
  if (cells.empty()) fail(errc::empty_domain, "f has no active cells");
  if (static_cast<std::int64_t>(cells.size()) > kMaxLocalCells)
    fail(errc::unsupported, "local solve over " + std::to_string(cells.size()) +
                                " cells exceeds the cap; coarsen the subgrid");

  const double vol = g.cell_volume();
  double mass = 0.0, l1 = 0.0;
  for (std::int64_t c : cells) {
    mass += f.at(0, c);
    l1 += std::abs(f.at(0, c));
  }
  mass *= vol;
  l1 *= vol;
  if (opt.enforce_mean && std::abs(mass) > opt.mean_tol * std::max(l1, 1e-300))
    fail(errc::mean_violation, "local datum has mean " + std::to_string(mass));

  const Vec c0 = star.ball_center;
  Box ball_box;
  for (int d = 0; d < dim; ++d) {
    ball_box.lo[d] = c0[d] - rho;
    ball_box.hi[d] = c0[d] + rho;
  }
  double bump_sum = 0.0;
  for (std::int64_t c : cells_in_box(g, ball_box)) {
    Vec z = g.center(c);
    double d2 = 0.0;
    for (int d = 0; d < dim; ++d) d2 += (z[d] - c0[d]) * (z[d] - c0[d]);
    if (d2 >= rho * rho) continue;
    if (!f.active(c))
      fail(errc::containment, "ball cell " + std::to_string(c) + " outside the region");
    double q = 1.0 - d2 / (rho * rho);
    bump_sum += (q * q) * (q * q);
  }
  if (bump_sum == 0.0)
    fail(errc::invalid_argument, "ball contains no cell center; enlarge it or refine");
  const double bump_scale = 1.0 / (bump_sum * vol);

  struct Source {
    Vec y;
    double fv;
    double gamma;  // |c0 - y|^2 - rho^2
  };
  std::vector<Source> sources;
  sources.reserve(cells.size());
  for (std::int64_t c : cells) {
    double fv = f.at(0, c);
    if (fv == 0.0) continue;
    Source s;
    s.y = g.center(c);
    s.fv = fv;
    double n2 = 0.0;
    for (int d = 0; d < dim; ++d) n2 += (c0[d] - s.y[d]) * (c0[d] - s.y[d]);
    s.gamma = n2 - rho * rho;
    sources.push_back(s);
  }

  GridFunction u = make_function(g, dim, f.mask);
  const GaussRule& gl = gauss16();
  const double rho2 = rho * rho;

  // kernel term for one point source: e/t0^(n-1) times the chord integral,
  // accumulated into acc with the given weight
  auto point_term = [&](const Vec& x, const double* to_center, double gamma,
                        double weight, double* acc) {
    double e[kMaxDim];
    double t0sq = 0.0;
    for (int d = 0; d < dim; ++d) {
      e[d] = x[d] - to_center[d];
      t0sq += e[d] * e[d];
    }
    if (t0sq == 0.0) return;  // the singular point contributes zero
    const double t0 = std::sqrt(t0sq);
    double beta = 0.0;
    // to_center is the source position; gamma encodes |c0 - y|^2 - rho^2
    for (int d = 0; d < dim; ++d) beta += e[d] * (c0[d] - to_center[d]);
    beta /= t0;
    const double disc = beta * beta - gamma;
    if (disc <= 0.0) return;
    const double sq = std::sqrt(disc);
    const double b = beta + sq;
    if (b <= t0) return;
    const double a = std::max(t0, beta - sq);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (b + a);
    // along the ray |z - c0|^2 = |y - c0|^2 - 2 r beta + r^2
    double integral = 0.0;
    for (int k = 0; k < 16; ++k) {
      const double r = mid + half * gl.node[k];
      const double q = (r * (2.0 * beta - r) - gamma) / rho2;
      if (q <= 0.0) continue;
      const double q2 = q * q;
      integral += gl.weight[k] * q2 * q2 * power_int(r, dim - 1);
    }
    const double coef = weight * half * bump_scale * integral / (t0 * power_int(t0, dim - 1));
    for (int d = 0; d < dim; ++d) acc[d] += coef * e[d];
  };

  const int sub = std::max(1, opt.near_subdivision);
  std::vector<Vec> offsets;
  if (sub > 1) {
    std::int64_t count = 1;
    for (int d = 0; d < dim; ++d) count *= sub;
    offsets.resize(static_cast<std::size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) {
      std::int64_t rem = k;
      for (int d = dim - 1; d >= 0; --d) {
        offsets[static_cast<std::size_t>(k)][d] =
            ((static_cast<double>(rem % sub) + 0.5) / sub - 0.5) * g.h;
        rem /= sub;
      }
    }
  }
  const double near2 = 9.0 * g.h * g.h;
  const double sub_weight = offsets.empty() ? 1.0 : 1.0 / static_cast<double>(offsets.size());

  auto worker = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t idx = lo; idx < hi; ++idx) {
      const std::int64_t c = cells[idx];
      const Vec x = g.center(c);
      double acc[kMaxDim] = {0.0, 0.0, 0.0, 0.0};
      for (const Source& s : sources) {
        double t0sq = 0.0;
        for (int d = 0; d < dim; ++d) t0sq += (x[d] - s.y[d]) * (x[d] - s.y[d]);
        if (!offsets.empty() && t0sq <= near2) {
          for (const Vec& off : offsets) {
            double yp[kMaxDim];
            double n2 = 0.0;
            for (int d = 0; d < dim; ++d) {
              yp[d] = s.y[d] + off[d];
              const double dd = c0[d] - yp[d];
              n2 += dd * dd;
            }
            point_term(x, yp, n2 - rho2, s.fv * sub_weight, acc);
          }
        } else {
          double yp[kMaxDim];
          for (int d = 0; d < dim; ++d) yp[d] = s.y[d];
          point_term(x, yp, s.gamma, s.fv, acc);
        }
      }
      for (int d = 0; d < dim; ++d) u.at(d, c) = acc[d] * vol;
    }
  };

  const int threads = std::min<int>(resolve_threads(opt.threads),
                                    static_cast<int>(cells.size()));
  if (threads <= 1) {
    worker(0, cells.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cells.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      std::size_t lo = static_cast<std::size_t>(t) * chunk;
      std::size_t hi = std::min(cells.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  return u;
}

GridFunction solve_on_box(const GridFunction& f, const Box& box,
                          const LocalSolveOptions& opt) {
  const Grid& g = f.grid;
  const int dim = g.dim;
  StarRegion star;
  star.shape = Region::box(box, dim);
  star.ball_center = box.center(dim);
  star.ball_radius = 0.5 * box.shortest_side(dim);
  star.diameter = box.diameter(dim);

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(g.cell_count()), 0);
  for (std::int64_t c : cells_in_box(g, box))
    if (f.active(c)) mask[static_cast<std::size_t>(c)] = 1;
  GridFunction fr = make_function(g, 1, std::move(mask));
  for (std::int64_t c = 0; c < fr.cells(); ++c)
    if (fr.active(c)) fr.at(0, c) = f.at(0, c);
  return bogovskii_solve(fr, star, opt);
}

AffineMap identity_map(int dim) {
  AffineMap m;
  m.dim = dim;
  for (int d = 0; d < dim; ++d) m.matrix[static_cast<std::size_t>(d * kMaxDim + d)] = 1.0;
  return m;
}

AffineMap scaling_map(int dim, double s, const Vec& offset) {
  AffineMap m = identity_map(dim);
  for (int d = 0; d < dim; ++d) m.matrix[static_cast<std::size_t>(d * kMaxDim + d)] = s;
  m.offset = offset;
  return m;
}

Vec map_point(const AffineMap& m, const Vec& x) {
  Vec out{};
  for (int i = 0; i < m.dim; ++i) {
    double s = m.offset[i];
    for (int j = 0; j < m.dim; ++j)
      s += m.matrix[static_cast<std::size_t>(i * kMaxDim + j)] * x[j];
    out[i] = s;
  }
  return out;
}

namespace {

// LU with partial pivoting on a dim x dim copy; returns the determinant and
// optionally the inverse columns by back substitution.
double lu_invert(const AffineMap& m, AffineMap* inv) {
  const int n = m.dim;
  double a[kMaxDim][kMaxDim];
  int perm[kMaxDim];
  for (int i = 0; i < n; ++i) {
    perm[i] = i;
    for (int j = 0; j < n; ++j) a[i][j] = m.matrix[static_cast<std::size_t>(i * kMaxDim + j)];
  }
  double det_sign = 1.0;
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a[i][j]));
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
    if (piv != k) {
      std::swap(perm[piv], perm[k]);
      for (int j = 0; j < n; ++j) std::swap(a[piv][j], a[k][j]);
      det_sign = -det_sign;
    }
    if (std::abs(a[k][k]) <= 1e-14 * std::max(scale, 1e-300)) return 0.0;
    for (int i = k + 1; i < n; ++i) {
      a[i][k] /= a[k][k];
      for (int j = k + 1; j < n; ++j) a[i][j] -= a[i][k] * a[k][j];
    }
  }
  double det_val = det_sign;
  for (int k = 0; k < n; ++k) det_val *= a[k][k];
  if (!inv) return det_val;

  inv->dim = n;
  inv->matrix.fill(0.0);
  for (int col = 0; col < n; ++col) {
    double x[kMaxDim] = {};
    for (int i = 0; i < n; ++i) {
      double s = perm[i] == col ? 1.0 : 0.0;
      for (int j = 0; j < i; ++j) s -= a[i][j] * x[j];
      x[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = x[i];
      for (int j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
      x[i] = s / a[i][i];
    }
    for (int i = 0; i < n; ++i) inv->matrix[static_cast<std::size_t>(i * kMaxDim + col)] = x[i];
  }
  return det_val;
}

}  // namespace

double det(const AffineMap& m) { return lu_invert(m, nullptr); }

AffineMap inverse(const AffineMap& m) {
  AffineMap inv;
  double d = lu_invert(m, &inv);
  if (d == 0.0) fail(errc::invalid_map, "singular affine map");
  // F^{-1}(x) = B^{-1} x - B^{-1} b
  Vec shift{};
  for (int i = 0; i < m.dim; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.dim; ++j)
      s += inv.matrix[static_cast<std::size_t>(i * kMaxDim + j)] * m.offset[j];
    shift[i] = -s;
  }
  inv.offset = shift;
  return inv;
}

AffineMap transpose(const AffineMap& m) {
  AffineMap t;
  t.dim = m.dim;
  for (int i = 0; i < m.dim; ++i)
    for (int j = 0; j < m.dim; ++j)
      t.matrix[static_cast<std::size_t>(i * kMaxDim + j)] =
          m.matrix[static_cast<std::size_t>(j * kMaxDim + i)];
  return t;
}

double matrix_p_norm(const AffineMap& m, double p) {
  const int n = m.dim;
  if (n == 0) fail(errc::invalid_argument, "map has no dimension");
  auto entry = [&](int i, int j) { return m.matrix[static_cast<std::size_t>(i * kMaxDim + j)]; };

  if (p == 1.0) {
    double best = 0.0;
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += std::abs(entry(i, j));
      best = std::max(best, s);
    }
    return best;
  }
  if (std::isinf(p)) {
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += std::abs(entry(i, j));
      best = std::max(best, s);
    }
    return best;
  }
  if (p == 2.0) {
    // power iteration on B^T B; the largest singular value
    double s[kMaxDim][kMaxDim] = {};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) s[i][j] += entry(k, i) * entry(k, j);
    double v[kMaxDim];
    for (int i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * i;
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
      double w[kMaxDim] = {};
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) w[i] += s[i][j] * v[j];
      double norm = 0.0;
      for (int i = 0; i < n; ++i) norm += w[i] * w[i];
      norm = std::sqrt(norm);
      if (norm == 0.0) return 0.0;
      for (int i = 0; i < n; ++i) v[i] = w[i] / norm;
      if (std::abs(norm - lambda) <= 1e-15 * norm && it > 3) {
        lambda = norm;
        break;
      }
      lambda = norm;
    }
    return std::sqrt(lambda);
  }
  if (!(p > 1.0)) fail(errc::invalid_argument, "matrix norm needs p > 1 or inf");

  // general p: deterministic directional scan plus pattern refinement
  auto ratio = [&](const double* x) {
    double bx[kMaxDim] = {};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) bx[i] += entry(i, j) * x[j];
    double denom = vec_p_norm(x, n, p);
    return denom > 0.0 ? vec_p_norm(bx, n, p) / denom : 0.0;
  };
  double best_x[kMaxDim] = {};
  double best = 0.0;
  auto consider = [&](const double* x) {
    double r = ratio(x);
    if (r > best) {
      best = r;
      for (int i = 0; i < n; ++i) best_x[i] = x[i];
    }
  };
  for (int j = 0; j < n; ++j) {
    double x[kMaxDim] = {};
    x[j] = 1.0;
    consider(x);
  }
  std::uint64_t state = 0x9e3779b97f4a7c15ull;
  for (int s = 0; s < 4096; ++s) {
    double x[kMaxDim];
    for (int i = 0; i < n; ++i) {
      state = state * 6364136223846793005ull + 1442695040888963407ull;
      x[i] = static_cast<double>(state >> 11) / 9007199254740992.0 * 2.0 - 1.0;
    }
    consider(x);
  }
  double step = 0.25;
  for (int round = 0; round < 60; ++round) {
    bool moved = false;
    for (int i = 0; i < n; ++i)
      for (double sign : {1.0, -1.0}) {
        double x[kMaxDim];
        for (int j = 0; j < n; ++j) x[j] = best_x[j];
        x[i] += sign * step;
        double r = ratio(x);
        if (r > best) {
          best = r;
          for (int j = 0; j < n; ++j) best_x[j] = x[j];
          moved = true;
        }
      }
    if (!moved) step *= 0.5;
    if (step < 1e-12) break;
  }
  return best;
}

GridFunction affine_transfer(const GridFunction& v_hat, const AffineMap& map,
                             const Grid& target) {
  const int n = map.dim;
  if (v_hat.grid.dim != n || target.dim != n)
    fail(errc::invalid_argument, "map and grids disagree on dimension");
  if (v_hat.components != n)
    fail(errc::invalid_argument, "vector field with dim components required");
  AffineMap inv = inverse(map);
  const Grid& src = v_hat.grid;

  GridFunction out = make_function(
      target, n, std::vector<std::uint8_t>(static_cast<std::size_t>(target.cell_count()), 0));
  for (std::int64_t c = 0; c < target.cell_count(); ++c) {
    Vec xh = map_point(inv, target.center(c));
    IVec idx{};
    bool ok = true;
    for (int d = 0; d < n && ok; ++d) {
      double f = (xh[d] - src.origin[d]) / src.h - 0.5;
      std::int64_t i = static_cast<std::int64_t>(std::llround(f));
      if (i < 0 || i >= src.shape[d]) ok = false;
      idx[d] = i;
    }
    if (!ok) continue;
    std::int64_t s = src.flatten(idx);
    if (!v_hat.active(s)) continue;
    out.mask[static_cast<std::size_t>(c)] = 1;
    for (int i = 0; i < n; ++i) {
      double val = 0.0;
      for (int j = 0; j < n; ++j)
        val += map.matrix[static_cast<std::size_t>(i * kMaxDim + j)] * v_hat.at(j, s);
      out.at(i, c) = val;
    }
  }
  return out;
}

}  // namespace divtree
