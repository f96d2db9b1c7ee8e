#include "divtree/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace divtree {

Vec vec(std::initializer_list<double> xs) {
  Vec v{};
  int i = 0;
  for (double x : xs) {
    if (i >= kMaxDim) fail(errc::invalid_argument, "vec: too many entries");
    v[i++] = x;
  }
  return v;
}

bool Box::contains(const Vec& x, int dim) const {
  for (int d = 0; d < dim; ++d)
    if (x[d] < lo[d] || x[d] >= hi[d]) return false;
  return true;
}

bool Box::contains_closed(const Vec& x, int dim) const {
  for (int d = 0; d < dim; ++d)
    if (x[d] < lo[d] || x[d] > hi[d]) return false;
  return true;
}

bool Box::intersects_open(const Box& b, int dim) const {
  for (int d = 0; d < dim; ++d)
    if (hi[d] <= b.lo[d] || b.hi[d] <= lo[d]) return false;
  return true;
}

bool Box::contains_box(const Box& inner, int dim) const {
  for (int d = 0; d < dim; ++d)
    if (inner.lo[d] < lo[d] || inner.hi[d] > hi[d]) return false;
  return true;
}

double Box::volume(int dim) const {
  double v = 1.0;
  for (int d = 0; d < dim; ++d) v *= hi[d] - lo[d];
  return v;
}

double Box::diameter(int dim) const {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += (hi[d] - lo[d]) * (hi[d] - lo[d]);
  return std::sqrt(s);
}

double Box::shortest_side(int dim) const {
  double s = hi[0] - lo[0];
  for (int d = 1; d < dim; ++d) s = std::min(s, hi[d] - lo[d]);
  return s;
}

Vec Box::center(int dim) const {
  Vec c{};
  for (int d = 0; d < dim; ++d) c[d] = 0.5 * (lo[d] + hi[d]);
  return c;
}

Box Box::hull(const Box& b, int dim) const {
  Box out = *this;
  for (int d = 0; d < dim; ++d) {
    out.lo[d] = std::min(lo[d], b.lo[d]);
    out.hi[d] = std::max(hi[d], b.hi[d]);
  }
  return out;
}

double Box::distance_to(const Vec& x, int dim) const {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    double gap = std::max({lo[d] - x[d], x[d] - hi[d], 0.0});
    s += gap * gap;
  }
  return std::sqrt(s);
}

Box make_box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  if (lo.size() != hi.size()) fail(errc::invalid_argument, "box: lo/hi size mismatch");
  Box b{vec(lo), vec(hi)};
  auto l = b.lo.begin();
  for (auto h : b.hi)
    if (h < *l++) fail(errc::invalid_argument, "box: hi < lo");
  return b;
}

Region Region::box(const Box& b, int dim) {
  Region r;
  r.kind_ = Kind::kBox;
  r.dim_ = dim;
  r.boxes_ = {b};
  r.bbox_ = b;
  return r;
}

Region Region::box_union(std::vector<Box> boxes, int dim) {
  if (boxes.empty()) fail(errc::empty_domain, "box_union: no boxes");
  Region r;
  r.kind_ = Kind::kBoxUnion;
  r.dim_ = dim;
  r.bbox_ = boxes[0];
  for (const Box& b : boxes) r.bbox_ = r.bbox_.hull(b, dim);
  r.boxes_ = std::move(boxes);
  return r;
}

Region Region::predicate(std::function<bool(const Vec&)> fn, const Box& bbox, int dim) {
  Region r;
  r.kind_ = Kind::kPredicate;
  r.dim_ = dim;
  r.fn_ = std::move(fn);
  r.bbox_ = bbox;
  return r;
}

bool Region::contains(const Vec& x) const {
  switch (kind_) {
    case Kind::kEmpty: return false;
    case Kind::kBox: return boxes_[0].contains(x, dim_);
    case Kind::kBoxUnion:
      for (const Box& b : boxes_)
        if (b.contains(x, dim_)) return true;
      return false;
    case Kind::kPredicate:
      return bbox_.contains_closed(x, dim_) && fn_(x);
  }
  return false;
}

const Box& Region::bounding_box() const { return bbox_; }

const std::vector<Box>& Region::boxes() const {
  if (kind_ != Kind::kBox && kind_ != Kind::kBoxUnion)
    fail(errc::unsupported, "region has no box list");
  return boxes_;
}

std::int64_t Grid::cell_count() const {
  std::int64_t n = 1;
  for (int d = 0; d < dim; ++d) n *= shape[d];
  return n;
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (int d = 0; d < dim; ++d) v *= h;
  return v;
}

IVec Grid::unflatten(std::int64_t flat) const {
  IVec mi{};
  for (int d = dim - 1; d >= 0; --d) {
    mi[d] = flat % shape[d];
    flat /= shape[d];
  }
  return mi;
}

std::int64_t Grid::flatten(const IVec& mi) const {
  std::int64_t f = 0;
  for (int d = 0; d < dim; ++d) f = f * shape[d] + mi[d];
  return f;
}

bool Grid::in_bounds(const IVec& mi) const {
  for (int d = 0; d < dim; ++d)
    if (mi[d] < 0 || mi[d] >= shape[d]) return false;
  return true;
}

Vec Grid::center(std::int64_t flat) const {
  IVec mi = unflatten(flat);
  Vec x{};
  for (int d = 0; d < dim; ++d) x[d] = origin[d] + (static_cast<double>(mi[d]) + 0.5) * h;
  return x;
}

std::int64_t Grid::neighbor(std::int64_t flat, int axis, int step) const {
  IVec mi = unflatten(flat);
  mi[axis] += step;
  if (!in_bounds(mi)) return -1;
  return flatten(mi);
}

Box Grid::cell_box(std::int64_t flat) const {
  IVec mi = unflatten(flat);
  Box b{};
  for (int d = 0; d < dim; ++d) {
    b.lo[d] = origin[d] + static_cast<double>(mi[d]) * h;
    b.hi[d] = b.lo[d] + h;
  }
  return b;
}

Box Grid::extent() const {
  Box b{};
  for (int d = 0; d < dim; ++d) {
    b.lo[d] = origin[d];
    b.hi[d] = origin[d] + static_cast<double>(shape[d]) * h;
  }
  return b;
}

Grid make_grid(const Box& extent, double h, int dim) {
  if (dim < 1 || dim > kMaxDim) fail(errc::invalid_argument, "grid: bad dimension");
  if (!(h > 0)) fail(errc::invalid_argument, "grid: h must be positive");
  Grid g;
  g.dim = dim;
  g.h = h;
  g.origin = extent.lo;
  for (int d = 0; d < dim; ++d) {
    double len = extent.hi[d] - extent.lo[d];
    g.shape[d] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(len / h - 1e-12)));
  }
  return g;
}

GridFunction make_function(const Grid& g, int components, std::vector<std::uint8_t> mask) {
  if (static_cast<std::int64_t>(mask.size()) != g.cell_count())
    fail(errc::invalid_argument, "mask size does not match grid");
  GridFunction f;
  f.grid = g;
  f.components = components;
  f.data.assign(static_cast<std::size_t>(components) * g.cell_count(), 0.0);
  f.mask = std::move(mask);
  return f;
}

GridFunction make_function(const Grid& g, int components, const Region& support) {
  return make_function(g, components, mask_from_region(g, support));
}

std::vector<std::uint8_t> mask_from_region(const Grid& g, const Region& r) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(g.cell_count()), 0);
  for (std::int64_t i = 0; i < g.cell_count(); ++i)
    if (r.contains(g.center(i))) m[static_cast<std::size_t>(i)] = 1;
  return m;
}

std::int64_t mask_count(const std::vector<std::uint8_t>& mask) {
  std::int64_t n = 0;
  for (auto b : mask) n += b != 0;
  return n;
}

namespace {

// Index range [first, last] of cells with center in [lo, hi) along one axis.
bool axis_range(const Grid& g, int d, double lo, double hi,
                std::int64_t* first, std::int64_t* last) {
  double a = (lo - g.origin[d]) / g.h - 0.5;
  double b = (hi - g.origin[d]) / g.h - 0.5;
  std::int64_t i0 = static_cast<std::int64_t>(std::ceil(a));
  if (static_cast<double>(i0) < a) ++i0;  // guard against ceil rounding down
  std::int64_t i1 = static_cast<std::int64_t>(std::ceil(b)) - 1;
  if (static_cast<double>(i1) >= b) --i1;
  i0 = std::max<std::int64_t>(i0, 0);
  i1 = std::min<std::int64_t>(i1, g.shape[d] - 1);
  *first = i0;
  *last = i1;
  return i0 <= i1;
}

}  // namespace

std::vector<std::int64_t> cells_in_box(const Grid& g, const Box& b) {
  IVec first{}, last{};
  for (int d = 0; d < g.dim; ++d)
    if (!axis_range(g, d, b.lo[d], b.hi[d], &first[d], &last[d])) return {};
  std::vector<std::int64_t> out;
  IVec mi = first;
  for (;;) {
    out.push_back(g.flatten(mi));
    int d = g.dim - 1;
    while (d >= 0 && ++mi[d] > last[d]) mi[d] = first[d], --d;
    if (d < 0) break;
  }
  return out;
}

std::vector<std::int64_t> cells_in_region(const Grid& g, const Region& r) {
  if (r.is_box()) return cells_in_box(g, r.boxes()[0]);
  std::vector<std::int64_t> out;
  if (r.is_box_union()) {
    for (const Box& b : r.boxes()) {
      std::vector<std::int64_t> part = cells_in_box(g, b);
      out.insert(out.end(), part.begin(), part.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  for (std::int64_t i : cells_in_box(g, r.bounding_box()))
    if (r.contains(g.center(i))) out.push_back(i);
  return out;
}

double measure(const Region& r, const Grid& g) {
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < g.cell_count(); ++i)
    if (r.contains(g.center(i))) ++n;
  return static_cast<double>(n) * g.cell_volume();
}

double mask_measure(const Grid& g, const std::vector<std::uint8_t>& mask) {
  return static_cast<double>(mask_count(mask)) * g.cell_volume();
}

double integrate(const GridFunction& f, int component) {
  double s = 0.0;
  for (std::int64_t i = 0; i < f.cells(); ++i)
    if (f.active(i)) s += f.at(component, i);
  return s * f.grid.cell_volume();
}

double weighted_lp_norm(const GridFunction& f, const GridFunction* weight, double p) {
  if (!(p >= 1.0)) fail(errc::invalid_argument, "lp norm: p must be >= 1");
  if (weight && weight->components != 1)
    fail(errc::invalid_argument, "lp norm: weight must be scalar");
  double s = 0.0;
  for (std::int64_t i = 0; i < f.cells(); ++i) {
    if (!f.active(i)) continue;
    double w = 1.0;
    if (weight) {
      w = weight->at(0, i);
      if (!(w > 0.0)) fail(errc::invalid_weight, "weight must be positive on masked cells");
    }
    for (int c = 0; c < f.components; ++c)
      s += std::pow(std::abs(f.at(c, i) * w), p);
  }
  return std::pow(s * f.grid.cell_volume(), 1.0 / p);
}

namespace {

// One-sided at mask boundaries, centered inside, zero if isolated.
double partial_fd(const GridFunction& u, int c, std::int64_t i, int axis) {
  const double h = u.grid.h;
  std::int64_t ip = u.grid.neighbor(i, axis, +1);
  std::int64_t im = u.grid.neighbor(i, axis, -1);
  bool okp = ip >= 0 && u.active(ip);
  bool okm = im >= 0 && u.active(im);
  if (okp && okm) return (u.at(c, ip) - u.at(c, im)) / (2.0 * h);
  if (okp) return (u.at(c, ip) - u.at(c, i)) / h;
  if (okm) return (u.at(c, i) - u.at(c, im)) / h;
  return 0.0;
}

}  // namespace

GridFunction divergence_fd(const GridFunction& u) {
  if (u.components != u.grid.dim)
    fail(errc::invalid_argument, "divergence: need one component per axis");
  GridFunction out = make_function(u.grid, 1, u.mask);
  for (std::int64_t i = 0; i < u.cells(); ++i) {
    if (!u.active(i)) continue;
    double s = 0.0;
    for (int d = 0; d < u.grid.dim; ++d) s += partial_fd(u, d, i, d);
    out.at(0, i) = s;
  }
  return out;
}

GridFunction gradient_fd(const GridFunction& u) {
  const int n = u.grid.dim;
  GridFunction out = make_function(u.grid, u.components * n, u.mask);
  for (std::int64_t i = 0; i < u.cells(); ++i) {
    if (!u.active(i)) continue;
    for (int c = 0; c < u.components; ++c)
      for (int d = 0; d < n; ++d)
        out.at(c * n + d, i) = partial_fd(u, c, i, d);
  }
  return out;
}

void save_csv(const GridFunction& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "cannot open " + path);
  out << "cell";
  for (int c = 0; c < f.components; ++c) out << ",v" << c;
  out << "\n";
  char buf[32];
  for (std::int64_t i = 0; i < f.cells(); ++i) {
    if (!f.active(i)) continue;
    out << i;
    for (int c = 0; c < f.components; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", f.at(c, i));
      out << ',' << buf;
    }
    out << "\n";
  }
  nlohmann::ordered_json meta;
  meta["dim"] = f.grid.dim;
  meta["h"] = f.grid.h;
  meta["origin"] = std::vector<double>(f.grid.origin.begin(), f.grid.origin.begin() + f.grid.dim);
  meta["shape"] = std::vector<std::int64_t>(f.grid.shape.begin(), f.grid.shape.begin() + f.grid.dim);
  meta["components"] = f.components;
  std::ofstream side(path + ".json");
  if (!side) fail(errc::io_error, "cannot open " + path + ".json");
  side << meta.dump(2) << "\n";
}

GridFunction load_csv(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) fail(errc::io_error, "missing sidecar " + path + ".json");
  nlohmann::json meta = nlohmann::json::parse(side);
  Grid g;
  g.dim = meta.at("dim").get<int>();
  g.h = meta.at("h").get<double>();
  auto ov = meta.at("origin").get<std::vector<double>>();
  auto sv = meta.at("shape").get<std::vector<std::int64_t>>();
  for (int d = 0; d < g.dim; ++d) {
    g.origin[d] = ov.at(d);
    g.shape[d] = sv.at(d);
  }
  int components = meta.at("components").get<int>();
  GridFunction f = make_function(g, components,
                                 std::vector<std::uint8_t>(static_cast<std::size_t>(g.cell_count()), 0));
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tok;
    std::getline(row, tok, ',');
    std::int64_t i = std::stoll(tok);
    f.mask[static_cast<std::size_t>(i)] = 1;
    for (int c = 0; c < components; ++c) {
      std::getline(row, tok, ',');
      f.at(c, i) = std::stod(tok);
    }
  }
  return f;
}

}  // namespace divtree
