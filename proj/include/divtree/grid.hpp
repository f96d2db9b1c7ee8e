#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "divtree/errors.hpp"

namespace divtree {

// Dimension is a runtime parameter; storage is capped so hot loops stay
// allocation-free.
inline constexpr int kMaxDim = 4;

using Vec = std::array<double, kMaxDim>;
using IVec = std::array<std::int64_t, kMaxDim>;

Vec vec(std::initializer_list<double> xs);

// Axis-aligned box. Pointwise membership is half-open [lo, hi) so that
// families of abutting boxes classify every point exactly once.
struct Box {
  Vec lo{};
  Vec hi{};

  bool contains(const Vec& x, int dim) const;
  bool contains_closed(const Vec& x, int dim) const;
  bool intersects_open(const Box& b, int dim) const;
  bool contains_box(const Box& inner, int dim) const;
  double volume(int dim) const;
  double diameter(int dim) const;  // corner-to-corner
  double shortest_side(int dim) const;
  Vec center(int dim) const;
  Box hull(const Box& b, int dim) const;
  double distance_to(const Vec& x, int dim) const;  // 0 inside
};

Box make_box(std::initializer_list<double> lo, std::initializer_list<double> hi);

// Membership test over R^n: a box, a finite union of boxes, or an arbitrary
// predicate carrying a declared bounding box.
class Region {
 public:
  Region() = default;

  static Region box(const Box& b, int dim);
  static Region box_union(std::vector<Box> boxes, int dim);
  static Region predicate(std::function<bool(const Vec&)> fn, const Box& bbox, int dim);

  bool contains(const Vec& x) const;
  const Box& bounding_box() const;
  int dim() const { return dim_; }
  bool is_box() const { return kind_ == Kind::kBox; }
  bool is_box_union() const { return kind_ != Kind::kPredicate; }
  const std::vector<Box>& boxes() const;  // box or box_union only

 private:
  enum class Kind { kEmpty, kBox, kBoxUnion, kPredicate };
  Kind kind_ = Kind::kEmpty;
  int dim_ = 0;
  std::vector<Box> boxes_;
  std::function<bool(const Vec&)> fn_;
  Box bbox_{};
};

// Uniform isotropic Cartesian grid. Cells are cubes of side h addressed by a
// flat row-major index (last axis fastest); integrals are midpoint sums and
// membership anywhere in the toolkit means "cell center inside".
struct Grid {
  int dim = 0;
  double h = 0.0;
  Vec origin{};
  IVec shape{};

  std::int64_t cell_count() const;
  double cell_volume() const;  // h^dim
  Vec center(std::int64_t flat) const;
  IVec unflatten(std::int64_t flat) const;
  std::int64_t flatten(const IVec& mi) const;
  bool in_bounds(const IVec& mi) const;
  // Flat index of the neighbor one cell over along axis, or -1 off the grid.
  std::int64_t neighbor(std::int64_t flat, int axis, int step) const;
  Box cell_box(std::int64_t flat) const;
  Box extent() const;
};

Grid make_grid(const Box& extent, double h, int dim);

// Scalar or vector field sampled at cell centers, with a mask selecting the
// active cells. Component-major storage: data[c * cells + i].
struct GridFunction {
  Grid grid;
  int components = 1;
  std::vector<double> data;
  std::vector<std::uint8_t> mask;

  std::int64_t cells() const { return grid.cell_count(); }
  double& at(int c, std::int64_t i) { return data[static_cast<std::size_t>(c) * cells() + i]; }
  double at(int c, std::int64_t i) const { return data[static_cast<std::size_t>(c) * cells() + i]; }
  bool active(std::int64_t i) const { return mask[static_cast<std::size_t>(i)] != 0; }
};

GridFunction make_function(const Grid& g, int components, std::vector<std::uint8_t> mask);
GridFunction make_function(const Grid& g, int components, const Region& support);

std::vector<std::uint8_t> mask_from_region(const Grid& g, const Region& r);
std::int64_t mask_count(const std::vector<std::uint8_t>& mask);

// Flat indices of all cells whose center lies in the box / region, ascending.
// Enumerates index ranges directly, without scanning the whole grid.
std::vector<std::int64_t> cells_in_box(const Grid& g, const Box& b);
std::vector<std::int64_t> cells_in_region(const Grid& g, const Region& r);

// h^dim times the number of cell centers inside the region.
double measure(const Region& r, const Grid& g);
double mask_measure(const Grid& g, const std::vector<std::uint8_t>& mask);

// Midpoint-rule integral of one component over the mask.
double integrate(const GridFunction& f, int component = 0);

// || f w ||_{L^p} over the mask, all components pooled. weight may be null
// (taken as 1) and must be strictly positive on every masked cell.
double weighted_lp_norm(const GridFunction& f, const GridFunction* weight, double p);

// Centered differences where both neighbors are masked, one-sided at mask
// boundaries, zero along axes with no masked neighbor.
GridFunction divergence_fd(const GridFunction& u);
// All partials; component (i * dim + d) holds d u_i / d x_d.
GridFunction gradient_fd(const GridFunction& u);

// CSV of masked cells (flat index, one column per component) plus a JSON
// sidecar <path>.json with the grid metadata.
void save_csv(const GridFunction& f, const std::string& path);
GridFunction load_csv(const std::string& path);

}  // namespace divtree
