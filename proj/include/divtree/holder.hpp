#pragma once

#include <functional>
#include <string>
#include <vector>

#include "divtree/grid.hpp"
#include "divtree/tree.hpp"

namespace divtree {

// Graph patch: the domain {x in (-l/2, l/2)^(n-1), 0 < y < phi(x)} under a
// Holder-alpha graph. phi must be defined on (-5l/2, 5l/2)^(n-1), is at
// least 2l everywhere, and dips below 3l somewhere. The first dim-1 entries
// of the argument are the horizontal coordinates.
struct HolderProfile {
  std::function<double(const Vec&)> phi;
  double alpha = 1.0;  // Holder exponent in (0, 1]
  double k_phi = 0.0;  // Holder constant
  double l = 1.0;      // base scale, 0 < l <= 1
  int dim = 2;
  std::string name;
};

// phi(x) = 2l + c |x|^alpha (c defaults to l^(1-alpha)); k_phi = c.
HolderProfile power_hump(double alpha, double l, int dim = 2, double c = -1.0);
// Constant graph at height c >= 2l; k_phi = 0.
HolderProfile flat_graph(double c, double l, int dim = 2);

struct HolderProfileCheck {
  double worst_holder_ratio = 0.0;  // sampled |dphi| / (k_phi |dx|^alpha)
  double min_phi = 0.0;
  bool holder_ok = false;
  bool above_2l = false;
  bool dips_below_3l = false;
  bool pass = false;
};
HolderProfileCheck verify_profile(const HolderProfile& p, int samples = 512);

// One cube of the pile: Q = Q' x (y1, y2) with y2 - y1 = side.
struct PiledCube {
  Box box;
  double side = 0.0;
  int level = 0;
  int parent = -1;
};

struct PiledCubes {
  std::vector<PiledCube> cubes;  // root first, level order
  int dim = 2;
  int levels = 0;  // deepest level present plus one
};

struct PileOptions {
  // phi samples per horizontal axis in the fit test, corners and center
  // included. 13 makes the sample spacing width/12, which lands a sample on
  // every dyadic column offset, so a graph dip at a dyadic point (the
  // power hump's vertex in particular) is tested exactly instead of slipping
  // between samples.
  int face_samples = 13;
  double min_side = 0.0;  // children thinner than this are not spawned
};

// Level-by-level piling from the root (-l/2, l/2)^(n-1) x (0, l): a cube
// whose tripled upward shift fits under the graph gets one same-side child
// on top; otherwise it gets 2^(n-1) half-side children on its top face.
PiledCubes pile_cubes(const HolderProfile& p, int max_levels,
                      const PileOptions& opt = {});

// The graph patch domain as a region (for truncation accounting).
Region holder_domain(const HolderProfile& p);

// Distance to the graph over (-5l/2, 5l/2)^(n-1), sampled at resolution
// step (defaults to h/2) from a fixed point cloud; evaluated at cell centers.
GridFunction graph_distance(const HolderProfile& p, const Grid& grid,
                            double step = 0.0);

// Distance from each piled cube to the same graph cloud.
std::vector<double> cube_distances(const PiledCubes& piled, const HolderProfile& p,
                                   double step);

// Tree over Omega_t = Q'_t x (y1 - side/2, y2), root cube kept as is, with
// connectors B_t = Q'_t x (y1 - side/2, y1) = Omega_t intersect Omega_parent.
DomainTree holder_tree(const PiledCubes& piled, const Grid& grid);

struct HolderWeightReport {
  double m1 = 0.0;               // worst sup omega_bar / inf omega per node
  double shadow_constant = 0.0;  // worst |W_t| / ((k+l_t^(1-a)) l_t^(n-1+a))
  std::vector<double> node_ratio;
  bool finite = false;
};

// omega_bar = d_G^(1-alpha) and hat_w = d_G^(-kappa) on the tree mask, with
// the per-node comparison against the tree weight |B_t|/|W_t|.
struct HolderWeights {
  GridFunction omega_bar;
  GridFunction hat_w;
  HolderWeightReport report;
};
HolderWeights holder_weights(const PiledCubes& piled, const HolderProfile& p,
                             const DomainTree& tree, double kappa);

}  // namespace divtree
