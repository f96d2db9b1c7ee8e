#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divtree/grid.hpp"
#include "divtree/tree.hpp"

namespace divtree {

struct WhitneyOptions {
  int max_level = 6;      // dyadic depth below the hull cube; side = base/2^level
  double eps_tree = 0.2;  // expansion factor for the runtime covering (< 1/4)
  double boundary_step = 0.0;  // boundary cloud spacing; 0 means half the grid step
};

struct WhitneyCube {
  IVec idx{};  // dyadic position at this level, relative to the hull cube
  int level = 0;
  int parent = -1;  // chain-tree parent, -1 at the root
  Box box;          // closed cube in domain coordinates
  double side = 0.0;
  double boundary_distance = 0.0;  // to the sampled boundary cloud
  int shared_axis = -1;            // face to the parent
  double shared_plane = 0.0;       // coordinate of that face along shared_axis
};

struct WhitneyCover {
  std::vector<WhitneyCube> cubes;  // sorted by (level, idx), the id order
  int root = -1;
  int dim = 0;
  Vec origin{};            // hull cube corner, also the dyadic lattice origin
  double base_side = 0.0;  // hull cube side
  int max_level = 0;
  double boundary_step = 0.0;
  std::int64_t dropped_cells = 0;  // domain cells left uncovered at max_level
  std::vector<std::vector<int>> touching;  // closed-box contact, incl. corners
};

// Maximal dyadic cubes with diam <= distance to the sampled boundary, chained
// to a central root by breadth-first search over shared faces. Cubes that
// would need levels beyond max_level are dropped and counted.
WhitneyCover build_whitney(const Region& domain, const Grid& grid,
                           const WhitneyOptions& opt);

// Runtime covering: subdomains are the (1 + eps_tree)-expanded cubes, each
// connector a patch of the two cell layers straddling the shared face with
// the parent, shrunk in-plane and claimed greedily in node order so the
// family stays pairwise disjoint. Cells are taken in 2^n blocks (2 per axis)
// where the band allows it, so a constant spike on the connector loads every
// even/odd index sublattice equally; centered interior stencils decouple
// those sublattices, and balance is what makes the spike exactly solvable on
// the node. Requires h < eps_tree * side per chain edge; overlap bound 12^n.
DomainTree whitney_tree(const WhitneyCover& cover, const Grid& grid,
                        const WhitneyOptions& opt);

// min over touching cubes of |Q| / |shadow(Q)| as a cell field; cells reached
// only by expansions take the smallest value among the expansions covering
// them. The shadow is the grid measure of the subtree union.
GridFunction shadow_weight(const WhitneyCover& cover, const DomainTree& tree);

struct M1Check {
  double observed = 0.0;  // max over nodes of sup shadow_weight / inf tree weight
  double ceiling = 0.0;   // 2^(11n)
  bool pass = false;
};
M1Check verify_m1(const WhitneyCover& cover, const DomainTree& tree);

struct WhitneyGeometryReport {
  double worst_lower = 0.0;   // min of dist / diam        (want >= 1)
  double worst_upper = 0.0;   // max of dist / diam        (want <= 4)
  int worst_side_ratio = 0;   // max side ratio over touching pairs (want <= 4)
  bool interiors_disjoint = false;
  bool partition_ok = false;  // every covered domain cell in exactly one cube
  double tolerance = 0.0;     // one boundary-sample spacing
  bool pass = false;
};
WhitneyGeometryReport verify_whitney_geometry(const WhitneyCover& cover,
                                              const Grid& grid, const Region& domain);

// The reference connector cubes: side (2^-7/4) * side_t, centered on the
// shared face. Checked in exact integer arithmetic at scale 2^(max_level+10):
// pairwise disjointness, contact with exactly the two owning expanded cubes,
// and the margin inequality side/8 - 8 eps side > eps side/8.
struct ConnectorGeometry {
  bool disjoint = false;
  bool meets_only_pair = false;
  bool margin_inequality = false;
  std::int64_t pairs_checked = 0;
  std::string detail;
  bool pass() const { return disjoint && meets_only_pair && margin_inequality; }
};
ConnectorGeometry verify_connector_geometry(const WhitneyCover& cover);

// One row per cube: id, level, index, box, parent, boundary distance.
void save_cubes_csv(const WhitneyCover& cover, const std::string& path);

}  // namespace divtree
