#pragma once

#include <cstdint>
#include <vector>

#include "divtree/cusp.hpp"
#include "divtree/grid.hpp"
#include "divtree/local_div.hpp"
#include "divtree/tree.hpp"

namespace divtree {

// How one subdomain is solved locally: a single region star-shaped with
// respect to its ball, or a chain of overlapping star slabs glued by an
// inner path tree when the subdomain itself is not star shaped.
struct LocalShape {
  StarRegion star;
  std::vector<StarRegion> chain;  // nonempty: solve along the chain instead
};

// One shape per node for trees whose omegas are boxes: the box with its
// inscribed ball. Fails with containment when some omega is not a box.
std::vector<LocalShape> box_local_shapes(const DomainTree& tree);

// One chain per cusp node. The slab count is the smallest (scanned over a
// short near-geometric ladder) whose slabs pass the sampled star test and
// keep ball radius and connector width at least min_ball_h grid cells; the
// sufficient count 16 k1^2 k2^2 usually over-refines a concrete profile past
// what the grid resolves, so the test decides instead.
std::vector<LocalShape> cusp_local_shapes(const CuspProfile& p,
                                          const CuspCover& cover,
                                          const Grid& grid,
                                          double min_ball_h = 1.2);

struct SolveOptions {
  LocalSolveOptions local;  // forwarded to every inner solve
  double mean_tol = 1e-10;  // |mean f| tolerance, relative to ||f||_1
  // The kernel solution of each node is polished by a least-squares pass on
  // the grid divergence stencil itself: a correction supported on the node's
  // cells so that the field, summed into the glued result and read through
  // the mask's centered/one-sided differences, reproduces g_t and stays
  // invisible to the neighboring cells' stencils. Zero-extension of a local
  // field kinks at the subdomain face, and that first-order seam error, not
  // the kernel quadrature, dominates the glued residual. The budget is the
  // CG iteration cap per node; -1 sizes it from the node, 0 disables the
  // pass. A single-node tree skips it: no seams, and its contract is one
  // plain local solve.
  int completion_budget = -1;
};

struct NodeSolveStats {
  int node = -1;
  std::int64_t cells = 0;   // active cells of the local datum
  int chain_links = 0;      // inner chain length; 0 for a single star
  int coarsen = 1;          // per-axis coarsening factor applied; 1 none
  double mean_leak = 0.0;   // datum mass dropped by coarsening, relative
  double star_ratio = 0.0;  // diameter over ball radius, max over a chain
  double g_norm = 0.0;      // local datum norm in L^p(hat w)
  double du_norm = 0.0;     // local gradient norm in L^p(hat w)
  double ratio = 0.0;       // du_norm / g_norm; 0 when the datum vanishes
  int completion_iters = 0;     // least-squares iterations spent on the seam
  double seed_residual = -1.0;  // ||g_t - div u_t||_2 / ||g_t||_2 before completion
  double local_residual = -1.0; // and after; both embedded, -1 unmeasured
};

// Every constant of the glued estimate
//   ||Du||_{L^p(bar w hat w)} <= C ||f||_{L^p(hat w)},
//   C = 2 N M1 M2 (N + 2 MT^p)^(1/p),
// with the empirical values measured on this run and closed-form ceilings
// where one applies (0 otherwise). c_empirical is -1 when f vanishes.
struct SolveReport {
  double p = 0.0;
  double overlap = 0.0;         // N
  double m1_empirical = 0.0;    // max_t sup_{Omega_t} bar w / inf_{Omega_t} omega
  double m1_theoretical = 0.0;
  double m2_empirical = 0.0;    // max_t du_norm / g_norm
  double mt_empirical = 0.0;    // ||Tf|| / ||f|| in L^p(hat w)
  double mt_theoretical = 0.0;  // 2 (pN/(p-1))^(1/p) when hat w is one
  double c_theoretical = 0.0;
  double c_empirical = -1.0;
  double f_norm = 0.0;   // ||f||_{L^p(hat w)}
  double du_norm = 0.0;  // ||Du||_{L^p(bar w hat w)}
  double residual = 0.0;  // ||div u - f||_2 / ||f||_2 on the mask
  bool estimate_pass = false;
  std::vector<NodeSolveStats> nodes;
};

struct SolveWeights {
  GridFunction omega_bar;
  GridFunction hat_w;
};

// bar w = hat w = 1 on the tree mask.
SolveWeights unit_weights(const DomainTree& tree);

struct SolveResult {
  GridFunction u;  // grid.dim components, supported on the tree mask
  SolveReport report;
};

// Decompose f along the tree, solve div u_t = g_t on every node shape, and
// sum. Local solves run per node in tree order with a deterministic
// scatter-add, so reruns with the same inputs agree byte for byte. Nodes
// whose datum exceeds the local cell cap are solved on a coarsened copy of
// their subgrid and prolonged back; the mass such a restriction drops is
// recorded per node, never silently renormalized away.
SolveResult solve_divergence(const GridFunction& f, const DomainTree& tree,
                             const std::vector<LocalShape>& shapes,
                             const SolveWeights& weights, double p,
                             const SolveOptions& opt = {});

// Unweighted corollary run: verifies omega >= 1/m1_declared on the mask
// (fails invalid_weight naming the connector that breaks it), solves with
// unit weights, and sets c_theoretical to the corollary ceiling
// 2 m1 M2 N^{1+1/p} (1 + 2^{p+1} p/(p-1))^{1/p}.
SolveResult unweighted_divp_check(const GridFunction& f, const DomainTree& tree,
                                  const std::vector<LocalShape>& shapes,
                                  double p, double m1_declared,
                                  const SolveOptions& opt = {});

// Empirical norm of the tree operator T on L^p(hat w) over seeded random
// fields; hat_w null means unweighted, compared against the closed form.
// Fills the mt, p and overlap fields of the report.
SolveReport operator_T_weighted_check(const DomainTree& tree,
                                      const GridFunction* hat_w, double p,
                                      int trials, std::uint64_t seed);

// The two closed-form ceilings.
double glued_constant(double p, double overlap, double m1, double m2, double mt);
double corollary_divp_constant(double p, double overlap, double m1, double m2);

}  // namespace divtree
