#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "divtree/grid.hpp"

namespace divtree {

// One subdomain of the covering, plus the connector set B_t shared with its
// parent. The root has no connector.
struct TreeNode {
  int parent = -1;
  Region omega;
  Region connector;
};

// Rooted covering tree over a grid. Per-node cell lists are cached once by
// finalize_tree; omega_cells may also be filled directly by a builder that
// knows the geometry (then the Region is kept only for reporting).
struct DomainTree {
  Grid grid;
  int root = -1;
  double overlap_bound = 0.0;  // declared N of condition (a)
  int tail_node = -1;          // absorbs off-mask mass if >= 0
  std::vector<TreeNode> nodes;

  std::vector<std::vector<std::int64_t>> omega_cells;
  std::vector<std::vector<std::int64_t>> b_cells;
  std::vector<double> b_measure;              // |B_t| on the grid
  std::vector<double> w_measure;              // |W_t| on the grid
  std::vector<std::vector<std::uint64_t>> w_bits;  // subtree union bitsets
  std::vector<std::uint8_t> mask;             // union of all omega cells
  std::vector<int> cover;                     // per-cell cover count
  std::vector<int> order;                     // parents before children
  std::vector<std::vector<int>> children;

  int size() const { return static_cast<int>(nodes.size()); }
  bool in_subtree_union(int node, std::int64_t cell) const {
    return (w_bits[node][static_cast<std::size_t>(cell) >> 6] >>
            (static_cast<std::size_t>(cell) & 63)) & 1u;
  }
};

// Cells are derived from the node regions. Builders that precompute cells can
// fill omega_cells/b_cells and call finalize_tree themselves.
DomainTree make_tree(const Grid& g, std::vector<TreeNode> nodes, double overlap_bound,
                     int tail_node = -1);

// Builds every cache. Throws malformed_tree for a broken parent map,
// empty_domain when some omega resolves to zero cells, degenerate_connector
// when some B_t resolves to zero cells.
void finalize_tree(DomainTree& tree);

struct CoverReport {
  int min_cover = 0;
  int max_cover = 0;
  bool cover_ok = false;        // condition (a): 1 <= cover <= N on the mask
  bool connectors_ok = false;   // condition (b): B_t in Omega_t and parent,
  bool disjoint_ok = false;     //                pairwise disjoint, |B_t| > 0
  std::int64_t uncovered_domain_cells = 0;  // domain cells outside the mask
  std::string detail;
  bool ok() const { return cover_ok && connectors_ok && disjoint_ok; }
};

CoverReport validate_tree(const DomainTree& tree,
                          const std::vector<std::uint8_t>* domain_mask = nullptr);

// chi_{Omega_t} / cover, one field per node. Materializes size() full fields;
// meant for small trees and inspection, the pipeline never builds these.
std::vector<GridFunction> partition_of_unity(const DomainTree& tree);

// g_t = f phi_t - ftilde_t, stored sparsely on omega_cells[t].
struct NodePiece {
  int node = -1;
  std::vector<double> g;
  double integral = 0.0;          // of g_t
  double subtree_integral = 0.0;  // S_t = integral of f over W_t pieces
};

struct Decomposition {
  std::vector<NodePiece> pieces;  // indexed by node id
  double off_mask_mass = 0.0;
  std::int64_t off_mask_cells = 0;
};

Decomposition decompose(const DomainTree& tree, const GridFunction& f);

// Sum of the pieces as a full field (the reconstruction of f).
GridFunction decomposition_sum(const DomainTree& tree, const Decomposition& dec);

// Tf = sum over non-root nodes of chi_{B_t} / |W_t| * integral_{W_t} |f|.
GridFunction hardy_tree_operator(const DomainTree& tree, const GridFunction& f);

// omega = |B_t| / |W_t| on each B_t, 1 elsewhere on the mask.
GridFunction tree_weight(const DomainTree& tree);

// 2 (p N / (p-1))^(1/p), the Hardy-type operator norm ceiling.
double hardy_bound_constant(double p, double overlap_bound);
// 2^p N (1 + 2^(p+1) p / (p-1)), the unweighted decomposition constant.
double decomposition_bound_constant(double p, double overlap_bound);

struct BoundCheck {
  double worst_ratio = 0.0;  // largest observed LHS / RHS-without-constant
  double constant = 0.0;     // the theoretical ceiling it must stay under
  int trials = 0;
  int violations = 0;
  bool pass = false;
};

// ||Tf||_p <= 2 (pN/(p-1))^(1/p) ||f||_p over seeded random fields.
BoundCheck verify_T_bound(const DomainTree& tree, double p, int trials,
                          std::uint64_t seed);

// sum_t ||g_t||^p_{L^p(omega w1)} <= C ||f||^p_{L^p(w2)} over seeded random
// zero-mean fields. Unweighted (null weights) uses the closed-form constant;
// weighted runs report the empirical operator norms that enter C2.
struct DecompositionBoundCheck {
  BoundCheck check;
  double m_identity = 1.0;
  double m_hardy = 0.0;
  bool weighted = false;
};

DecompositionBoundCheck verify_decomposition_bound(const DomainTree& tree, double p,
                                                   int trials, std::uint64_t seed,
                                                   const GridFunction* hat_w1 = nullptr,
                                                   const GridFunction* hat_w2 = nullptr);

// Cell-wise uniform [-1,1] on the mask; zero_mean subtracts the mask mean.
GridFunction random_field(const Grid& g, const std::vector<std::uint8_t>& mask,
                          std::uint64_t seed, bool zero_mean);

// Seeded band-limited field: a few Fourier modes over the grid extent,
// optionally shifted to exact zero mean on the mask. Smooth data suit the
// solver paths, whose finite differences see nothing in white noise;
// random_field suits the decomposition identities.
GridFunction smooth_field(const Grid& g, const std::vector<std::uint8_t>& mask,
                          std::uint64_t seed, bool zero_mean);

}  // namespace divtree
