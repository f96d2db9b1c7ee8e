#include "divtree/tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>

namespace divtree {

namespace {

std::size_t words_for(std::int64_t cells) {
  return static_cast<std::size_t>((cells + 63) / 64);
}

void set_bit(std::vector<std::uint64_t>& bits, std::int64_t cell) {
  bits[static_cast<std::size_t>(cell) >> 6] |= std::uint64_t{1} << (cell & 63);
}

bool sorted_subset(const std::vector<std::int64_t>& small,
                   const std::vector<std::int64_t>& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

}  // namespace

DomainTree make_tree(const Grid& g, std::vector<TreeNode> nodes, double overlap_bound,
                     int tail_node) {
  DomainTree tree;
  tree.grid = g;
  tree.overlap_bound = overlap_bound;
  tree.tail_node = tail_node;
  tree.nodes = std::move(nodes);
  finalize_tree(tree);
  return tree;
}

void finalize_tree(DomainTree& tree) {
  const int n = tree.size();
  if (n == 0) fail(errc::empty_domain, "tree has no nodes");
  const std::int64_t cells = tree.grid.cell_count();

  tree.root = -1;
  tree.children.assign(n, {});
  for (int t = 0; t < n; ++t) {
    int p = tree.nodes[t].parent;
    if (p == -1) {
      if (tree.root != -1) fail(errc::malformed_tree, "two roots");
      tree.root = t;
    } else if (p < 0 || p >= n || p == t) {
      fail(errc::malformed_tree, "bad parent id");
    } else {
      tree.children[p].push_back(t);
    }
  }
  if (tree.root == -1) fail(errc::malformed_tree, "no root");

  tree.order.clear();
  tree.order.reserve(n);
  std::deque<int> queue{tree.root};
  while (!queue.empty()) {
    int t = queue.front();
    queue.pop_front();
    tree.order.push_back(t);
    for (int s : tree.children[t]) queue.push_back(s);
  }
  if (static_cast<int>(tree.order.size()) != n)
    fail(errc::malformed_tree, "parent map has unreachable nodes or a cycle");

  if (tree.omega_cells.empty()) {
    tree.omega_cells.resize(n);
    for (int t = 0; t < n; ++t)
      tree.omega_cells[t] = cells_in_region(tree.grid, tree.nodes[t].omega);
  }
  if (tree.b_cells.empty()) {
    tree.b_cells.resize(n);
    for (int t = 0; t < n; ++t)
      if (t != tree.root)
        tree.b_cells[t] = cells_in_region(tree.grid, tree.nodes[t].connector);
  }
  for (int t = 0; t < n; ++t) {
    std::sort(tree.omega_cells[t].begin(), tree.omega_cells[t].end());
    std::sort(tree.b_cells[t].begin(), tree.b_cells[t].end());
    if (tree.omega_cells[t].empty())
      fail(errc::empty_domain, "node " + std::to_string(t) +
                                   " resolves to zero cells; refine the grid");
    if (t != tree.root && tree.b_cells[t].empty())
      fail(errc::degenerate_connector, "connector of node " + std::to_string(t) +
                                           " resolves to zero cells; refine the grid");
  }

  tree.mask.assign(static_cast<std::size_t>(cells), 0);
  tree.cover.assign(static_cast<std::size_t>(cells), 0);
  for (int t = 0; t < n; ++t)
    for (std::int64_t c : tree.omega_cells[t]) {
      tree.mask[static_cast<std::size_t>(c)] = 1;
      ++tree.cover[static_cast<std::size_t>(c)];
    }

  tree.w_bits.assign(n, {});
  const std::size_t words = words_for(cells);
  for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
    int t = *it;
    tree.w_bits[t].assign(words, 0);
    for (std::int64_t c : tree.omega_cells[t]) set_bit(tree.w_bits[t], c);
    for (int s : tree.children[t])
      for (std::size_t w = 0; w < words; ++w) tree.w_bits[t][w] |= tree.w_bits[s][w];
  }

  const double vol = tree.grid.cell_volume();
  tree.b_measure.assign(n, 0.0);
  tree.w_measure.assign(n, 0.0);
  for (int t = 0; t < n; ++t) {
    tree.b_measure[t] = static_cast<double>(tree.b_cells[t].size()) * vol;
    std::int64_t w_cells = 0;
    for (std::uint64_t word : tree.w_bits[t]) w_cells += std::popcount(word);
    tree.w_measure[t] = static_cast<double>(w_cells) * vol;
  }
}

CoverReport validate_tree(const DomainTree& tree,
                          const std::vector<std::uint8_t>* domain_mask) {
  CoverReport rep;
  const std::int64_t cells = tree.grid.cell_count();
  std::ostringstream detail;

  rep.min_cover = tree.size() + 1;
  rep.max_cover = 0;
  for (std::int64_t c = 0; c < cells; ++c) {
    if (!tree.mask[static_cast<std::size_t>(c)]) continue;
    int k = tree.cover[static_cast<std::size_t>(c)];
    rep.min_cover = std::min(rep.min_cover, k);
    rep.max_cover = std::max(rep.max_cover, k);
  }
  rep.cover_ok = rep.min_cover >= 1 &&
                 static_cast<double>(rep.max_cover) <= tree.overlap_bound;
  if (!rep.cover_ok)
    detail << "cover range [" << rep.min_cover << "," << rep.max_cover
           << "] violates 1..N=" << tree.overlap_bound << "; ";

  if (domain_mask) {
    for (std::int64_t c = 0; c < cells; ++c)
      if ((*domain_mask)[static_cast<std::size_t>(c)] &&
          !tree.mask[static_cast<std::size_t>(c)])
        ++rep.uncovered_domain_cells;
    if (rep.uncovered_domain_cells > 0)
      detail << rep.uncovered_domain_cells
             << " domain cells lie outside the covering (truncation); ";
  }

  rep.connectors_ok = true;
  for (int t = 0; t < tree.size() && rep.connectors_ok; ++t) {
    if (t == tree.root) continue;
    if (tree.b_cells[t].empty()) rep.connectors_ok = false;
    if (!sorted_subset(tree.b_cells[t], tree.omega_cells[t]) ||
        !sorted_subset(tree.b_cells[t], tree.omega_cells[tree.nodes[t].parent])) {
      rep.connectors_ok = false;
      detail << "B_" << t << " escapes Omega_t or the parent; ";
    }
  }

  rep.disjoint_ok = true;
  std::vector<int> owner(static_cast<std::size_t>(cells), -1);
  for (int t = 0; t < tree.size() && rep.disjoint_ok; ++t)
    for (std::int64_t c : tree.b_cells[t]) {
      if (owner[static_cast<std::size_t>(c)] != -1) {
        rep.disjoint_ok = false;
        detail << "B_" << t << " collides with B_" << owner[static_cast<std::size_t>(c)]
               << "; ";
        break;
      }
      owner[static_cast<std::size_t>(c)] = t;
    }

  rep.detail = detail.str();
  return rep;
}

std::vector<GridFunction> partition_of_unity(const DomainTree& tree) {
  std::vector<GridFunction> parts;
  parts.reserve(static_cast<std::size_t>(tree.size()));
  for (int t = 0; t < tree.size(); ++t) {
    GridFunction phi = make_function(tree.grid, 1, tree.mask);
    for (std::int64_t c : tree.omega_cells[t])
      phi.at(0, c) = 1.0 / static_cast<double>(tree.cover[static_cast<std::size_t>(c)]);
    parts.push_back(std::move(phi));
  }
  return parts;
}

Decomposition decompose(const DomainTree& tree, const GridFunction& f) {
  if (f.components != 1) fail(errc::invalid_argument, "decompose: scalar f required");
  if (f.grid.cell_count() != tree.grid.cell_count())
    fail(errc::invalid_argument, "decompose: f lives on another grid");
  const double vol = tree.grid.cell_volume();
  const int n = tree.size();

  Decomposition dec;
  dec.pieces.resize(n);

  for (std::int64_t c = 0; c < f.cells(); ++c)
    if (f.active(c) && !tree.mask[static_cast<std::size_t>(c)] && f.at(0, c) != 0.0) {
      dec.off_mask_mass += f.at(0, c) * vol;
      ++dec.off_mask_cells;
    }

  // S_t by post-order accumulation, one pass over each omega.
  std::vector<double> own(n, 0.0), subtree(n, 0.0);
  for (int t = 0; t < n; ++t) {
    double s = 0.0;
    for (std::int64_t c : tree.omega_cells[t])
      if (f.active(c))
        s += f.at(0, c) / static_cast<double>(tree.cover[static_cast<std::size_t>(c)]);
    own[t] = s * vol;
  }
  if (tree.tail_node >= 0) own[tree.tail_node] += dec.off_mask_mass;
  for (auto it = tree.order.rbegin(); it != tree.order.rend(); ++it) {
    int t = *it;
    subtree[t] = own[t];
    for (int s : tree.children[t]) subtree[t] += subtree[s];
  }

  for (int t = 0; t < n; ++t) {
    NodePiece& piece = dec.pieces[t];
    piece.node = t;
    piece.subtree_integral = subtree[t];
    const auto& cells = tree.omega_cells[t];
    piece.g.assign(cells.size(), 0.0);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      std::int64_t c = cells[i];
      if (f.active(c))
        piece.g[i] = f.at(0, c) / static_cast<double>(tree.cover[static_cast<std::size_t>(c)]);
    }
    auto add_on = [&](const std::vector<std::int64_t>& where, double density) {
      for (std::int64_t c : where) {
        auto it = std::lower_bound(cells.begin(), cells.end(), c);
        if (it == cells.end() || *it != c)
          fail(errc::containment, "connector cell outside node " + std::to_string(t));
        piece.g[static_cast<std::size_t>(it - cells.begin())] += density;
      }
    };
    if (t != tree.root) add_on(tree.b_cells[t], -subtree[t] / tree.b_measure[t]);
    for (int s : tree.children[t]) add_on(tree.b_cells[s], subtree[s] / tree.b_measure[s]);
    double sum = 0.0;
    for (double v : piece.g) sum += v;
    piece.integral = sum * vol;
  }
  return dec;
}

GridFunction decomposition_sum(const DomainTree& tree, const Decomposition& dec) {
  GridFunction out = make_function(tree.grid, 1, tree.mask);
  for (const NodePiece& piece : dec.pieces) {
    const auto& cells = tree.omega_cells[piece.node];
    for (std::size_t i = 0; i < cells.size(); ++i) out.at(0, cells[i]) += piece.g[i];
  }
  return out;
}

GridFunction hardy_tree_operator(const DomainTree& tree, const GridFunction& f) {
  if (f.components != 1) fail(errc::invalid_argument, "T: scalar f required");
  GridFunction out = make_function(tree.grid, 1, tree.mask);
  const double vol = tree.grid.cell_volume();
  for (int t = 0; t < tree.size(); ++t) {
    if (t == tree.root) continue;
    double abs_int = 0.0;
    const auto& bits = tree.w_bits[t];
    for (std::size_t w = 0; w < bits.size(); ++w) {
      std::uint64_t word = bits[w];
      while (word) {
        int b = std::countr_zero(word);
        word &= word - 1;
        std::int64_t c = static_cast<std::int64_t>(w * 64 + static_cast<std::size_t>(b));
        if (f.active(c)) abs_int += std::abs(f.at(0, c));
      }
    }
    abs_int *= vol;
    double coeff = abs_int / tree.w_measure[t];
    for (std::int64_t c : tree.b_cells[t]) out.at(0, c) += coeff;
  }
  return out;
}

GridFunction tree_weight(const DomainTree& tree) {
  GridFunction w = make_function(tree.grid, 1, tree.mask);
  for (std::int64_t c = 0; c < w.cells(); ++c)
    if (tree.mask[static_cast<std::size_t>(c)]) w.at(0, c) = 1.0;
  for (int t = 0; t < tree.size(); ++t) {
    if (t == tree.root) continue;
    double value = tree.b_measure[t] / tree.w_measure[t];
    for (std::int64_t c : tree.b_cells[t]) w.at(0, c) = value;
  }
  return w;
}

double hardy_bound_constant(double p, double overlap_bound) {
  if (!(p > 1.0)) fail(errc::invalid_argument, "hardy bound needs p > 1");
  return 2.0 * std::pow(p * overlap_bound / (p - 1.0), 1.0 / p);
}

double decomposition_bound_constant(double p, double overlap_bound) {
  if (!(p > 1.0)) fail(errc::invalid_argument, "decomposition bound needs p > 1");
  return std::pow(2.0, p) * overlap_bound *
         (1.0 + std::pow(2.0, p + 1.0) * p / (p - 1.0));
}

GridFunction random_field(const Grid& g, const std::vector<std::uint8_t>& mask,
                          std::uint64_t seed, bool zero_mean) {
  GridFunction f = make_function(g, 1, mask);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::int64_t count = 0;
  double sum = 0.0;
  for (std::int64_t c = 0; c < f.cells(); ++c)
    if (f.active(c)) {
      f.at(0, c) = uni(rng);
      sum += f.at(0, c);
      ++count;
    }
  if (zero_mean && count > 0) {
    double mean = sum / static_cast<double>(count);
    for (std::int64_t c = 0; c < f.cells(); ++c)
      if (f.active(c)) f.at(0, c) -= mean;
  }
  return f;
}

GridFunction smooth_field(const Grid& g, const std::vector<std::uint8_t>& mask,
                          std::uint64_t seed, bool zero_mean) {
  GridFunction f = make_function(g, 1, mask);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_int_distribution<int> mode(-2, 2);
  constexpr int waves = 6;
  constexpr double two_pi = 6.283185307179586476925287;
  double amp[waves], phase[waves], k[waves][kMaxDim];
  for (int w = 0; w < waves; ++w) {
    amp[w] = uni(rng);
    phase[w] = 0.5 * two_pi * uni(rng);
    for (int d = 0; d < g.dim; ++d)
      k[w][d] = two_pi * static_cast<double>(mode(rng)) /
                (g.h * static_cast<double>(g.shape[d]));
  }
  std::int64_t count = 0;
  double sum = 0.0;
  for (std::int64_t c = 0; c < f.cells(); ++c) {
    if (!f.active(c)) continue;
    const Vec x = g.center(c);
    double v = 0.0;
    for (int w = 0; w < waves; ++w) {
      double arg = phase[w];
      for (int d = 0; d < g.dim; ++d) arg += k[w][d] * (x[d] - g.origin[d]);
      v += amp[w] * std::cos(arg);
    }
    f.at(0, c) = v;
    sum += v;
    ++count;
  }
  if (zero_mean && count > 0) {
    const double mean = sum / static_cast<double>(count);
    for (std::int64_t c = 0; c < f.cells(); ++c)
      if (f.active(c)) f.at(0, c) -= mean;
  }
  return f;
}

BoundCheck verify_T_bound(const DomainTree& tree, double p, int trials,
                          std::uint64_t seed) {
  BoundCheck out;
  out.constant = hardy_bound_constant(p, tree.overlap_bound);
  out.trials = trials;
  for (int k = 0; k < trials; ++k) {
    GridFunction f = random_field(tree.grid, tree.mask, seed + static_cast<std::uint64_t>(k), false);
    double denom = weighted_lp_norm(f, nullptr, p);
    if (denom == 0.0) continue;
    GridFunction tf = hardy_tree_operator(tree, f);
    double ratio = weighted_lp_norm(tf, nullptr, p) / denom;
    out.worst_ratio = std::max(out.worst_ratio, ratio);
    if (ratio > out.constant) ++out.violations;
  }
  out.pass = out.violations == 0;
  return out;
}

DecompositionBoundCheck verify_decomposition_bound(const DomainTree& tree, double p,
                                                   int trials, std::uint64_t seed,
                                                   const GridFunction* hat_w1,
                                                   const GridFunction* hat_w2) {
  if ((hat_w1 == nullptr) != (hat_w2 == nullptr))
    fail(errc::invalid_argument, "provide both hat weights or neither");
  DecompositionBoundCheck out;
  out.weighted = hat_w1 != nullptr;
  out.check.trials = trials;

  const double vol = tree.grid.cell_volume();
  GridFunction omega = tree_weight(tree);

  if (out.weighted) {
    double sup = 0.0;
    for (std::int64_t c = 0; c < tree.grid.cell_count(); ++c) {
      if (!tree.mask[static_cast<std::size_t>(c)]) continue;
      double w1 = hat_w1->at(0, c), w2 = hat_w2->at(0, c);
      if (!(w1 > 0.0) || !(w2 > 0.0))
        fail(errc::invalid_weight, "hat weights must be positive on the mask");
      sup = std::max(sup, w1 / w2);
    }
    out.m_identity = sup;
  }

  for (int k = 0; k < trials; ++k) {
    GridFunction f = random_field(tree.grid, tree.mask, seed + static_cast<std::uint64_t>(k), true);
    GridFunction fw = f;
    if (out.weighted)
      for (std::int64_t c = 0; c < f.cells(); ++c)
        if (f.active(c)) fw.at(0, c) *= hat_w2->at(0, c);
    double denom = weighted_lp_norm(fw, nullptr, p);
    if (denom == 0.0) continue;

    Decomposition dec = decompose(tree, f);
    double lhs = 0.0;
    for (const NodePiece& piece : dec.pieces) {
      const auto& cells = tree.omega_cells[piece.node];
      for (std::size_t i = 0; i < cells.size(); ++i) {
        double w = omega.at(0, cells[i]);
        if (out.weighted) w *= hat_w1->at(0, cells[i]);
        lhs += std::pow(std::abs(piece.g[i] * w), p);
      }
    }
    lhs *= vol;

    double constant;
    if (out.weighted) {
      GridFunction tf = hardy_tree_operator(tree, f);
      for (std::int64_t c = 0; c < tf.cells(); ++c)
        if (tf.active(c)) tf.at(0, c) *= hat_w1->at(0, c);
      double r_t = weighted_lp_norm(tf, nullptr, p) / denom;
      out.m_hardy = std::max(out.m_hardy, r_t);
      constant = std::pow(2.0, p) * (tree.overlap_bound * std::pow(out.m_identity, p) +
                                     2.0 * std::pow(r_t, p));
    } else {
      constant = decomposition_bound_constant(p, tree.overlap_bound);
    }
    out.check.constant = constant;

    double ratio = lhs / std::pow(denom, p);
    out.check.worst_ratio = std::max(out.check.worst_ratio, ratio);
    if (ratio > constant) ++out.check.violations;
  }
  out.check.pass = out.check.violations == 0;
  return out;
}

}  // namespace divtree
