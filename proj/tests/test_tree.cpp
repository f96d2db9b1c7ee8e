#include "doctest.h"

#include "divtree/tree.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

using namespace divtree;

namespace {

// Reference decomposition computed from first principles: membership by testing
// cell centers against the regions, S_t by explicit recursion, pieces as
// full-grid arrays. No DomainTree machinery involved.
struct NaiveResult {
  std::vector<std::vector<double>> g;
  std::vector<double> S;
};

NaiveResult naive_decompose(const Grid& grid, const std::vector<Region>& omegas,
                            const std::vector<Region>& connectors,
                            const std::vector<int>& parents,
                            const std::vector<double>& f_full) {
  const int n = static_cast<int>(omegas.size());
  const std::int64_t cells = grid.cell_count();
  const double vol = grid.cell_volume();

  std::vector<std::vector<char>> in_omega(n), in_b(n);
  std::vector<double> b_size(n, 0.0);
  for (int t = 0; t < n; ++t) {
    in_omega[t].assign(static_cast<std::size_t>(cells), 0);
    in_b[t].assign(static_cast<std::size_t>(cells), 0);
    for (std::int64_t c = 0; c < cells; ++c) {
      Vec x = grid.center(c);
      if (omegas[t].contains(x)) in_omega[t][static_cast<std::size_t>(c)] = 1;
      if (parents[t] != -1 && connectors[t].contains(x)) {
        in_b[t][static_cast<std::size_t>(c)] = 1;
        b_size[t] += vol;
      }
    }
  }
  std::vector<int> cover(static_cast<std::size_t>(cells), 0);
  for (std::int64_t c = 0; c < cells; ++c)
    for (int t = 0; t < n; ++t) cover[static_cast<std::size_t>(c)] += in_omega[t][static_cast<std::size_t>(c)];

  std::vector<std::vector<int>> kids(n);
  int root = -1;
  for (int t = 0; t < n; ++t)
    if (parents[t] == -1) root = t; else kids[parents[t]].push_back(t);

  auto own_integral = [&](int t) {
    double s = 0.0;
    for (std::int64_t c = 0; c < cells; ++c)
      if (in_omega[t][static_cast<std::size_t>(c)] && cover[static_cast<std::size_t>(c)] > 0)
        s += f_full[static_cast<std::size_t>(c)] / cover[static_cast<std::size_t>(c)];
    return s * vol;
  };
  NaiveResult out;
  out.S.assign(n, 0.0);
  std::function<double(int)> accumulate = [&](int t) {
    double s = own_integral(t);
    for (int k : kids[t]) s += accumulate(k);
    out.S[t] = s;
    return s;
  };
  accumulate(root);

  out.g.assign(n, std::vector<double>(static_cast<std::size_t>(cells), 0.0));
  for (int t = 0; t < n; ++t)
    for (std::int64_t c = 0; c < cells; ++c) {
      std::size_t i = static_cast<std::size_t>(c);
      double v = 0.0;
      if (in_omega[t][i] && cover[i] > 0) v = f_full[i] / cover[i];
      if (parents[t] != -1 && in_b[t][i]) v -= out.S[t] / b_size[t];
      for (int k : kids[t])
        if (in_b[k][i]) v += out.S[k] / b_size[k];
      out.g[t][i] = v;
    }
  return out;
}

Region interval(double a, double b) { return Region::box(make_box({a}, {b}), 1); }

// Three overlapping intervals on (0,4): root (0,2), middle (1,3) with
// connector (1,2), leaf (2.5,4) with connector (2.5,3).
DomainTree chain3(double h = 1.0 / 16) {
  Grid g = make_grid(make_box({0.0}, {4.0}), h, 1);
  std::vector<TreeNode> nodes(3);
  nodes[0].omega = interval(0.0, 2.0);
  nodes[1].parent = 0;
  nodes[1].omega = interval(1.0, 3.0);
  nodes[1].connector = interval(1.0, 2.0);
  nodes[2].parent = 1;
  nodes[2].omega = interval(2.5, 4.0);
  nodes[2].connector = interval(2.5, 3.0);
  return make_tree(g, std::move(nodes), 2.0);
}

GridFunction indicator(const DomainTree& tree, double a, double b) {
  GridFunction f = make_function(tree.grid, 1, tree.mask);
  for (std::int64_t c = 0; c < f.cells(); ++c)
    if (f.active(c) && tree.grid.center(c)[0] > a && tree.grid.center(c)[0] < b)
      f.at(0, c) = 1.0;
  return f;
}

double piece_value_at(const DomainTree& tree, const Decomposition& dec, int t,
                      std::int64_t cell) {
  const auto& cells = tree.omega_cells[t];
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i] == cell) return dec.pieces[t].g[i];
  return 0.0;
}

}  // namespace

TEST_CASE("chain fixture geometry") {
  DomainTree tree = chain3();
  CHECK(tree.size() == 3);
  CHECK(tree.root == 0);
  CHECK(mask_count(tree.mask) == 64);

  CHECK(tree.b_measure[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(tree.b_measure[2] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tree.w_measure[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(tree.w_measure[1] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(tree.w_measure[2] == doctest::Approx(1.5).epsilon(1e-14));

  // cover: 1 on (0,1), 2 on (1,2), 1 on (2,2.5), 2 on (2.5,3), 1 on (3,4)
  for (std::int64_t c = 0; c < 64; ++c) {
    double x = tree.grid.center(c)[0];
    int expect = (x > 1.0 && x < 2.0) || (x > 2.5 && x < 3.0) ? 2 : 1;
    CHECK(tree.cover[static_cast<std::size_t>(c)] == expect);
  }

  CHECK(tree.in_subtree_union(1, 40));   // (2.5,3) lies under the middle node
  CHECK(!tree.in_subtree_union(2, 0));

  CoverReport rep = validate_tree(tree);
  CHECK(rep.ok());
  CHECK(rep.min_cover == 1);
  CHECK(rep.max_cover == 2);
  CHECK(rep.uncovered_domain_cells == 0);
}

TEST_CASE("partition of unity") {
  DomainTree tree = chain3();
  auto parts = partition_of_unity(tree);
  REQUIRE(parts.size() == 3);
  for (std::int64_t c = 0; c < 64; ++c) {
    double sum = 0.0;
    for (const auto& phi : parts) sum += phi.at(0, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  }
  // x = 1.53125 sits in the first two nodes only
  std::int64_t c = 24;
  CHECK(parts[0].at(0, c) == doctest::Approx(0.5));
  CHECK(parts[1].at(0, c) == doctest::Approx(0.5));
  CHECK(parts[2].at(0, c) == 0.0);
}

TEST_CASE("worked example: indicator of (3,4)") {
  DomainTree tree = chain3();
  GridFunction f = indicator(tree, 3.0, 4.0);
  Decomposition dec = decompose(tree, f);

  CHECK(dec.off_mask_cells == 0);
  for (int t = 0; t < 3; ++t)
    CHECK(dec.pieces[t].subtree_integral == doctest::Approx(1.0).epsilon(1e-14));

  // g2 = f - 2 chi_(2.5,3),  g1 = -chi_(1,2) + 2 chi_(2.5,3),  g0 = chi_(1,2)
  for (std::int64_t c = 0; c < 64; ++c) {
    double x = tree.grid.center(c)[0];
    double e2 = (x > 3.0) ? 1.0 : (x > 2.5 && x < 3.0) ? -2.0 : 0.0;
    double e1 = (x > 1.0 && x < 2.0) ? -1.0 : (x > 2.5 && x < 3.0) ? 2.0 : 0.0;
    double e0 = (x > 1.0 && x < 2.0) ? 1.0 : 0.0;
    CHECK(piece_value_at(tree, dec, 2, c) == doctest::Approx(e2).epsilon(1e-13));
    CHECK(piece_value_at(tree, dec, 1, c) == doctest::Approx(e1).epsilon(1e-13));
    CHECK(piece_value_at(tree, dec, 0, c) == doctest::Approx(e0).epsilon(1e-13));
  }
  CHECK(dec.pieces[1].integral == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(dec.pieces[2].integral == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(dec.pieces[0].integral == doctest::Approx(1.0).epsilon(1e-14));

  GridFunction tf = hardy_tree_operator(tree, f);
  for (std::int64_t c = 0; c < 64; ++c) {
    double x = tree.grid.center(c)[0];
    double expect = (x > 1.0 && x < 2.0) ? 1.0 / 3.0 : (x > 2.5 && x < 3.0) ? 2.0 / 3.0 : 0.0;
    CHECK(tf.at(0, c) == doctest::Approx(expect).epsilon(1e-14));
  }

  GridFunction w = tree_weight(tree);
  for (std::int64_t c = 0; c < 64; ++c) {
    double x = tree.grid.center(c)[0];
    double expect = (x > 1.0 && x < 2.0) || (x > 2.5 && x < 3.0) ? 1.0 / 3.0 : 1.0;
    CHECK(w.at(0, c) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("constant field concentrates in the root piece") {
  DomainTree tree = chain3();
  GridFunction f = indicator(tree, -1.0, 5.0);
  Decomposition dec = decompose(tree, f);
  CHECK(dec.pieces[0].integral == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(dec.pieces[1].integral == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(dec.pieces[2].integral == doctest::Approx(0.0).epsilon(1e-13));

  GridFunction sum = decomposition_sum(tree, dec);
  for (std::int64_t c = 0; c < 64; ++c)
    CHECK(sum.at(0, c) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("random fields match the naive reference") {
  DomainTree tree = chain3();
  std::vector<Region> omegas = {interval(0, 2), interval(1, 3), interval(2.5, 4)};
  std::vector<Region> connectors = {Region(), interval(1, 2), interval(2.5, 3)};
  std::vector<int> parents = {-1, 0, 1};

  for (std::uint64_t seed : {11u, 12u, 13u}) {
    GridFunction f = random_field(tree.grid, tree.mask, seed, false);
    std::vector<double> f_full(static_cast<std::size_t>(f.cells()), 0.0);
    for (std::int64_t c = 0; c < f.cells(); ++c)
      if (f.active(c)) f_full[static_cast<std::size_t>(c)] = f.at(0, c);

    NaiveResult ref = naive_decompose(tree.grid, omegas, connectors, parents, f_full);
    Decomposition dec = decompose(tree, f);
    for (int t = 0; t < 3; ++t) {
      CHECK(dec.pieces[t].subtree_integral == doctest::Approx(ref.S[t]).epsilon(1e-12));
      const auto& cells = tree.omega_cells[t];
      for (std::size_t i = 0; i < cells.size(); ++i)
        CHECK(dec.pieces[t].g[i] ==
              doctest::Approx(ref.g[t][static_cast<std::size_t>(cells[i])]).epsilon(1e-12));
      // reference vanishes off the node
      double off = 0.0;
      std::size_t j = 0;
      for (std::int64_t c = 0; c < f.cells(); ++c) {
        if (j < cells.size() && cells[j] == c) { ++j; continue; }
        off = std::max(off, std::abs(ref.g[t][static_cast<std::size_t>(c)]));
      }
      CHECK(off == 0.0);
    }
  }
}

TEST_CASE("long overlapped chain: reconstruction and means") {
  // Omega_i = (i/2, i/2+1), B_i = (i/2, i/2+1/2), six nodes on (0,3.5)
  Grid g = make_grid(make_box({0.0}, {3.5}), 1.0 / 32, 1);
  std::vector<TreeNode> nodes(6);
  nodes[0].omega = interval(0.0, 1.0);
  for (int i = 1; i < 6; ++i) {
    nodes[i].parent = i - 1;
    nodes[i].omega = interval(0.5 * i, 0.5 * i + 1.0);
    nodes[i].connector = interval(0.5 * i, 0.5 * i + 0.5);
  }
  DomainTree tree = make_tree(g, std::move(nodes), 2.0);
  CHECK(validate_tree(tree).ok());

  for (std::uint64_t seed : {3u, 4u, 5u, 6u, 7u}) {
    GridFunction f = random_field(g, tree.mask, seed, true);
    Decomposition dec = decompose(tree, f);
    for (int t = 1; t < 6; ++t)
      CHECK(std::abs(dec.pieces[t].integral) < 1e-12);
    CHECK(std::abs(dec.pieces[0].integral - integrate(f)) < 1e-12);

    GridFunction sum = decomposition_sum(tree, dec);
    double worst = 0.0;
    for (std::int64_t c = 0; c < f.cells(); ++c)
      worst = std::max(worst, std::abs(sum.at(0, c) - (f.active(c) ? f.at(0, c) : 0.0)));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("two dimensional three box tree") {
  Grid g = make_grid(make_box({0.0, 0.0}, {2.5, 1.0}), 1.0 / 16, 2);
  std::vector<TreeNode> nodes(3);
  nodes[0].omega = Region::box(make_box({0.0, 0.0}, {1.0, 1.0}), 2);
  nodes[1].parent = 0;
  nodes[1].omega = Region::box(make_box({0.75, 0.0}, {1.75, 1.0}), 2);
  nodes[1].connector = Region::box(make_box({0.75, 0.0}, {1.0, 1.0}), 2);
  nodes[2].parent = 1;
  nodes[2].omega = Region::box(make_box({1.5, 0.0}, {2.5, 1.0}), 2);
  nodes[2].connector = Region::box(make_box({1.5, 0.0}, {1.75, 1.0}), 2);
  DomainTree tree = make_tree(g, std::move(nodes), 2.0);
  CHECK(validate_tree(tree).ok());
  CHECK(mask_count(tree.mask) == 40 * 16);

  GridFunction f = random_field(g, tree.mask, 99, true);
  Decomposition dec = decompose(tree, f);
  GridFunction sum = decomposition_sum(tree, dec);
  double worst = 0.0;
  for (std::int64_t c = 0; c < f.cells(); ++c)
    worst = std::max(worst, std::abs(sum.at(0, c) - (f.active(c) ? f.at(0, c) : 0.0)));
  CHECK(worst < 1e-12);
  CHECK(std::abs(dec.pieces[1].integral) < 1e-12);
  CHECK(std::abs(dec.pieces[2].integral) < 1e-12);
}

TEST_CASE("operator bound holds over random trials") {
  DomainTree tree = chain3();
  for (double p : {1.5, 2.0, 3.0}) {
    BoundCheck bc = verify_T_bound(tree, p, 40, 1000);
    CHECK(bc.pass);
    CHECK(bc.violations == 0);
    CHECK(bc.worst_ratio > 0.0);
    CHECK(bc.worst_ratio <= bc.constant);
  }
}

TEST_CASE("decomposition bound holds over random trials") {
  DomainTree tree = chain3();
  for (double p : {1.5, 2.0, 3.0}) {
    DecompositionBoundCheck dbc = verify_decomposition_bound(tree, p, 40, 2000);
    CHECK(dbc.check.pass);
    CHECK(!dbc.weighted);
    CHECK(dbc.check.constant == doctest::Approx(decomposition_bound_constant(p, 2.0)));
  }

  // trivial hat weights reduce to the identity-factor form
  GridFunction one = make_function(tree.grid, 1, tree.mask);
  for (std::int64_t c = 0; c < one.cells(); ++c) one.at(0, c) = 1.0;
  DecompositionBoundCheck dbc = verify_decomposition_bound(tree, 2.0, 20, 3000, &one, &one);
  CHECK(dbc.weighted);
  CHECK(dbc.m_identity == doctest::Approx(1.0));
  CHECK(dbc.m_hardy > 0.0);
  CHECK(dbc.m_hardy <= hardy_bound_constant(2.0, 2.0));
  CHECK(dbc.check.pass);
}

TEST_CASE("bound constants") {
  CHECK(decomposition_bound_constant(2.0, 2.0) == doctest::Approx(136.0).epsilon(1e-15));
  CHECK(hardy_bound_constant(2.0, 2.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(hardy_bound_constant(2.0, 1.0) == doctest::Approx(2.8284271247461903).epsilon(1e-15));
  CHECK_THROWS_WITH_AS(hardy_bound_constant(1.0, 2.0),
                       doctest::Contains("invalid-argument"), Error);
}

TEST_CASE("tail node absorbs off mask mass") {
  // covering stops at 3.5 while f is active on all of (0,4)
  Grid g = make_grid(make_box({0.0}, {4.0}), 1.0 / 16, 1);
  auto build = [&](int tail) {
    std::vector<TreeNode> nodes(3);
    nodes[0].omega = interval(0.0, 2.0);
    nodes[1].parent = 0;
    nodes[1].omega = interval(1.0, 3.0);
    nodes[1].connector = interval(1.0, 2.0);
    nodes[2].parent = 1;
    nodes[2].omega = interval(2.5, 3.5);
    nodes[2].connector = interval(2.5, 3.0);
    return make_tree(g, std::move(nodes), 2.0, tail);
  };

  std::vector<std::uint8_t> all(64, 1);
  GridFunction f = make_function(g, 1, all);
  for (std::int64_t c = 0; c < 64; ++c)
    if (g.center(c)[0] > 3.0) f.at(0, c) = 1.0;

  // folding shifts the truncated mass into the leaf's functional: subtree
  // integrals see the full mass, and the leaf's own piece absorbs the defect
  DomainTree with_tail = build(2);
  Decomposition dec = decompose(with_tail, f);
  CHECK(dec.off_mask_cells == 8);
  CHECK(dec.off_mask_mass == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(dec.pieces[0].subtree_integral == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(dec.pieces[1].integral) < 1e-14);
  CHECK(dec.pieces[2].integral == doctest::Approx(-0.5).epsilon(1e-14));

  // without folding every non-root piece keeps zero mean and the root only
  // carries the on-mask mass
  DomainTree without = build(-1);
  Decomposition dec2 = decompose(without, f);
  CHECK(dec2.off_mask_mass == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(dec2.pieces[0].subtree_integral == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(dec2.pieces[1].integral) < 1e-14);
  CHECK(std::abs(dec2.pieces[2].integral) < 1e-14);

  std::vector<std::uint8_t> domain = all;
  CoverReport rep = validate_tree(with_tail, &domain);
  CHECK(rep.uncovered_domain_cells == 8);
  CHECK(rep.ok());  // truncation is reported, not a structural failure
}

TEST_CASE("malformed trees are rejected") {
  Grid g = make_grid(make_box({0.0}, {4.0}), 1.0 / 16, 1);

  auto tree_with = [&](std::vector<int> parents) {
    std::vector<TreeNode> nodes(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i) {
      nodes[i].parent = parents[i];
      nodes[i].omega = interval(0.0, 2.0);
      nodes[i].connector = interval(0.5, 1.0 + 0.1 * static_cast<double>(i));
    }
    return make_tree(g, std::move(nodes), 2.0);
  };

  CHECK_THROWS_WITH_AS(tree_with({-1, -1}), doctest::Contains("malformed-tree"), Error);
  CHECK_THROWS_WITH_AS(tree_with({-1, 7}), doctest::Contains("malformed-tree"), Error);
  CHECK_THROWS_WITH_AS(tree_with({-1, 2, 1}), doctest::Contains("malformed-tree"), Error);
  CHECK_THROWS_WITH_AS(tree_with({0}), doctest::Contains("malformed-tree"), Error);

  std::vector<TreeNode> empty_omega(1);
  empty_omega[0].omega = interval(10.0, 11.0);
  CHECK_THROWS_WITH_AS(make_tree(g, std::move(empty_omega), 2.0),
                       doctest::Contains("empty-domain"), Error);

  std::vector<TreeNode> thin(2);
  thin[0].omega = interval(0.0, 2.0);
  thin[1].parent = 0;
  thin[1].omega = interval(1.0, 3.0);
  thin[1].connector = interval(1.001, 1.002);
  CHECK_THROWS_WITH_AS(make_tree(g, std::move(thin), 2.0),
                       doctest::Contains("degenerate-connector"), Error);
}

TEST_CASE("validate_tree flags broken coverings") {
  Grid g = make_grid(make_box({0.0}, {4.0}), 1.0 / 16, 1);

  // two siblings with identical connectors: disjointness and overlap both fail
  std::vector<TreeNode> dup(3);
  dup[0].omega = interval(0.0, 2.0);
  for (int i : {1, 2}) {
    dup[i].parent = 0;
    dup[i].omega = interval(1.0, 3.0);
    dup[i].connector = interval(1.0, 1.5);
  }
  DomainTree t1 = make_tree(g, std::move(dup), 2.0);
  CoverReport r1 = validate_tree(t1);
  CHECK(!r1.disjoint_ok);
  CHECK(!r1.cover_ok);
  CHECK(r1.max_cover == 3);
  CHECK(!r1.ok());
  CHECK(!r1.detail.empty());

  // connector sticking out of its own node
  std::vector<TreeNode> stick(2);
  stick[0].omega = interval(0.0, 3.0);
  stick[1].parent = 0;
  stick[1].omega = interval(2.5, 4.0);
  stick[1].connector = interval(2.4, 3.0);
  DomainTree t2 = make_tree(g, std::move(stick), 2.0);
  CHECK(!validate_tree(t2).connectors_ok);
  CHECK_THROWS_WITH_AS(decompose(t2, random_field(g, t2.mask, 1, false)),
                       doctest::Contains("containment"), Error);
}
