#include <gtest/gtest.h>

#include <random>

#include "hierxai/segmentation.hpp"
#include "hierxai/shaping.hpp"
#include "support/brute_force.hpp"

using namespace hierxai;

namespace {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

EdgeList path_edges(std::size_t n) {
  EdgeList e;
  for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
  return e;
}

std::vector<bf::LevelComponent> components_of(const ShapeTree& t) {
  std::vector<bf::LevelComponent> out;
  for (std::size_t c = 0; c < t.num_components(); ++c) {
    const auto m = t.members(c);
    out.push_back({t.level[c], {m.begin(), m.end()}});
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(MaxTree, PathByHand) {
  const std::vector<double> w{5, 1, 3};
  const ShapeTree t = build_max_tree(w, bf::adjacency(3, path_edges(3)));
  ASSERT_EQ(t.num_components(), 3u);
  const std::vector<bf::LevelComponent> expected{{1, {0, 1, 2}}, {3, {2}}, {5, {0}}};
  EXPECT_EQ(components_of(t), expected);
  EXPECT_EQ(t.level[0], 1.0);
  EXPECT_EQ(t.parent[0], 0u);
}

TEST(MaxTree, EqualAndIncreasing) {
  const std::vector<double> flat(5, 2.0);
  const ShapeTree a = build_max_tree(flat, bf::adjacency(5, path_edges(5)));
  EXPECT_EQ(a.num_components(), 1u);
  EXPECT_EQ(a.members(0).size(), 5u);

  const std::vector<double> inc{0, 1, 2, 3, 4};
  const ShapeTree b = build_max_tree(inc, bf::adjacency(5, path_edges(5)));
  EXPECT_EQ(b.num_components(), 5u);
  for (std::size_t c = 1; c < 5; ++c) EXPECT_EQ(b.parent[c], c - 1);
}

TEST(MaxTree, ParentPrecedesChild) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    const auto w = bf::random_levels(n, 0, 9, rng);
    const ShapeTree t = build_max_tree(w, bf::adjacency(n, bf::random_tree(n, rng)));
    for (std::size_t c = 1; c < t.num_components(); ++c) {
      EXPECT_LT(t.parent[c], c);
      EXPECT_LT(t.level[t.parent[c]], t.level[c]);
    }
  }
}

TEST(MaxTree, MatchesLevelSetEnumeration) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    const auto edges = bf::random_tree(n, rng);
    const auto w = bf::random_levels(n, 0, 5, rng);
    const ShapeTree t = build_max_tree(w, bf::adjacency(n, edges));
    ASSERT_EQ(components_of(t), bf::upper_level_components(w, edges)) << "trial " << trial;
  }
}

TEST(MaxTree, RejectsDisconnected) {
  const std::vector<double> w{1, 2};
  EXPECT_THROW(build_max_tree(w, {{}, {}}), std::invalid_argument);
  EXPECT_THROW(build_max_tree(w, {{}}), std::invalid_argument);
}

TEST(Persistence, PathByHand) {
  const std::vector<double> w{5, 1, 3};
  const ShapeTree t = build_max_tree(w, bf::adjacency(3, path_edges(3)));
  EXPECT_EQ(persistence(t), (std::vector<double>{4, 0, 2}));
  EXPECT_EQ(persistence(t, PersistenceMode::branch), (std::vector<double>{4, 4, 2}));
}

TEST(Persistence, SingleVertex) {
  const std::vector<double> w{7};
  EXPECT_EQ(persistence(build_max_tree(w, {{}})), (std::vector<double>{0}));
}

TEST(Persistence, EqualMaximaElderIsLowerId) {
  // peaks 0 and 2 tie at 3, meet at 1; the global minimum is 0
  const std::vector<double> w{3, 1, 3, 0};
  const ShapeTree t = build_max_tree(w, bf::adjacency(4, path_edges(4)));
  EXPECT_EQ(persistence(t), (std::vector<double>{3, 1, 2, 0}));
  EXPECT_EQ(persistence(t), bf::sweep_persistence(w, path_edges(4)));
}

TEST(Persistence, MatchesLevelSweep) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    const auto edges = bf::random_tree(n, rng);
    const auto w = bf::random_levels(n, 0, 9, rng);
    const ShapeTree t = build_max_tree(w, bf::adjacency(n, edges));
    ASSERT_EQ(persistence(t), bf::sweep_persistence(w, edges)) << "trial " << trial;
    ASSERT_EQ(persistence(t, PersistenceMode::branch), bf::sweep_persistence(w, edges, true)) << "trial " << trial;
  }
}

TEST(Persistence, NonNegativeAndBoundedByRange) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 30;
    const auto w = bf::random_levels(n, 0, 9, rng);
    const auto p = persistence(build_max_tree(w, bf::adjacency(n, bf::random_tree(n, rng))));
    const double range = *std::max_element(w.begin(), w.end()) - *std::min_element(w.begin(), w.end());
    for (double x : p) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, range);
    }
    EXPECT_EQ(*std::max_element(p.begin(), p.end()), range);
  }
}

TEST(Aggregate, PathSum) {
  // leaves 0,1 under root 2
  const Hierarchy h(1, 2, {2, 2, 2}, {0, 0, 1}, HierarchyKind::bpt);
  const std::vector<double> pers{4, 1, 2};
  EXPECT_EQ(aggregate_nodes(h, pers), (std::vector<double>{6, 3, 2}));
  const ScoreMap s = aggregate_scores(h, pers);
  EXPECT_EQ(s.score, (std::vector<float>{6, 3}));
  EXPECT_EQ(s.provenance.hierarchy, "bpt");
  EXPECT_EQ(aggregate_scores(h, std::vector<double>(3, 0.0)).score, (std::vector<float>{0, 0}));
  EXPECT_THROW(aggregate_scores(h, std::vector<double>{-1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(aggregate_nodes(h, std::vector<double>{0, 0}), std::invalid_argument);
}

TEST(Aggregate, TelescopesAndIsMonotone) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> wt(grid_edge_count(4, 4));
    for (auto& x : wt) x = double(rng() % 7);
    const Hierarchy h = build_bpt(make_grid_graph(4, 4, wt));
    const auto attrs = bf::random_levels(h.num_nodes(), 0, 9, rng);
    const auto pers = persistence(build_shape_tree(h, attrs));
    const auto agg = aggregate_nodes(h, pers);
    for (NodeId n = 0; n < h.num_nodes(); ++n) {
      double sum = 0;
      for (NodeId m = n;; m = h.parent(m)) {
        sum += pers[m];
        if (m == h.root()) break;
      }
      EXPECT_DOUBLE_EQ(agg[n], sum);
      if (n != h.root()) {
        EXPECT_GE(agg[n], agg[h.parent(n)]);
      }
    }
  }
}

TEST(Aggregate, ImportantChildOutranksSibling) {
  // 1x4 chain tree: node 4 = {p2,p3}, node 5 = {p0,p1}, root 6
  const Hierarchy h = build_bpt(make_grid_graph(1, 4, {2, 5, 1}));
  const std::vector<double> attrs{0, 0, 0, 0, 5, 2, 1};
  const ShapeTree t = build_shape_tree(h, attrs);
  const ScoreMap s = aggregate_scores(h, persistence(t));
  EXPECT_GT(s.score[2], s.score[0]);
  EXPECT_EQ(s.score[2], s.score[3]);
  EXPECT_EQ(s.score[0], s.score[1]);
}
