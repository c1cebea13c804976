#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hierxai/pixel_graph.hpp"

using namespace hierxai;

TEST(Grid, EdgeCountAndOrder) {
  for (auto [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 2}, {2, 2}, {3, 5}, {7, 4}}) {
    const auto g = make_grid_graph(h, w, std::vector<double>(grid_edge_count(h, w), 1.0));
    EXPECT_EQ(g.edges.size(), h * (w - 1) + (h - 1) * w);
  }
  const auto g = make_grid_graph(2, 3, {0, 1, 2, 3, 4, 5, 6});
  const std::vector<std::pair<std::size_t, std::size_t>> expected{{0, 1}, {0, 3}, {1, 2}, {1, 4}, {2, 5}, {3, 4}, {4, 5}};
  ASSERT_EQ(g.edges.size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    EXPECT_EQ(g.edges[k].u, expected[k].first);
    EXPECT_EQ(g.edges[k].v, expected[k].second);
    EXPECT_EQ(g.edges[k].weight, double(k));
  }
}

TEST(Grid, RejectsBadInput) {
  EXPECT_THROW(make_grid_graph(1, 1, {}), std::invalid_argument);
  EXPECT_THROW(make_grid_graph(2, 2, {1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(make_grid_graph(1, 2, {-1.0}), std::invalid_argument);
  EXPECT_THROW(make_grid_graph(1, 2, {NAN}), std::invalid_argument);
}

TEST(Guidance, Examples) {
  const auto zero = weight_from_guidance(3, 3, GuidanceMap(3, 3, std::vector<float>(9, 0.0f), GuidanceKind::edge));
  for (const auto& e : zero.edges) EXPECT_EQ(e.weight, 0.0);

  const auto a = weight_from_guidance(1, 2, GuidanceMap(1, 2, {0.0f, 1.0f}, GuidanceKind::edge));
  ASSERT_EQ(a.edges.size(), 1u);
  EXPECT_DOUBLE_EQ(a.edges[0].weight, 0.5);

  const auto b = weight_from_guidance(1, 2, GuidanceMap(1, 2, {-0.4f, 0.2f}, GuidanceKind::attribution));
  EXPECT_NEAR(b.edges[0].weight, 0.3, 1e-7);

  const auto m = weight_from_guidance(1, 2, GuidanceMap(1, 2, {-0.4f, 0.2f}, GuidanceKind::attribution), EdgeCombine::max);
  EXPECT_NEAR(m.edges[0].weight, 0.4, 1e-7);
}

TEST(Guidance, Errors) {
  EXPECT_THROW(weight_from_guidance(2, 3, GuidanceMap(3, 2, std::vector<float>(6), GuidanceKind::edge)), std::invalid_argument);
  EXPECT_THROW(weight_from_guidance(1, 2, GuidanceMap(1, 2, {-1.0f, -1.0f}, GuidanceKind::edge)), std::invalid_argument);
  EXPECT_THROW(GuidanceMap(1, 2, {0.0f, INFINITY}, GuidanceKind::edge), std::invalid_argument);
}

TEST(Guidance, ScalingScalesWeights) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<float> v(20);
  for (auto& x : v) x = u(rng);
  std::vector<float> v2 = v;
  for (auto& x : v2) x *= 4.0f;
  const auto g1 = weight_from_guidance(4, 5, GuidanceMap(4, 5, v, GuidanceKind::attribution));
  const auto g2 = weight_from_guidance(4, 5, GuidanceMap(4, 5, v2, GuidanceKind::attribution));
  for (std::size_t k = 0; k < g1.edges.size(); ++k) EXPECT_NEAR(g2.edges[k].weight, 4.0 * g1.edges[k].weight, 1e-6);
}

TEST(Sobel, ConstantImageIsZero) {
  const auto g = sobel_edge_map(Image(5, 5, 3, 0.7f));
  for (float v : g.values) EXPECT_EQ(v, 0.0f);
}

TEST(Sobel, BrightCenterByHand) {
  Image img(3, 3, 1, 0.0f);
  img.at(0, 1, 1) = 1.0f;
  const auto g = sobel_edge_map(img);
  // corners |(1,1)| = sqrt 2, edge midpoints 2, center 0; peak 2
  const float c = float(std::sqrt(2.0) / 2.0);
  const std::vector<float> expected{c, 1, c, 1, 0, 1, c, 1, c};
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(g.values[i], expected[i], 1e-6) << i;
}

TEST(Sobel, VerticalStep) {
  Image img(6, 8, 1, 0.0f);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 4; x < 8; ++x) img.at(0, y, x) = 1.0f;
  const auto g = sobel_edge_map(img);
  for (std::size_t y = 0; y < 6; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      const float v = g.values[y * 8 + x];
      if (x == 3 || x == 4)
        EXPECT_FLOAT_EQ(v, 1.0f);
      else
        EXPECT_EQ(v, 0.0f);
    }
}
