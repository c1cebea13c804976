#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hierxai/image.hpp"

namespace hierxai {

enum class GuidanceKind { edge, attribution };

/// Per-pixel field that defines edge dissimilarities: edge strength, or a
/// raw (signed) attribution map.
struct GuidanceMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;
  GuidanceKind kind = GuidanceKind::edge;

  GuidanceMap() = default;
  GuidanceMap(std::size_t h, std::size_t w, std::vector<float> v, GuidanceKind k)
      : height(h), width(w), values(std::move(v)), kind(k) {
    if (values.size() != height * width) throw std::invalid_argument("guidance length mismatch");
    for (float x : values)
      if (!std::isfinite(x)) throw std::invalid_argument("guidance contains non-finite values");
  }
};

struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;

  bool operator==(const Edge&) const = default;
};

/// 4-adjacency grid graph. Edges are in canonical order: for each pixel in
/// row-major order, its right edge (if any) then its down edge (if any).
struct WeightedPixelGraph {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Edge> edges;

  std::size_t num_vertices() const { return height * width; }
};

inline std::size_t grid_edge_count(std::size_t h, std::size_t w) { return h * (w - 1) + (h - 1) * w; }

/// Grid topology with caller-supplied weights in canonical edge order.
inline WeightedPixelGraph make_grid_graph(std::size_t h, std::size_t w, const std::vector<double>& weights) {
  if (h == 0 || w == 0 || h * w < 2) throw std::invalid_argument("grid needs at least two pixels");
  if (weights.size() != grid_edge_count(h, w)) throw std::invalid_argument("weight count does not match grid edges");
  WeightedPixelGraph g{h, w, {}};
  g.edges.reserve(weights.size());
  std::size_t k = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      if (x + 1 < w) g.edges.push_back({p, p + 1, weights[k++]});
      if (y + 1 < h) g.edges.push_back({p, p + w, weights[k++]});
    }
  for (const auto& e : g.edges)
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) throw std::invalid_argument("edge weights must be finite and >= 0");
  return g;
}

enum class EdgeCombine { mean, max };

/// Edge weight from endpoint guidance values: mean (default) or max of
/// f(g[u]), f(g[v]), with f = |.| for attribution maps.
inline WeightedPixelGraph weight_from_guidance(std::size_t h, std::size_t w, const GuidanceMap& g,
                                               EdgeCombine combine = EdgeCombine::mean) {
  if (g.height != h || g.width != w) throw std::invalid_argument("guidance dimensions do not match image");
  std::vector<double> weights;
  weights.reserve(grid_edge_count(h, w));
  auto f = [&](std::size_t p) {
    const double v = g.values[p];
    return g.kind == GuidanceKind::attribution ? std::abs(v) : v;
  };
  auto combine_fn = [&](std::size_t a, std::size_t b) {
    return combine == EdgeCombine::mean ? (f(a) + f(b)) / 2.0 : std::max(f(a), f(b));
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      if (x + 1 < w) weights.push_back(combine_fn(p, p + 1));
      if (y + 1 < h) weights.push_back(combine_fn(p, p + w));
    }
  if (g.kind == GuidanceKind::edge)
    for (double& v : weights)
      if (v < 0.0) throw std::invalid_argument("edge guidance must be non-negative");
  return make_grid_graph(h, w, weights);
}

/// Gradient magnitude of the luminance (3x3 Sobel, replicated borders),
/// scaled so the maximum is 1. A flat image gives an all-zero map.
inline GuidanceMap sobel_edge_map(const Image& img) {
  const Image px = img.channels() == 1 ? denormalize(img) : convert_channels(denormalize(img), 1);
  const std::size_t h = px.height(), w = px.width();
  auto lum = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return static_cast<double>(px.at(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
  };
  std::vector<double> mag(h * w);
  double peak = 0.0;
  for (std::size_t yy = 0; yy < h; ++yy)
    for (std::size_t xx = 0; xx < w; ++xx) {
      const auto y = static_cast<std::ptrdiff_t>(yy), x = static_cast<std::ptrdiff_t>(xx);
      const double gx = (lum(y - 1, x + 1) + 2 * lum(y, x + 1) + lum(y + 1, x + 1)) -
                        (lum(y - 1, x - 1) + 2 * lum(y, x - 1) + lum(y + 1, x - 1));
      const double gy = (lum(y + 1, x - 1) + 2 * lum(y + 1, x) + lum(y + 1, x + 1)) -
                        (lum(y - 1, x - 1) + 2 * lum(y - 1, x) + lum(y - 1, x + 1));
      const double m = std::sqrt(gx * gx + gy * gy);
      mag[yy * w + xx] = m;
      peak = std::max(peak, m);
    }
  std::vector<float> values(h * w, 0.0f);
  if (peak > 0.0)
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(mag[i] / peak);
  return GuidanceMap(h, w, std::move(values), GuidanceKind::edge);
}

}  // namespace hierxai
