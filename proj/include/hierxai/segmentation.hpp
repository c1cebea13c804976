#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "hierxai/hierarchy.hpp"
#include "hierxai/pixel_graph.hpp"
#include "hierxai/union_find.hpp"

namespace hierxai {

namespace detail {

// Kruskal merge tree. Edges are visited by ascending weight, ties in the
// order given; every union of two components creates one node.
struct MergeTree {
  std::vector<NodeId> parent;
  std::vector<double> altitude;
  std::vector<std::size_t> merge_edge;  // per internal node, index into `edges`
};

inline MergeTree kruskal_merge_tree(std::size_t n_vertices, const std::vector<Edge>& edges) {
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return edges[a].weight < edges[b].weight; });

  MergeTree t;
  const std::size_t n_nodes = 2 * n_vertices - 1;
  t.parent.resize(n_nodes);
  t.altitude.assign(n_nodes, 0.0);
  std::iota(t.parent.begin(), t.parent.end(), NodeId{0});
  UnionFind uf(n_vertices);
  std::vector<NodeId> top(n_vertices);  // union-find root -> current tree node
  std::iota(top.begin(), top.end(), NodeId{0});
  NodeId next = n_vertices;
  for (std::size_t k : order) {
    if (next == n_nodes) break;
    const std::size_t ru = uf.find(edges[k].u), rv = uf.find(edges[k].v);
    if (ru == rv) continue;
    t.parent[top[ru]] = next;
    t.parent[top[rv]] = next;
    t.altitude[next] = edges[k].weight;
    t.merge_edge.push_back(k);
    top[uf.link(ru, rv)] = next;
    ++next;
  }
  if (next != n_nodes) throw std::invalid_argument("graph is not connected");
  return t;
}

// Removes internal nodes whose altitude equals their parent's altitude.
inline void canonize(std::size_t n_leaves, std::vector<NodeId>& parent, std::vector<double>& altitude) {
  const std::size_t n = parent.size();
  const NodeId root = n - 1;
  std::vector<bool> keep(n, true);
  for (NodeId i = n_leaves; i < root; ++i) keep[i] = altitude[i] != altitude[parent[i]];
  // Nearest kept ancestor, resolved top-down.
  std::vector<NodeId> target(n);
  for (NodeId i = n; i-- > 0;) target[i] = keep[i] ? i : target[parent[i]];
  std::vector<NodeId> new_id(n, 0);
  NodeId next = 0;
  for (NodeId i = 0; i < n; ++i)
    if (keep[i]) new_id[i] = next++;
  std::vector<NodeId> p(next);
  std::vector<double> a(next);
  for (NodeId i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    p[new_id[i]] = i == root ? new_id[i] : new_id[target[parent[i]]];
    a[new_id[i]] = altitude[i];
  }
  parent = std::move(p);
  altitude = std::move(a);
}

}  // namespace detail

/// Binary partition tree by Kruskal merging: ascending edge weight, ties in
/// canonical edge order. Altitude of each internal node is the weight of
/// the edge that created it.
inline Hierarchy build_bpt(const WeightedPixelGraph& g) {
  auto t = detail::kruskal_merge_tree(g.num_vertices(), g.edges);
  return Hierarchy(g.height, g.width, std::move(t.parent), std::move(t.altitude), HierarchyKind::bpt);
}

enum class WatershedAttribute { area, volume };

namespace detail {

// Per-node attribute of the Kruskal tree: pixel count, or the flooded
// volume sum over internal descendants m of area(m) * (alt(parent m) - alt(m)).
inline std::vector<double> merge_tree_attribute(const MergeTree& t, std::size_t n_leaves, WatershedAttribute attr) {
  const std::size_t n = t.parent.size();
  std::vector<double> area(n, 0.0);
  for (NodeId i = 0; i < n_leaves; ++i) area[i] = 1.0;
  for (NodeId i = 0; i + 1 < n; ++i) area[t.parent[i]] += area[i];
  if (attr == WatershedAttribute::area) return area;
  std::vector<double> volume(n, 0.0);
  for (NodeId i = n_leaves; i < n; ++i) volume[i] += area[i] * (t.altitude[t.parent[i]] - t.altitude[i]);
  for (NodeId i = n_leaves; i + 1 < n; ++i) volume[t.parent[i]] += volume[i];
  return volume;
}

// Minima of the edge weighting, as nodes of the Kruskal tree: maximal
// internal nodes whose internal descendants all share their altitude.
inline std::vector<bool> merge_tree_minima(const MergeTree& t, std::size_t n_leaves) {
  const std::size_t n = t.parent.size();
  std::vector<bool> flat(n, true);
  for (NodeId i = n_leaves; i + 1 < n; ++i)
    if (!flat[i] || t.altitude[i] != t.altitude[t.parent[i]]) flat[t.parent[i]] = false;
  std::vector<bool> minimum(n, false);
  for (NodeId i = n_leaves; i < n; ++i)
    minimum[i] = flat[i] && (i + 1 == n || t.altitude[i] < t.altitude[t.parent[i]]);
  return minimum;
}

// Extinction value of the minimum carried by each node (0 for nodes
// without a minimum). At each merge the child with the largest attribute
// keeps its minimum alive; the others die with their own attribute.
inline std::vector<double> extinction_values(const MergeTree& t, const std::vector<double>& attribute,
                                             const std::vector<bool>& minimum) {
  const std::size_t n = t.parent.size();
  const NodeId root = n - 1;
  std::vector<bool> has_minimum(minimum);
  for (NodeId i = 0; i < root; ++i)
    if (has_minimum[i]) has_minimum[t.parent[i]] = true;

  constexpr NodeId kNone = static_cast<NodeId>(-1);
  std::vector<NodeId> main_child(n, kNone);
  for (NodeId i = 0; i < root; ++i) {
    if (!has_minimum[i]) continue;
    NodeId& m = main_child[t.parent[i]];
    if (m == kNone || attribute[i] > attribute[m]) m = i;
  }
  std::vector<double> ext(n, 0.0);
  ext[root] = has_minimum[root] ? attribute[root] : 0.0;
  for (NodeId i = root; i-- > 0;) {
    if (!has_minimum[i]) continue;
    const NodeId p = t.parent[i];
    ext[i] = main_child[p] == i ? ext[p] : attribute[i];
  }
  return ext;
}

}  // namespace detail

/// Hierarchical watershed by area or volume. The Kruskal tree of the
/// graph is re-weighted: each minimum spanning tree edge gets the smallest
/// extinction value of the minima it separates (0 when one side holds no
/// minimum). The final hierarchy is the canonical merge tree of the
/// re-weighted spanning tree.
inline Hierarchy build_watershed(const WeightedPixelGraph& g, WatershedAttribute attr) {
  const std::size_t n_leaves = g.num_vertices();
  const auto t = detail::kruskal_merge_tree(n_leaves, g.edges);
  const auto attribute = detail::merge_tree_attribute(t, n_leaves, attr);
  const auto minimum = detail::merge_tree_minima(t, n_leaves);
  const auto ext = detail::extinction_values(t, attribute, minimum);

  std::vector<double> saliency(t.parent.size(), std::numeric_limits<double>::infinity());
  for (NodeId i = 0; i + 1 < t.parent.size(); ++i) saliency[t.parent[i]] = std::min(saliency[t.parent[i]], ext[i]);

  // Spanning-tree edges in Kruskal order carry the new weights.
  std::vector<Edge> mst;
  mst.reserve(t.merge_edge.size());
  for (std::size_t k = 0; k < t.merge_edge.size(); ++k) {
    const Edge& e = g.edges[t.merge_edge[k]];
    mst.push_back({e.u, e.v, saliency[n_leaves + k]});
  }
  auto w = detail::kruskal_merge_tree(n_leaves, mst);
  detail::canonize(n_leaves, w.parent, w.altitude);
  return Hierarchy(g.height, g.width, std::move(w.parent), std::move(w.altitude),
                   attr == WatershedAttribute::area ? HierarchyKind::watershed_area : HierarchyKind::watershed_volume);
}

inline Hierarchy build_hierarchy(const WeightedPixelGraph& g, HierarchyKind kind) {
  switch (kind) {
    case HierarchyKind::bpt: return build_bpt(g);
    case HierarchyKind::watershed_area: return build_watershed(g, WatershedAttribute::area);
    case HierarchyKind::watershed_volume: return build_watershed(g, WatershedAttribute::volume);
  }
  throw std::invalid_argument("unknown hierarchy kind");
}

}  // namespace hierxai
