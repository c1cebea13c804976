#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hierxai/hierarchy.hpp"
#include "hierxai/union_find.hpp"

namespace hierxai {

/// Max-tree of a vertex-weighted graph: one component per connected
/// component of an upper level set {v : w(v) >= level} that contains a
/// vertex of exactly that level. Components are numbered so that a parent
/// precedes its children; component 0 is the root.
struct ShapeTree {
  std::vector<double> level;
  std::vector<std::size_t> parent;
  std::vector<std::size_t> vertex_component;  // component where each vertex first appears

  std::size_t num_components() const { return level.size(); }
  std::size_t num_vertices() const { return vertex_component.size(); }

  /// All vertices of the component, i.e. of its whole subtree.
  std::vector<std::size_t> members(std::size_t c) const {
    std::vector<bool> in(num_components(), false);
    in[c] = true;
    for (std::size_t k = c + 1; k < num_components(); ++k) in[k] = in[parent[k]];
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < num_vertices(); ++v)
      if (in[vertex_component[v]]) out.push_back(v);
    return out;
  }
};

/// Max-tree of an arbitrary undirected graph given as adjacency lists.
inline ShapeTree build_max_tree(std::span<const double> weight, const std::vector<std::vector<std::size_t>>& adjacency) {
  const std::size_t n = weight.size();
  if (adjacency.size() != n) throw std::invalid_argument("adjacency size does not match weights");
  if (n == 0) return {};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return weight[a] > weight[b]; });

  // Union-find construction: every processed vertex becomes the parent of
  // the trees of its already-processed neighbours.
  std::vector<std::size_t> par(n);
  std::iota(par.begin(), par.end(), std::size_t{0});
  std::vector<bool> done(n, false);
  UnionFind uf(n);
  std::vector<std::size_t> repr(n);  // union-find root -> tree root vertex
  std::iota(repr.begin(), repr.end(), std::size_t{0});
  for (std::size_t v : order) {
    done[v] = true;
    std::size_t set_v = uf.find(v);
    for (std::size_t u : adjacency[v]) {
      if (!done[u]) continue;
      const std::size_t set_u = uf.find(u);
      if (set_u == set_v) continue;
      par[repr[set_u]] = v;
      set_v = uf.link(set_u, set_v);
      repr[set_v] = v;
    }
  }
  // Point every vertex at the canonical vertex of its level component.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t v = *it;
    const std::size_t q = par[v];
    if (weight[par[q]] == weight[q]) par[v] = par[q];
  }
  auto canonical = [&](std::size_t v) { return par[v] == v || weight[par[v]] != weight[v]; };

  ShapeTree t;
  std::vector<std::size_t> comp_of(n, static_cast<std::size_t>(-1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t v = *it;
    if (!canonical(v)) continue;
    const std::size_t id = t.level.size();
    comp_of[v] = id;
    t.level.push_back(weight[v]);
    t.parent.push_back(par[v] == v ? id : comp_of[par[v]]);
  }
  for (std::size_t c = 1; c < t.parent.size(); ++c)
    if (t.parent[c] == c) throw std::invalid_argument("graph is not connected");
  t.vertex_component.resize(n);
  for (std::size_t v = 0; v < n; ++v) t.vertex_component[v] = canonical(v) ? comp_of[v] : comp_of[par[v]];
  return t;
}

/// Adjacency of the hierarchy viewed as a graph: nodes are vertices,
/// parent-child pairs are edges.
inline std::vector<std::vector<std::size_t>> hierarchy_adjacency(const Hierarchy& h) {
  std::vector<std::vector<std::size_t>> adj(h.num_nodes());
  for (NodeId n = 0; n < h.num_nodes(); ++n) {
    if (n == h.root()) continue;
    adj[n].push_back(h.parent(n));
    adj[h.parent(n)].push_back(n);
  }
  return adj;
}

inline ShapeTree build_shape_tree(const Hierarchy& h, std::span<const double> attributes) {
  if (attributes.size() != h.num_nodes()) throw std::invalid_argument("attribute vector length does not match hierarchy");
  return build_max_tree(attributes, hierarchy_adjacency(h));
}

enum class PersistenceMode {
  first_appearance,  // level where the vertex first appears minus its branch's death level
  branch,            // full branch length for every vertex of the branch
};

inline PersistenceMode parse_persistence_mode(const std::string& s) {
  if (s == "first_appearance") return PersistenceMode::first_appearance;
  if (s == "branch") return PersistenceMode::branch;
  throw std::invalid_argument("unknown persistence mode: " + s);
}

/// Elder-rule persistence of every graph vertex. Each leaf component of
/// the max-tree starts a branch; where branches meet, the one with the
/// higher peak survives (equal peaks: the lower peak vertex id survives)
/// and the others die at the merge level. The surviving global branch dies
/// at the minimum level.
inline std::vector<double> persistence(const ShapeTree& t, PersistenceMode mode = PersistenceMode::first_appearance) {
  const std::size_t k = t.num_components();
  if (k == 0) return {};
  // Peak key per component: (peak level, lowest vertex id at that peak).
  std::vector<double> peak(k, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> peak_vertex(k, static_cast<std::size_t>(-1));
  std::vector<bool> has_child(k, false);
  for (std::size_t c = 1; c < k; ++c) has_child[t.parent[c]] = true;
  for (std::size_t v = 0; v < t.num_vertices(); ++v) {
    const std::size_t c = t.vertex_component[v];
    if (has_child[c]) continue;
    peak[c] = t.level[c];
    peak_vertex[c] = std::min(peak_vertex[c], v);
  }
  auto elder = [&](std::size_t a, std::size_t b) {
    if (peak[a] != peak[b]) return peak[a] > peak[b];
    return peak_vertex[a] < peak_vertex[b];
  };
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> survivor(k, kNone);
  for (std::size_t c = k; c-- > 1;) {
    const std::size_t p = t.parent[c];
    if (survivor[p] == kNone || elder(c, survivor[p])) survivor[p] = c;
    if (survivor[p] == c) {
      peak[p] = peak[c];
      peak_vertex[p] = peak_vertex[c];
    }
  }
  std::vector<double> death(k);
  death[0] = t.level[0];
  for (std::size_t c = 1; c < k; ++c) {
    const std::size_t p = t.parent[c];
    death[c] = survivor[p] == c ? death[p] : t.level[p];
  }
  std::vector<double> out(t.num_vertices());
  for (std::size_t v = 0; v < out.size(); ++v) {
    const std::size_t c = t.vertex_component[v];
    out[v] = (mode == PersistenceMode::first_appearance ? t.level[c] : peak[c]) - death[c];
  }
  return out;
}

struct ScoreProvenance {
  std::string hierarchy;
  std::string metric;
  std::size_t min_area = 1;
};

/// Per-pixel aggregated importance.
struct ScoreMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> score;
  ScoreProvenance provenance;

  float at(std::size_t y, std::size_t x) const { return score[y * width + x]; }
  float max() const { return score.empty() ? 0.0f : *std::max_element(score.begin(), score.end()); }
};

/// Sum of node persistences along the root-to-node path; pixel score is
/// the sum at its leaf.
inline std::vector<double> aggregate_nodes(const Hierarchy& h, std::span<const double> pers) {
  if (pers.size() != h.num_nodes()) throw std::invalid_argument("persistence length does not match hierarchy");
  std::vector<double> agg(h.num_nodes());
  for (NodeId n = h.num_nodes(); n-- > 0;) agg[n] = pers[n] + (n == h.root() ? 0.0 : agg[h.parent(n)]);
  return agg;
}

inline ScoreMap aggregate_scores(const Hierarchy& h, std::span<const double> pers) {
  const auto agg = aggregate_nodes(h, pers);
  ScoreMap s{h.height(), h.width(), std::vector<float>(h.num_leaves()), {to_string(h.kind()), "", h.min_area()}};
  for (NodeId i = 0; i < h.num_leaves(); ++i) {
    if (!std::isfinite(agg[i]) || agg[i] < 0.0) throw std::invalid_argument("aggregated score must be finite and >= 0");
    s.score[i] = static_cast<float>(agg[i]);
  }
  return s;
}

}  // namespace hierxai
