#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hierxai/image.hpp"

namespace hierxai {

enum class HierarchyKind : std::uint8_t { bpt = 0, watershed_area = 1, watershed_volume = 2 };

inline std::string to_string(HierarchyKind k) {
  switch (k) {
    case HierarchyKind::bpt: return "bpt";
    case HierarchyKind::watershed_area: return "watershed_area";
    case HierarchyKind::watershed_volume: return "watershed_volume";
  }
  return "unknown";
}

inline HierarchyKind parse_hierarchy_kind(const std::string& s) {
  if (s == "bpt") return HierarchyKind::bpt;
  if (s == "watershed_area" || s == "watershed") return HierarchyKind::watershed_area;
  if (s == "watershed_volume") return HierarchyKind::watershed_volume;
  throw std::invalid_argument("unknown hierarchy kind: " + s);
}

using NodeId = std::size_t;

/// Merging tree over the pixels of an H x W image. Nodes are numbered with
/// the H*W leaves first (leaf i is pixel i in row-major order), internal
/// nodes after, and the root last; parent[root] == root.
class Hierarchy {
 public:
  Hierarchy() = default;

  Hierarchy(std::size_t height, std::size_t width, std::vector<NodeId> parent, std::vector<double> altitude,
            HierarchyKind kind, std::size_t min_area = 1)
      : height_(height), width_(width), parent_(std::move(parent)), altitude_(std::move(altitude)), kind_(kind),
        min_area_(min_area) {
    const std::size_t n_leaves = height_ * width_;
    const std::size_t n = parent_.size();
    if (n_leaves == 0) throw std::invalid_argument("hierarchy needs at least one leaf");
    if (n < n_leaves || altitude_.size() != n) throw std::invalid_argument("hierarchy array lengths are inconsistent");
    if (parent_[n - 1] != n - 1) throw std::invalid_argument("last node must be the root");
    for (NodeId i = 0; i + 1 < n; ++i)
      if (parent_[i] <= i || parent_[i] >= n) throw std::invalid_argument("parent must follow child in node order");
    if (n > n_leaves)
      for (NodeId i = 0; i < n_leaves; ++i)
        if (altitude_[i] != 0.0) throw std::invalid_argument("leaf altitude must be 0");

    area_.assign(n, 0);
    std::vector<std::size_t> child_count(n, 0);
    for (NodeId i = 0; i < n_leaves; ++i) area_[i] = 1;
    for (NodeId i = 0; i + 1 < n; ++i) {
      area_[parent_[i]] += area_[i];
      ++child_count[parent_[i]];
    }
    for (NodeId i = n_leaves; i < n; ++i) {
      if (child_count[i] < 2) throw std::invalid_argument("internal node with fewer than two children");
    }
    for (NodeId i = 0; i + 1 < n; ++i)
      if (altitude_[i] > altitude_[parent_[i]]) throw std::invalid_argument("altitude decreases towards the root");

    child_offset_.assign(n + 1, 0);
    for (NodeId i = 0; i + 1 < n; ++i) ++child_offset_[parent_[i] + 1];
    std::partial_sum(child_offset_.begin(), child_offset_.end(), child_offset_.begin());
    children_.resize(n - 1);
    std::vector<std::size_t> fill(child_offset_.begin(), child_offset_.end() - 1);
    for (NodeId i = 0; i + 1 < n; ++i) children_[fill[parent_[i]]++] = i;

    if (min_area_ < 1 || min_area_ > n_leaves) throw std::invalid_argument("min_area out of range");
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t num_leaves() const { return height_ * width_; }
  std::size_t num_nodes() const { return parent_.size(); }
  NodeId root() const { return parent_.size() - 1; }
  HierarchyKind kind() const { return kind_; }
  std::size_t min_area() const { return min_area_; }

  bool is_leaf(NodeId n) const { return n < num_leaves(); }
  NodeId parent(NodeId n) const { return parent_.at(n); }
  double altitude(NodeId n) const { return altitude_.at(n); }
  std::size_t area(NodeId n) const { return area_.at(n); }

  /// Nodes below the minimal region size; kept for pixel addressing only.
  bool sub_minimal(NodeId n) const { return area(n) < min_area_; }

  std::span<const NodeId> children(NodeId n) const {
    check_node(n);
    return std::span<const NodeId>(children_).subspan(child_offset_[n], child_offset_[n + 1] - child_offset_[n]);
  }

  std::span<const NodeId> parents() const { return parent_; }
  std::span<const double> altitudes() const { return altitude_; }
  std::span<const std::size_t> areas() const { return area_; }

  std::size_t analyzable_count() const {
    std::size_t k = 0;
    for (NodeId n = 0; n < num_nodes(); ++n) k += sub_minimal(n) ? 0 : 1;
    return k;
  }

  void check_node(NodeId n) const {
    if (n >= num_nodes()) throw std::out_of_range("invalid node id " + std::to_string(n));
  }

  bool operator==(const Hierarchy& o) const {
    return height_ == o.height_ && width_ == o.width_ && parent_ == o.parent_ && altitude_ == o.altitude_ &&
           kind_ == o.kind_ && min_area_ == o.min_area_;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<NodeId> parent_;
  std::vector<double> altitude_;
  std::vector<std::size_t> area_;
  std::vector<std::size_t> child_offset_;
  std::vector<NodeId> children_;
  HierarchyKind kind_ = HierarchyKind::bpt;
  std::size_t min_area_ = 1;
};

/// Pixels of the subtree rooted at `node`.
inline Mask node_mask(const Hierarchy& h, NodeId node) {
  h.check_node(node);
  Mask m(h.height(), h.width());
  std::vector<NodeId> stack{node};
  while (!stack.empty()) {
    const NodeId n = stack.back();
    stack.pop_back();
    if (h.is_leaf(n)) {
      m.set(n);
      continue;
    }
    for (NodeId c : h.children(n)) stack.push_back(c);
  }
  return m;
}

/// Contracts every internal node with area < min_area into its nearest
/// surviving ancestor. Leaves are kept (flagged sub-minimal when smaller
/// than min_area) so every pixel still has a full root path.
inline Hierarchy filter_min_area(const Hierarchy& h, std::size_t min_area) {
  if (min_area < 1 || min_area > h.num_leaves()) throw std::invalid_argument("min_area out of range");
  const std::size_t n = h.num_nodes();
  const std::size_t leaves = h.num_leaves();
  constexpr NodeId kDropped = static_cast<NodeId>(-1);
  std::vector<NodeId> new_id(n, kDropped);
  NodeId next = leaves;
  for (NodeId i = 0; i < leaves; ++i) new_id[i] = i;
  for (NodeId i = leaves; i < n; ++i)
    if (h.area(i) >= min_area || i == h.root()) new_id[i] = next++;

  std::vector<NodeId> parent(next);
  std::vector<double> altitude(next, 0.0);
  for (NodeId i = 0; i < n; ++i) {
    if (new_id[i] == kDropped) continue;
    NodeId p = h.parent(i);
    while (new_id[p] == kDropped) p = h.parent(p);
    parent[new_id[i]] = i == h.root() ? new_id[i] : new_id[p];
    altitude[new_id[i]] = h.altitude(i);
  }
  return Hierarchy(h.height(), h.width(), std::move(parent), std::move(altitude), h.kind(), min_area);
}

/// Region label of every pixel when the hierarchy is cut at `threshold`:
/// two pixels share a region iff their lowest common ancestor has
/// altitude <= threshold. Labels are numbered by first occurrence.
inline std::vector<std::size_t> cut_labels(const Hierarchy& h, double threshold) {
  const std::size_t leaves = h.num_leaves();
  std::vector<NodeId> top(h.num_nodes());
  for (NodeId n = h.num_nodes(); n-- > 0;) {
    if (n == h.root()) {
      top[n] = n;
      continue;
    }
    const NodeId p = h.parent(n);
    top[n] = h.altitude(p) <= threshold ? top[p] : n;
  }
  std::vector<std::size_t> label(leaves);
  std::vector<std::size_t> remap(h.num_nodes(), static_cast<std::size_t>(-1));
  std::size_t next = 0;
  for (NodeId i = 0; i < leaves; ++i) {
    auto& r = remap[top[i]];
    if (r == static_cast<std::size_t>(-1)) r = next++;
    label[i] = r;
  }
  return label;
}

// Flat binary layout, little-endian:
//   "HXT1" | u64 n_nodes | u64 n_leaves | u64 height | u64 width | u64 min_area | u8 kind | 7 pad bytes
//   | u64 parent[n_nodes] | f64 altitude[n_nodes] | u64 area[n_nodes]
namespace detail {
static_assert(std::endian::native == std::endian::little, "hierarchy I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("truncated hierarchy file");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}
}  // namespace detail

inline std::string serialize(const Hierarchy& h) {
  std::string out = "HXT1";
  detail::put<std::uint64_t>(out, h.num_nodes());
  detail::put<std::uint64_t>(out, h.num_leaves());
  detail::put<std::uint64_t>(out, h.height());
  detail::put<std::uint64_t>(out, h.width());
  detail::put<std::uint64_t>(out, h.min_area());
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(h.kind()));
  out.append(7, '\0');
  for (auto p : h.parents()) detail::put<std::uint64_t>(out, p);
  for (auto a : h.altitudes()) detail::put<double>(out, a);
  for (auto a : h.areas()) detail::put<std::uint64_t>(out, a);
  return out;
}

inline Hierarchy deserialize_hierarchy(std::string_view in) {
  if (in.size() < 4 || in.substr(0, 4) != "HXT1") throw std::runtime_error("not a HXT1 hierarchy file");
  std::size_t pos = 4;
  const auto n = detail::take<std::uint64_t>(in, pos);
  const auto leaves = detail::take<std::uint64_t>(in, pos);
  const auto height = detail::take<std::uint64_t>(in, pos);
  const auto width = detail::take<std::uint64_t>(in, pos);
  const auto min_area = detail::take<std::uint64_t>(in, pos);
  const auto kind = detail::take<std::uint8_t>(in, pos);
  pos += 7;
  if (height * width != leaves) throw std::runtime_error("hierarchy header is inconsistent");
  if (kind > 2) throw std::runtime_error("unknown hierarchy kind in file");
  if (in.size() != pos + n * 24) throw std::runtime_error("hierarchy file size does not match header");
  std::vector<NodeId> parent(n);
  std::vector<double> altitude(n);
  for (auto& p : parent) p = detail::take<std::uint64_t>(in, pos);
  for (auto& a : altitude) a = detail::take<double>(in, pos);
  Hierarchy h(height, width, std::move(parent), std::move(altitude), static_cast<HierarchyKind>(kind), min_area);
  for (NodeId i = 0; i < n; ++i)
    if (detail::take<std::uint64_t>(in, pos) != h.area(i)) throw std::runtime_error("hierarchy area array is inconsistent");
  return h;
}

inline void save_hierarchy(const std::filesystem::path& path, const Hierarchy& h) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string bytes = serialize(h);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Hierarchy load_hierarchy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_hierarchy(ss.str());
}

}  // namespace hierxai
