#pragma once

#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

namespace hierxai {

/// Disjoint sets with path halving and union by rank.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  /// Links two roots and returns the new root.
  std::size_t link(std::size_t a, std::size_t b) {
    if (a == b) return a;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }

  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
};

}  // namespace hierxai
