#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hierxai/hierarchy.hpp"
#include "hierxai/image.hpp"
#include "hierxai/npy.hpp"
#include "hierxai/oracle.hpp"

namespace hierxai {

enum class Metric { occ, caoc };

inline std::string to_string(Metric m) { return m == Metric::occ ? "occ" : "caoc"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "occ" || s == "Occ") return Metric::occ;
  if (s == "caoc" || s == "CaOC") return Metric::caoc;
  throw std::invalid_argument("unknown metric: " + s);
}

/// Class-c logits of a reference image set, sorted descending.
struct RankingContext {
  std::size_t class_index = 0;
  std::vector<float> reference_logits;
  std::string source;

  RankingContext() = default;
  RankingContext(std::size_t c, std::vector<float> logits, std::string src)
      : class_index(c), reference_logits(std::move(logits)), source(std::move(src)) {
    std::sort(reference_logits.begin(), reference_logits.end(), std::greater<>());
    validate();
  }

  void validate() const {
    if (reference_logits.empty()) throw std::invalid_argument("ranking context is empty");
    for (float v : reference_logits)
      if (!std::isfinite(v)) throw std::invalid_argument("ranking context holds non-finite logits");
    if (!std::is_sorted(reference_logits.begin(), reference_logits.end(), std::greater<>()))
      throw std::invalid_argument("ranking context is not sorted descending");
  }

  /// 1 + number of references strictly above `logit`; an image tied with a
  /// reference ranks ahead of it.
  std::size_t position(float logit) const {
    const auto it = std::partition_point(reference_logits.begin(), reference_logits.end(), [&](float r) { return r > logit; });
    return 1 + static_cast<std::size_t>(it - reference_logits.begin());
  }
};

inline RankingContext build_ranking_context(Oracle& oracle, const std::vector<Image>& references, std::size_t c,
                                            std::string source) {
  const auto info = oracle.hello();
  if (c >= info.n_classes) throw std::invalid_argument("class index out of range");
  std::vector<float> logits;
  logits.reserve(references.size());
  for (const auto& row : oracle.logits(references)) logits.push_back(row[c]);
  return RankingContext(c, std::move(logits), std::move(source));
}

inline void save_ranking_context(const std::filesystem::path& path, const RankingContext& ctx) {
  const nlohmann::json j = {{"class_index", ctx.class_index}, {"reference_logits", ctx.reference_logits}, {"source", ctx.source}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline RankingContext load_ranking_context(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read ranking context " + path.string());
  const auto j = nlohmann::json::parse(in);
  RankingContext ctx;
  ctx.class_index = j.at("class_index").get<std::size_t>();
  ctx.reference_logits = j.at("reference_logits").get<std::vector<float>>();
  ctx.source = j.value("source", std::string());
  ctx.validate();
  return ctx;
}

inline std::size_t caoc_shift(const RankingContext& ctx, float original, float occluded) {
  const std::size_t a = ctx.position(original), b = ctx.position(occluded);
  return a > b ? a - b : b - a;
}

inline void check_class(Oracle& oracle, std::size_t c) {
  if (c >= oracle.hello().n_classes) throw std::invalid_argument("class index out of range");
}

/// |out_c(img) - out_c(img with mask filled)|
inline double occ_impact(Oracle& oracle, const Image& img, const Mask& mask, std::size_t c, const FillPolicy& fill) {
  check_class(oracle, c);
  if (mask.empty()) throw std::invalid_argument("occlusion mask is empty");
  const Image occluded = apply_mask(img, mask, fill);
  const Image pair[2] = {img, occluded};
  const auto out = oracle.logits(pair);
  return std::fabs(static_cast<double>(out[0][c]) - static_cast<double>(out[1][c]));
}

inline double caoc_movement(const RankingContext& ctx, Oracle& oracle, const Image& img, const Mask& mask, std::size_t c,
                            const FillPolicy& fill) {
  ctx.validate();
  if (ctx.class_index != c) throw std::invalid_argument("ranking context was built for another class");
  check_class(oracle, c);
  if (mask.empty()) throw std::invalid_argument("occlusion mask is empty");
  const Image occluded = apply_mask(img, mask, fill);
  const Image pair[2] = {img, occluded};
  const auto out = oracle.logits(pair);
  return static_cast<double>(caoc_shift(ctx, out[0][c], out[1][c]));
}

/// Per-node occlusion attribute aligned with hierarchy node order.
struct AttributeVector {
  std::vector<double> values;
  Metric metric = Metric::occ;
  std::size_t class_index = 0;
  std::size_t min_area = 1;
};

struct ScoringOptions {
  std::size_t batch_size = 32;
  std::size_t jobs = 1;
  const RankingContext* ranking = nullptr;  // required for caoc
  /// Called after each finished batch with (nodes done, nodes to score).
  std::function<void(std::size_t, std::size_t)> progress;
};

class ScoringError : public std::runtime_error {
 public:
  ScoringError(const std::string& what, std::size_t done, std::size_t total)
      : std::runtime_error(what + " (" + std::to_string(done) + " of " + std::to_string(total) + " regions scored)"),
        done_(done),
        total_(total) {}
  std::size_t done() const { return done_; }
  std::size_t total() const { return total_; }

 private:
  std::size_t done_;
  std::size_t total_;
};

/// Nodes scored by score_hierarchy: every node with area >= min_area,
/// largest first, ties by node id.
inline std::vector<NodeId> scoring_order(const Hierarchy& h) {
  std::vector<NodeId> nodes;
  for (NodeId n = 0; n < h.num_nodes(); ++n)
    if (!h.sub_minimal(n)) nodes.push_back(n);
  std::stable_sort(nodes.begin(), nodes.end(), [&](NodeId a, NodeId b) { return h.area(a) > h.area(b); });
  return nodes;
}

inline AttributeVector score_hierarchy(Oracle& oracle, const Image& img, const Hierarchy& h, Metric metric, std::size_t c,
                                       const FillPolicy& fill, const ScoringOptions& opt = {}) {
  if (h.height() != img.height() || h.width() != img.width())
    throw std::invalid_argument("hierarchy was built for another image size");
  check_class(oracle, c);
  if (metric == Metric::caoc) {
    if (!opt.ranking) throw std::invalid_argument("caoc scoring needs a ranking context");
    opt.ranking->validate();
    if (opt.ranking->class_index != c) throw std::invalid_argument("ranking context was built for another class");
  }
  const std::size_t batch_size = std::max<std::size_t>(1, opt.batch_size);

  AttributeVector out{std::vector<double>(h.num_nodes(), 0.0), metric, c, h.min_area()};
  const float original = logits_of(oracle, img).at(c);
  const auto nodes = scoring_order(h);
  const std::size_t n_batches = (nodes.size() + batch_size - 1) / batch_size;

  // Subtree leaf ranges: leaves of a node are contiguous in a DFS order.
  std::vector<NodeId> dfs_leaves;
  std::vector<std::size_t> first(h.num_nodes()), last(h.num_nodes());
  {
    dfs_leaves.reserve(h.num_leaves());
    std::vector<std::pair<NodeId, bool>> stack{{h.root(), false}};
    while (!stack.empty()) {
      auto [n, closing] = stack.back();
      stack.pop_back();
      if (closing) {
        last[n] = dfs_leaves.size();
        continue;
      }
      first[n] = dfs_leaves.size();
      if (h.is_leaf(n)) {
        dfs_leaves.push_back(n);
        last[n] = dfs_leaves.size();
        continue;
      }
      stack.push_back({n, true});
      const auto ch = h.children(n);
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back({*it, false});
    }
  }
  auto mask_of = [&](NodeId n) {
    Mask m(h.height(), h.width());
    for (std::size_t k = first[n]; k < last[n]; ++k) m.set(dfs_leaves[k]);
    return m;
  };

  std::atomic<std::size_t> next_batch{0};
  std::atomic<std::size_t> done{0};
  std::mutex err_mu;
  std::exception_ptr error;
  std::atomic<bool> failed{false};

  auto worker = [&] {
    for (;;) {
      if (failed) return;
      const std::size_t b = next_batch++;
      if (b >= n_batches) return;
      const std::size_t lo = b * batch_size, hi = std::min(nodes.size(), lo + batch_size);
      try {
        std::vector<Image> batch;
        batch.reserve(hi - lo);
        for (std::size_t k = lo; k < hi; ++k) batch.push_back(apply_mask(img, mask_of(nodes[k]), fill));
        const auto logits = oracle.logits(batch);
        if (logits.size() != batch.size()) throw OracleError("oracle returned the wrong number of rows");
        for (std::size_t k = lo; k < hi; ++k) {
          const float v = logits[k - lo].at(c);
          out.values[nodes[k]] = metric == Metric::occ
                                     ? std::fabs(static_cast<double>(original) - static_cast<double>(v))
                                     : static_cast<double>(caoc_shift(*opt.ranking, original, v));
        }
        const std::size_t d = done += hi - lo;
        if (opt.progress) {
          std::lock_guard lock(err_mu);
          opt.progress(d, nodes.size());
        }
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };

  const std::size_t jobs = std::clamp<std::size_t>(opt.jobs, 1, std::max<std::size_t>(1, n_batches));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      throw ScoringError(e.what(), done.load(), nodes.size());
    }
  }
  return out;
}

inline void save_attributes(const std::filesystem::path& path, const AttributeVector& a) {
  std::vector<float> v(a.values.begin(), a.values.end());
  npy::write_f32(path, {v.size()}, v);
}

}  // namespace hierxai
