#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "hierxai/image.hpp"

namespace hierxai {

struct OracleInfo {
  std::size_t n_classes = 0;
  std::array<std::size_t, 3> input_shape{};  // (C, H, W)
  std::string name;

  bool operator==(const OracleInfo&) const = default;
};

using LogitVector = std::vector<float>;

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A black-box classifier returning one logit vector per image.
/// Implementations must be safe to call from several threads.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual OracleInfo hello() = 0;
  virtual std::vector<LogitVector> logits(std::span<const Image> batch) = 0;
  /// Stable identity used for cache keys and report metadata.
  virtual std::string identity() const = 0;
};

inline std::size_t argmax(const LogitVector& v) {
  return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

/// Numerically stable softmax.
inline std::vector<double> softmax(const LogitVector& v) {
  std::vector<double> p(v.size());
  if (v.empty()) return p;
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sum += p[i] = std::exp(static_cast<double>(v[i]) - m);
  for (auto& x : p) x /= sum;
  return p;
}

inline void check_batch_shape(const OracleInfo& info, std::span<const Image> batch) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Image& img = batch[i];
    if (img.channels() != info.input_shape[0] || img.height() != info.input_shape[1] || img.width() != info.input_shape[2])
      throw OracleError("image " + std::to_string(i) + " does not match oracle input shape");
  }
}

inline void check_logits(const OracleInfo& info, const std::vector<LogitVector>& out, std::size_t expected) {
  if (out.size() != expected) throw OracleError("oracle returned " + std::to_string(out.size()) + " rows for " +
                                                std::to_string(expected) + " images");
  for (const auto& row : out) {
    if (row.size() != info.n_classes) throw OracleError("oracle returned a logit row of the wrong length");
    for (float v : row)
      if (!std::isfinite(v)) throw OracleError("oracle returned non-finite logits");
  }
}

/// Single logit row for one image.
inline LogitVector logits_of(Oracle& oracle, const Image& img) {
  auto out = oracle.logits(std::span<const Image>(&img, 1));
  return std::move(out.at(0));
}

// --- In-process toy oracles ---------------------------------------------

struct Rect {
  std::size_t y = 0;
  std::size_t x = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  bool contains(std::size_t py, std::size_t px) const { return py >= y && py < y + height && px >= x && px < x + width; }
  bool operator==(const Rect&) const = default;
};

struct ConstantToy {
  std::array<std::size_t, 3> input_shape{};
  std::vector<float> values;
};

/// logit_c = sum_i weights[c][i] * x[i] over the channel-major data.
struct LinearToy {
  std::array<std::size_t, 3> input_shape{};
  std::vector<std::vector<float>> weights;
};

/// Two classes: logit_0 = margin, logit_1 = gain * mean(x inside rect) over
/// all channels. Class 1 is predicted while the patch stays bright enough.
struct PlantedPatchToy {
  std::array<std::size_t, 3> input_shape{};
  Rect rect;
  float gain = 1.0f;
  float margin = 0.5f;
};

using ToySpec = std::variant<ConstantToy, LinearToy, PlantedPatchToy>;

class ToyOracle final : public Oracle {
 public:
  explicit ToyOracle(ToySpec spec) : spec_(std::move(spec)) { info_ = validate(); }

  OracleInfo hello() override { return info_; }

  std::vector<LogitVector> logits(std::span<const Image> batch) override {
    check_batch_shape(info_, batch);
    std::vector<LogitVector> out;
    out.reserve(batch.size());
    for (const Image& img : batch) out.push_back(std::visit([&](const auto& s) { return eval(s, img); }, spec_));
    check_logits(info_, out, batch.size());
    return out;
  }

  std::string identity() const override { return info_.name; }

  const ToySpec& spec() const { return spec_; }

 private:
  OracleInfo validate() const {
    OracleInfo info;
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          info.input_shape = s.input_shape;
          if (s.input_shape[0] == 0 || s.input_shape[1] == 0 || s.input_shape[2] == 0)
            throw std::invalid_argument("toy oracle input shape must be positive");
          const std::size_t n = s.input_shape[0] * s.input_shape[1] * s.input_shape[2];
          if constexpr (std::is_same_v<T, ConstantToy>) {
            info.n_classes = s.values.size();
            info.name = "toy:constant";
          } else if constexpr (std::is_same_v<T, LinearToy>) {
            info.n_classes = s.weights.size();
            for (const auto& w : s.weights)
              if (w.size() != n) throw std::invalid_argument("linear toy weight image has the wrong size");
            info.name = "toy:linear";
          } else {
            info.n_classes = 2;
            if (s.rect.height == 0 || s.rect.width == 0 || s.rect.y + s.rect.height > s.input_shape[1] ||
                s.rect.x + s.rect.width > s.input_shape[2])
              throw std::invalid_argument("planted patch rectangle does not fit the input");
            info.name = "toy:planted_patch";
          }
        },
        spec_);
    if (info.n_classes < 2) throw std::invalid_argument("toy oracle needs at least two classes");
    return info;
  }

  static LogitVector eval(const ConstantToy& s, const Image&) { return s.values; }

  static LogitVector eval(const LinearToy& s, const Image& img) {
    LogitVector out;
    out.reserve(s.weights.size());
    const auto x = img.data();
    for (const auto& w : s.weights) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(w[i]) * x[i];
      out.push_back(static_cast<float>(acc));
    }
    return out;
  }

  static LogitVector eval(const PlantedPatchToy& s, const Image& img) {
    double acc = 0.0;
    for (std::size_t c = 0; c < img.channels(); ++c)
      for (std::size_t y = s.rect.y; y < s.rect.y + s.rect.height; ++y)
        for (std::size_t x = s.rect.x; x < s.rect.x + s.rect.width; ++x) acc += img.at(c, y, x);
    const double mean = acc / static_cast<double>(img.channels() * s.rect.height * s.rect.width);
    return {s.margin, static_cast<float>(s.gain * mean)};
  }

  ToySpec spec_;
  OracleInfo info_;
};

inline std::unique_ptr<Oracle> make_toy_oracle(ToySpec spec) { return std::make_unique<ToyOracle>(std::move(spec)); }

// --- Response cache ------------------------------------------------------

namespace detail {
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}
}  // namespace detail

/// Content hash of an image's shape and stored values.
inline std::uint64_t image_hash(const Image& img) {
  const std::uint64_t dims[3] = {img.channels(), img.height(), img.width()};
  std::uint64_t h = detail::fnv1a(dims, sizeof(dims));
  return detail::fnv1a(img.data().data(), img.size() * sizeof(float), h);
}

/// LRU cache in front of another oracle, keyed by image content. Hits are
/// verified against the stored image so cached results are bitwise equal
/// to fresh ones.
class CachingOracle final : public Oracle {
 public:
  CachingOracle(std::shared_ptr<Oracle> inner, std::size_t capacity = 256) : inner_(std::move(inner)), capacity_(capacity) {
    if (!inner_) throw std::invalid_argument("caching oracle needs an inner oracle");
  }

  OracleInfo hello() override { return inner_->hello(); }
  std::string identity() const override { return inner_->identity(); }

  std::vector<LogitVector> logits(std::span<const Image> batch) override {
    std::vector<LogitVector> out(batch.size());
    std::vector<std::size_t> missing;
    {
      std::lock_guard lock(mu_);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (auto hit = lookup(batch[i])) {
          out[i] = *hit;
          ++hits_;
        } else {
          missing.push_back(i);
        }
      }
    }
    if (!missing.empty()) {
      std::vector<Image> todo;
      todo.reserve(missing.size());
      for (auto i : missing) todo.push_back(batch[i]);
      auto fresh = inner_->logits(todo);
      std::lock_guard lock(mu_);
      for (std::size_t k = 0; k < missing.size(); ++k) {
        out[missing[k]] = fresh[k];
        insert(batch[missing[k]], std::move(fresh[k]));
      }
      misses_ += missing.size();
    }
    return out;
  }

  std::size_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }
  std::size_t misses() const {
    std::lock_guard lock(mu_);
    return misses_;
  }

 private:
  struct Entry {
    std::uint64_t key;
    Image image;
    LogitVector logits;
  };

  const LogitVector* lookup(const Image& img) {
    const auto key = image_hash(img);
    auto [lo, hi] = index_.equal_range(key);
    for (auto it = lo; it != hi; ++it) {
      const Image& cached = it->second->image;
      if (cached.channels() == img.channels() && cached.height() == img.height() && cached.width() == img.width() &&
          std::memcmp(cached.data().data(), img.data().data(), img.size() * sizeof(float)) == 0) {
        entries_.splice(entries_.begin(), entries_, it->second);
        return &it->second->logits;
      }
    }
    return nullptr;
  }

  void insert(const Image& img, LogitVector v) {
    if (capacity_ == 0) return;
    if (lookup(img)) return;
    const auto key = image_hash(img);
    entries_.push_front({key, img, std::move(v)});
    index_.emplace(key, entries_.begin());
    while (entries_.size() > capacity_) {
      auto last = std::prev(entries_.end());
      auto [lo, hi] = index_.equal_range(last->key);
      for (auto it = lo; it != hi; ++it)
        if (it->second == last) {
          index_.erase(it);
          break;
        }
      entries_.pop_back();
    }
  }

  std::shared_ptr<Oracle> inner_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> entries_;
  std::unordered_multimap<std::uint64_t, std::list<Entry>::iterator> index_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace hierxai
