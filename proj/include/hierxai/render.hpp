#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hierxai/image.hpp"
#include "hierxai/image_io.hpp"
#include "hierxai/npy.hpp"
#include "hierxai/png_io.hpp"
#include "hierxai/shaping.hpp"

namespace hierxai {

enum class ThresholdMode { score_rank, score_range };

inline std::string to_string(ThresholdMode m) { return m == ThresholdMode::score_rank ? "score_rank" : "score_range"; }

inline ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "score_rank" || s == "rank") return ThresholdMode::score_rank;
  if (s == "score_range" || s == "range") return ThresholdMode::score_range;
  throw std::invalid_argument("unknown threshold mode: " + s);
}

struct ThresholdSpec {
  double top_percent = 25.0;
  ThresholdMode mode = ThresholdMode::score_rank;

  void validate() const {
    if (!(top_percent > 0.0 && top_percent <= 100.0)) throw std::invalid_argument("top_percent must be in (0, 100]");
  }
};

/// Pixels holding the most important scores.
///   score_rank:  the ceil(t% of P) highest of the P positive pixels, ties
///                broken by lower pixel index
///   score_range: positive pixels with score >= (1 - t/100) * max
inline Mask threshold_map(const ScoreMap& s, const ThresholdSpec& t) {
  t.validate();
  Mask m(s.height, s.width);
  std::vector<std::size_t> positive;
  for (std::size_t i = 0; i < s.score.size(); ++i)
    if (s.score[i] > 0.0f) positive.push_back(i);
  if (positive.empty()) return m;
  if (t.mode == ThresholdMode::score_range) {
    const double cut = (1.0 - t.top_percent / 100.0) * s.max();
    for (std::size_t i : positive)
      if (s.score[i] >= cut) m.set(i);
    return m;
  }
  const double exact = t.top_percent * static_cast<double>(positive.size()) / 100.0;
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(exact - 1e-9)), 1, positive.size());
  std::stable_sort(positive.begin(), positive.end(), [&](std::size_t a, std::size_t b) { return s.score[a] > s.score[b]; });
  for (std::size_t j = 0; j < k; ++j) m.set(positive[j]);
  return m;
}

struct OverlayOptions {
  std::size_t levels = 4;
  double dim = 0.25;
  std::optional<ThresholdSpec> threshold;
};

/// Brightness factor per pixel: positive scores are quantized into
/// `levels` bands from dim to full brightness; zero-score pixels and
/// pixels outside the optional threshold stay at `dim`.
inline std::vector<double> overlay_factors(const ScoreMap& s, const OverlayOptions& opt) {
  if (opt.levels < 1) throw std::invalid_argument("levels must be >= 1");
  if (!(opt.dim >= 0.0 && opt.dim <= 1.0)) throw std::invalid_argument("dim must be in [0, 1]");
  const double mx = s.max();
  std::optional<Mask> keep;
  if (opt.threshold) keep = threshold_map(s, *opt.threshold);
  std::vector<double> f(s.score.size(), opt.dim);
  if (mx <= 0.0) return f;
  const double levels = static_cast<double>(opt.levels);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (s.score[i] <= 0.0f || (keep && !(*keep)[i])) continue;
    const double band = std::clamp(std::ceil(s.score[i] / mx * levels - 1e-9), 1.0, levels);
    f[i] = opt.dim + (1.0 - opt.dim) * band / levels;
  }
  return f;
}

/// RGB PNG of the image with each pixel scaled by its overlay factor.
inline std::string render_overlay(const Image& img, const ScoreMap& s, const OverlayOptions& opt = {}) {
  if (img.height() != s.height || img.width() != s.width) throw std::invalid_argument("score map does not match image");
  const Image rgb = convert_channels(denormalize(img), 3);
  const auto f = overlay_factors(s, opt);
  png::Raster r{img.height(), img.width(), 3, std::vector<std::uint8_t>(img.pixel_count() * 3)};
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(rgb.plane(c)[i]), 0.0, 1.0) * f[i];
      r.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  return png::encode(r);
}

inline void save_score_map(const std::filesystem::path& path, const ScoreMap& s) {
  npy::write_f32(path, {s.height, s.width}, s.score);
}

/// Reads an (H,W) float map; negative values are clamped to 0 so signed
/// baseline attributions can be evaluated.
inline ScoreMap load_score_map(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ImageIoError("score map not found: " + path.string());
  const npy::Array a = npy::read(path);
  if (a.dtype != npy::DType::f4 && a.dtype != npy::DType::f8) throw ImageIoError("score map must be a float array");
  if (a.shape.size() != 2) throw ImageIoError("score map must be 2-D: " + path.string());
  ScoreMap s{a.shape[0], a.shape[1], a.f32, {}};
  for (float& v : s.score) {
    if (!std::isfinite(v)) throw ImageIoError("score map holds non-finite values: " + path.string());
    v = std::max(v, 0.0f);
  }
  return s;
}

}  // namespace hierxai
