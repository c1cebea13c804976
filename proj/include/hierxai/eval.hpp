#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hierxai/image.hpp"
#include "hierxai/image_io.hpp"
#include "hierxai/oracle.hpp"
#include "hierxai/render.hpp"
#include "hierxai/scoring.hpp"
#include "hierxai/shaping.hpp"

namespace hierxai {

// --- Dataset manifest ----------------------------------------------------

struct ManifestEntry {
  std::filesystem::path image;
  std::size_t label = 0;
  std::map<std::string, std::filesystem::path> maps;  // method -> score map
  std::optional<std::filesystem::path> guidance;
};

struct DatasetManifest {
  std::string oracle;
  std::vector<ManifestEntry> entries;
  std::filesystem::path path;  // file it was read from, if any

  std::vector<std::string> methods() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      for (const auto& [m, p] : e.maps)
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    std::sort(out.begin(), out.end());
    return out;
  }
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON manifest:
///   {"oracle": "...", "entries": [{"image": "a.png", "label": 3, "maps": {"TreeW-Occ": "a_w.npy"}}]}
/// Relative paths resolve against the manifest's directory.
inline DatasetManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array())
    throw ManifestError("manifest must be an object with an entries array");
  DatasetManifest m;
  m.oracle = j.value("oracle", std::string());
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  for (const auto& e : j["entries"]) {
    if (!e.contains("image") || !e["image"].is_string()) throw ManifestError("manifest entry without image path");
    if (!e.contains("label") || !e["label"].is_number_unsigned()) throw ManifestError("manifest entry without label");
    ManifestEntry entry;
    entry.image = resolve(e["image"].get<std::string>());
    entry.label = e["label"].get<std::size_t>();
    if (e.contains("guidance")) entry.guidance = resolve(e["guidance"].get<std::string>());
    if (e.contains("maps")) {
      if (!e["maps"].is_object()) throw ManifestError("maps must be an object");
      for (const auto& [k, v] : e["maps"].items()) entry.maps[k] = resolve(v.get<std::string>());
    }
    m.entries.push_back(std::move(entry));
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("manifest not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("manifest is not valid JSON: " + std::string(e.what()));
  }
  auto m = parse_manifest(j, path.parent_path());
  m.path = path;
  for (const auto& e : m.entries) {
    if (!std::filesystem::exists(e.image)) throw ManifestError("image not found: " + e.image.string());
    for (const auto& [k, p] : e.maps)
      if (!std::filesystem::exists(p)) throw ManifestError("score map not found: " + p.string());
  }
  return m;
}

/// Loads an image resized and channel-converted to the oracle input.
inline Image load_for_oracle(const std::filesystem::path& path, const OracleInfo& info,
                             const std::optional<Normalization>& norm = std::nullopt) {
  Image img = load_image(path, Size2{info.input_shape[1], info.input_shape[2]});
  img = convert_channels(img, info.input_shape[0]);
  if (norm) img = normalize(denormalize(img), *norm);
  return img;
}

// --- Statistics ------------------------------------------------------------

inline double pir(double impact, const Mask& mask) {
  if (mask.empty()) throw std::invalid_argument("pir needs a nonempty mask");
  return impact / static_cast<double>(mask.count());
}

/// Trapezoid area under ys over xs rescaled to [0, 1].
inline double auc(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("auc: xs and ys differ in length");
  if (xs.empty()) throw std::invalid_argument("auc: no points");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("auc: xs must be strictly increasing");
  if (xs.size() == 1) return ys[0];
  const double span = xs.back() - xs.front();
  double area = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) area += (xs[i] - xs[i - 1]) / span * (ys[i] + ys[i - 1]) / 2.0;
  return area;
}

struct McNemarResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;  // "exact", "chi2" or "none"
};

/// Two-sided McNemar test on discordant counts b and c. Exact binomial
/// below 25 discordant pairs, continuity-corrected chi-square otherwise.
inline McNemarResult mcnemar(std::size_t b, std::size_t c) {
  const std::size_t n = b + c;
  if (n == 0) return {0.0, 1.0, "none"};
  if (n < 25) {
    const std::size_t k = std::min(b, c);
    double cdf = 0.0;
    for (std::size_t i = 0; i <= k; ++i)
      cdf += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - static_cast<double>(n) * std::log(2.0));
    return {static_cast<double>(k), std::min(1.0, 2.0 * cdf), "exact"};
  }
  const double d = std::fabs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
  const double stat = d * d / static_cast<double>(n);
  return {stat, std::erfc(std::sqrt(stat / 2.0)), "chi2"};
}

// --- Evaluation ------------------------------------------------------------

struct EvalSample {
  std::string id;
  Image image;
  std::size_t label = 0;
  ScoreMap map;
};

struct SkippedImage {
  std::string id;
  std::string error;
};

/// Region selected for evaluation: the thresholded map, or the whole image
/// once the threshold reaches 100%.
inline Mask eval_selection(const ScoreMap& s, const ThresholdSpec& t) {
  if (t.top_percent >= 100.0) return Mask(s.height, s.width).complement();
  return threshold_map(s, t);
}

namespace detail {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; returns per-index
// error messages (empty when fn succeeded).
inline std::vector<std::string> parallel_each(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown error";
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return errors;
}

inline void check_sample(const EvalSample& s) {
  if (s.map.height != s.image.height() || s.map.width != s.image.width())
    throw std::invalid_argument("score map does not match image size for " + s.id);
}

}  // namespace detail

struct ExclusionRow {
  std::string id;
  std::size_t label = 0;
  std::size_t original_class = 0;
  std::size_t new_class = 0;
  double original_logit = 0.0;
  double occluded_logit = 0.0;
  std::size_t masked_pixels = 0;
  bool changed = false;
  bool same = false;
  double impact = 0.0;
  double pir = 0.0;  // 0 for empty masks
};

struct ExclusionReport {
  std::string method;
  double top_percent = 25.0;
  double ch = 0.0;
  double same = 0.0;
  double total = 0.0;
  double mean_pir = 0.0;
  std::size_t n = 0;
  std::vector<ExclusionRow> rows;  // evaluated images, manifest order
  std::vector<SkippedImage> skipped;
};

struct EvalOptions {
  ThresholdSpec threshold{25.0, ThresholdMode::score_rank};
  FillPolicy fill;
  std::size_t jobs = 1;
};

/// Occludes the selected region of every image. Ch: predicted class
/// changed. Same: class kept but its logit strictly decreased.
inline ExclusionReport exclusion_eval(Oracle& oracle, const std::vector<EvalSample>& samples, const EvalOptions& opt,
                                      std::string method = {}) {
  std::vector<ExclusionRow> rows(samples.size());
  const auto errors = detail::parallel_each(samples.size(), opt.jobs, [&](std::size_t i) {
    const EvalSample& s = samples[i];
    detail::check_sample(s);
    const Mask sel = eval_selection(s.map, opt.threshold);
    const Image pair[2] = {s.image, apply_mask(s.image, sel, opt.fill)};
    const auto out = oracle.logits(pair);
    ExclusionRow r;
    r.id = s.id;
    r.label = s.label;
    r.original_class = argmax(out[0]);
    r.new_class = argmax(out[1]);
    r.original_logit = out[0][r.original_class];
    r.occluded_logit = out[1][r.original_class];
    r.masked_pixels = sel.count();
    r.changed = r.new_class != r.original_class;
    r.same = !r.changed && r.occluded_logit < r.original_logit;
    r.impact = std::fabs(r.original_logit - r.occluded_logit);
    r.pir = sel.empty() ? 0.0 : pir(r.impact, sel);
    rows[i] = std::move(r);
  });
  ExclusionReport rep;
  rep.method = std::move(method);
  rep.top_percent = opt.threshold.top_percent;
  std::size_t ch = 0, same = 0;
  double pir_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!errors[i].empty()) {
      rep.skipped.push_back({samples[i].id, errors[i]});
      continue;
    }
    ch += rows[i].changed;
    same += rows[i].same;
    pir_sum += rows[i].pir;
    rep.rows.push_back(std::move(rows[i]));
  }
  rep.n = rep.rows.size();
  if (rep.n > 0) {
    const double n = static_cast<double>(rep.n);
    rep.ch = static_cast<double>(ch) / n;
    rep.same = static_cast<double>(same) / n;
    rep.total = static_cast<double>(ch + same) / n;
    rep.mean_pir = pir_sum / n;
  }
  return rep;
}

struct InclusionRow {
  std::string id;
  std::size_t original_class = 0;
  std::size_t new_class = 0;
  std::size_t kept_pixels = 0;
  bool changed = false;
};

struct InclusionReport {
  std::string method;
  double top_percent = 25.0;
  double changed = 0.0;  // lower is better
  std::size_t n = 0;
  std::vector<InclusionRow> rows;
  std::vector<SkippedImage> skipped;
};

/// Occludes everything except the selected region.
inline InclusionReport inclusion_eval(Oracle& oracle, const std::vector<EvalSample>& samples, const EvalOptions& opt,
                                      std::string method = {}) {
  std::vector<InclusionRow> rows(samples.size());
  const auto errors = detail::parallel_each(samples.size(), opt.jobs, [&](std::size_t i) {
    const EvalSample& s = samples[i];
    detail::check_sample(s);
    const Mask sel = eval_selection(s.map, opt.threshold);
    const Image pair[2] = {s.image, apply_mask(s.image, sel.complement(), opt.fill)};
    const auto out = oracle.logits(pair);
    InclusionRow r;
    r.id = s.id;
    r.original_class = argmax(out[0]);
    r.new_class = argmax(out[1]);
    r.kept_pixels = sel.count();
    r.changed = r.new_class != r.original_class;
    rows[i] = std::move(r);
  });
  InclusionReport rep;
  rep.method = std::move(method);
  rep.top_percent = opt.threshold.top_percent;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!errors[i].empty()) {
      rep.skipped.push_back({samples[i].id, errors[i]});
      continue;
    }
    changed += rows[i].changed;
    rep.rows.push_back(std::move(rows[i]));
  }
  rep.n = rep.rows.size();
  if (rep.n > 0) rep.changed = static_cast<double>(changed) / static_cast<double>(rep.n);
  return rep;
}

/// Paired comparison of two exclusion runs over the same images: b counts
/// images changed only by `a`, c those changed only by `b`.
inline McNemarResult compare_exclusion(const ExclusionReport& a, const ExclusionReport& b) {
  std::map<std::string, bool> other;
  for (const auto& r : b.rows) other[r.id] = r.changed;
  std::size_t nb = 0, nc = 0;
  for (const auto& r : a.rows) {
    auto it = other.find(r.id);
    if (it == other.end()) continue;
    nb += r.changed && !it->second;
    nc += !r.changed && it->second;
  }
  return mcnemar(nb, nc);
}

inline const std::vector<double>& default_curve_thresholds() {
  static const std::vector<double> t = {0.5, 1, 2, 3, 4, 5, 7, 10, 13, 21, 34, 50, 75};
  return t;
}

struct CurveReport {
  std::string method;
  std::vector<double> thresholds;
  std::vector<double> sic;       // mean softmax probability of the originally predicted class
  std::vector<double> aic;       // fraction keeping the originally predicted class
  std::vector<double> accuracy;  // fraction predicting the ground-truth label
  double auc_sic = 0.0;
  double auc_aic = 0.0;
  std::size_t n = 0;
  std::vector<SkippedImage> skipped;
};

struct CurveOptions {
  std::vector<double> thresholds = default_curve_thresholds();
  double keep_fraction = 0.1;
  ThresholdMode mode = ThresholdMode::score_rank;
  std::size_t jobs = 1;
};

/// Reveals the selected pixels of each image on top of its blurred copy,
/// one composite per threshold.
inline CurveReport sic_aic_curves(Oracle& oracle, const std::vector<EvalSample>& samples, const CurveOptions& opt,
                                  std::string method = {}) {
  const auto& ts = opt.thresholds;
  if (ts.empty()) throw std::invalid_argument("curve thresholds are empty");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(ts[i] > 0.0 && ts[i] <= 100.0)) throw std::invalid_argument("curve thresholds must be in (0, 100]");
    if (i > 0 && !(ts[i] > ts[i - 1])) throw std::invalid_argument("curve thresholds must be strictly increasing");
  }
  const std::size_t k = ts.size();
  struct PerImage {
    std::vector<double> prob;
    std::vector<bool> kept;
    std::vector<bool> correct;
  };
  std::vector<PerImage> per(samples.size());
  const auto errors = detail::parallel_each(samples.size(), opt.jobs, [&](std::size_t i) {
    const EvalSample& s = samples[i];
    detail::check_sample(s);
    const Image blurred = blur_baseline(s.image, opt.keep_fraction);
    std::vector<Image> batch{s.image};
    for (double t : ts) batch.push_back(composite(blurred, s.image, eval_selection(s.map, {t, opt.mode})));
    const auto out = oracle.logits(batch);
    const std::size_t c = argmax(out[0]);
    PerImage p;
    for (std::size_t j = 0; j < k; ++j) {
      p.prob.push_back(softmax(out[j + 1])[c]);
      p.kept.push_back(argmax(out[j + 1]) == c);
      p.correct.push_back(argmax(out[j + 1]) == s.label);
    }
    per[i] = std::move(p);
  });
  CurveReport rep;
  rep.method = std::move(method);
  rep.thresholds = ts;
  rep.sic.assign(k, 0.0);
  rep.aic.assign(k, 0.0);
  rep.accuracy.assign(k, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!errors[i].empty()) {
      rep.skipped.push_back({samples[i].id, errors[i]});
      continue;
    }
    ++rep.n;
    for (std::size_t j = 0; j < k; ++j) {
      rep.sic[j] += per[i].prob[j];
      rep.aic[j] += per[i].kept[j];
      rep.accuracy[j] += per[i].correct[j];
    }
  }
  if (rep.n > 0)
    for (std::size_t j = 0; j < k; ++j) {
      rep.sic[j] /= static_cast<double>(rep.n);
      rep.aic[j] /= static_cast<double>(rep.n);
      rep.accuracy[j] /= static_cast<double>(rep.n);
    }
  rep.auc_sic = auc(ts, rep.sic);
  rep.auc_aic = auc(ts, rep.aic);
  return rep;
}

// --- Sliding-window occlusion baseline -------------------------------------

struct Shape3 {
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;
};

namespace detail {
// Window starts along one axis: ceil((size - window) / step) + 1 windows,
// the last one clipped at the border.
inline std::vector<std::size_t> window_starts(std::size_t size, std::size_t window, std::size_t step) {
  std::vector<std::size_t> out;
  const std::size_t count = (size - window + step - 1) / step + 1;
  for (std::size_t k = 0; k < count; ++k) out.push_back(k * step);
  return out;
}
}  // namespace detail

/// Occlusion sensitivity by a sliding (C,H,W) window: each window's impact
/// |out_c - out_c(occluded)| is spread over the elements it covers and
/// averaged by coverage; pixel score is the mean over channels.
inline ScoreMap sliding_occlusion_map(Oracle& oracle, const Image& img, std::size_t c, Shape3 window, Shape3 step,
                                      const FillPolicy& fill, std::size_t batch_size = 32) {
  check_class(oracle, c);
  if (window.c == 0 || window.h == 0 || window.w == 0 || step.c == 0 || step.h == 0 || step.w == 0)
    throw std::invalid_argument("window and step must be positive");
  if (window.c > img.channels() || window.h > img.height() || window.w > img.width())
    throw std::invalid_argument("occlusion window is larger than the image");
  const auto cs = detail::window_starts(img.channels(), window.c, step.c);
  const auto ys = detail::window_starts(img.height(), window.h, step.h);
  const auto xs = detail::window_starts(img.width(), window.w, step.w);
  const std::size_t n = img.pixel_count();

  struct Win {
    std::size_t c0, c1, y0, y1, x0, x1;
  };
  std::vector<Win> wins;
  for (auto c0 : cs)
    for (auto y0 : ys)
      for (auto x0 : xs)
        wins.push_back({c0, std::min(c0 + window.c, img.channels()), y0, std::min(y0 + window.h, img.height()), x0,
                        std::min(x0 + window.w, img.width())});

  std::vector<float> fills(img.channels());
  for (std::size_t ch = 0; ch < img.channels(); ++ch) fills[ch] = fill.stored_value(img, ch);
  const double original = logits_of(oracle, img).at(c);

  std::vector<double> sum(img.size(), 0.0), cover(img.size(), 0.0);
  batch_size = std::max<std::size_t>(1, batch_size);
  for (std::size_t lo = 0; lo < wins.size(); lo += batch_size) {
    const std::size_t hi = std::min(wins.size(), lo + batch_size);
    std::vector<Image> batch;
    for (std::size_t k = lo; k < hi; ++k) {
      Image o = img;
      const Win& w = wins[k];
      for (std::size_t ch = w.c0; ch < w.c1; ++ch)
        for (std::size_t y = w.y0; y < w.y1; ++y)
          for (std::size_t x = w.x0; x < w.x1; ++x) o.at(ch, y, x) = fills[ch];
      batch.push_back(std::move(o));
    }
    const auto out = oracle.logits(batch);
    for (std::size_t k = lo; k < hi; ++k) {
      const double impact = std::fabs(original - static_cast<double>(out[k - lo].at(c)));
      const Win& w = wins[k];
      for (std::size_t ch = w.c0; ch < w.c1; ++ch)
        for (std::size_t y = w.y0; y < w.y1; ++y)
          for (std::size_t x = w.x0; x < w.x1; ++x) {
            const std::size_t i = ch * n + y * img.width() + x;
            sum[i] += impact;
            cover[i] += 1.0;
          }
    }
  }
  ScoreMap s{img.height(), img.width(), std::vector<float>(n, 0.0f), {"sliding", "occ", 1}};
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < img.channels(); ++ch) {
      const std::size_t e = ch * n + i;
      if (cover[e] > 0.0) acc += sum[e] / cover[e];
    }
    s.score[i] = static_cast<float>(acc / static_cast<double>(img.channels()));
  }
  return s;
}

}  // namespace hierxai
