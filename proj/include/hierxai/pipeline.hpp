#pragma once

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hierxai/eval.hpp"
#include "hierxai/hierarchy.hpp"
#include "hierxai/image.hpp"
#include "hierxai/image_io.hpp"
#include "hierxai/npy.hpp"
#include "hierxai/oracle.hpp"
#include "hierxai/pixel_graph.hpp"
#include "hierxai/render.hpp"
#include "hierxai/scoring.hpp"
#include "hierxai/segmentation.hpp"
#include "hierxai/shaping.hpp"
#include "hierxai/subprocess_oracle.hpp"

#ifndef HIERXAI_VERSION
#define HIERXAI_VERSION "0.0.0"
#endif

namespace hierxai {

inline constexpr const char* kVersion = HIERXAI_VERSION;

/// Invalid configuration or missing input; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- TOML / JSON --------------------------------------------------------

namespace detail {
inline nlohmann::json toml_to_json(const toml::node& n) {
  if (const auto* t = n.as_table()) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
    return j;
  }
  if (const auto* a = n.as_array()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : *a) j.push_back(toml_to_json(v));
    return j;
  }
  if (const auto* v = n.as_string()) return v->get();
  if (const auto* v = n.as_integer()) {
    const auto x = v->get();
    return x >= 0 ? nlohmann::json(static_cast<std::uint64_t>(x)) : nlohmann::json(x);
  }
  if (const auto* v = n.as_floating_point()) return v->get();
  if (const auto* v = n.as_boolean()) return v->get();
  throw ConfigError("unsupported TOML value (dates are not allowed)");
}
}  // namespace detail

/// Reads a .toml or .json file into JSON.
inline nlohmann::json read_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config not found: " + path.string());
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      return nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  try {
    return detail::toml_to_json(toml::parse(ss.str(), path.string()));
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ':' << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
}

namespace detail {
inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path q(p);
  return q.is_absolute() || base.empty() ? q : base / q;
}

template <typename T>
T get(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": missing or invalid '" + key + "'");
  }
}

inline void only_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a table");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* x : keys) known = known || k == x;
    if (!known) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}
}  // namespace detail

// --- Toy oracle specs -----------------------------------------------------

/// Toy spec from JSON:
///   {"kind":"constant","input":[C,H,W],"values":[...]}
///   {"kind":"linear","input":[C,H,W],"weights":[[...],...]}  or "weights_npy":"w.npy" shaped (K,C,H,W) or (K,C*H*W)
///   {"kind":"planted_patch","input":[C,H,W],"rect":[y,x,h,w],"gain":1.0,"margin":0.5}
inline ToySpec parse_toy_spec(const nlohmann::json& j, const std::filesystem::path& base = {}) {
  const std::string where = "toy oracle spec";
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const auto kind = detail::get<std::string>(j, "kind", where);
  const auto in = detail::get<std::vector<std::size_t>>(j, "input", where);
  if (in.size() != 3) throw ConfigError(where + ": input must be [C,H,W]");
  const std::array<std::size_t, 3> shape{in[0], in[1], in[2]};
  if (kind == "constant") {
    detail::only_keys(j, {"kind", "input", "values"}, where);
    return ConstantToy{shape, detail::get<std::vector<float>>(j, "values", where)};
  }
  if (kind == "linear") {
    detail::only_keys(j, {"kind", "input", "weights", "weights_npy"}, where);
    LinearToy t{shape, {}};
    if (j.contains("weights_npy")) {
      const auto path = detail::resolve(base, detail::get<std::string>(j, "weights_npy", where));
      if (!std::filesystem::exists(path)) throw ConfigError("weights not found: " + path.string());
      const auto a = npy::read(path);
      if (a.dtype == npy::DType::u1 || a.shape.empty()) throw ConfigError(where + ": weights_npy must be a float array");
      const std::size_t k = a.shape[0], per = a.count() / std::max<std::size_t>(1, k);
      for (std::size_t c = 0; c < k; ++c)
        t.weights.emplace_back(a.f32.begin() + static_cast<std::ptrdiff_t>(c * per),
                               a.f32.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
    } else {
      t.weights = detail::get<std::vector<std::vector<float>>>(j, "weights", where);
    }
    return t;
  }
  if (kind == "planted_patch") {
    detail::only_keys(j, {"kind", "input", "rect", "gain", "margin"}, where);
    const auto r = detail::get<std::vector<std::size_t>>(j, "rect", where);
    if (r.size() != 4) throw ConfigError(where + ": rect must be [y,x,h,w]");
    PlantedPatchToy t{shape, Rect{r[0], r[1], r[2], r[3]}};
    if (j.contains("gain")) t.gain = detail::get<float>(j, "gain", where);
    if (j.contains("margin")) t.margin = detail::get<float>(j, "margin", where);
    return t;
  }
  throw ConfigError(where + ": unknown kind '" + kind + "'");
}

inline ToySpec load_toy_spec(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("toy spec not found: " + path.string());
  return parse_toy_spec(read_config_file(path), path.parent_path());
}

// --- Pipeline configuration -----------------------------------------------

enum class GuidanceSource { sobel, edge, attribution };

inline std::string to_string(GuidanceSource g) {
  switch (g) {
    case GuidanceSource::sobel: return "sobel";
    case GuidanceSource::edge: return "edge";
    case GuidanceSource::attribution: return "attribution";
  }
  return {};
}

inline GuidanceSource parse_guidance_source(const std::string& s) {
  if (s == "sobel") return GuidanceSource::sobel;
  if (s == "edge") return GuidanceSource::edge;
  if (s == "attribution") return GuidanceSource::attribution;
  throw ConfigError("unknown guidance source: " + s);
}

struct PipelineConfig {
  // oracle
  std::string oracle_command;
  std::optional<std::filesystem::path> oracle_toy;
  std::size_t batch_size = 32;
  std::size_t cache_entries = 4096;
  // segmentation
  HierarchyKind hierarchy = HierarchyKind::watershed_area;
  GuidanceSource guidance = GuidanceSource::sobel;
  std::optional<std::filesystem::path> guidance_path;
  EdgeCombine edge_combine = EdgeCombine::mean;
  std::size_t min_area = 1;
  std::string label;  // method-name prefix, e.g. "IG" or "BP"
  // scoring
  Metric metric = Metric::occ;
  FillPolicy fill;
  std::optional<std::filesystem::path> references;
  PersistenceMode persistence = PersistenceMode::first_appearance;
  // render
  std::size_t levels = 4;
  ThresholdSpec render_threshold{25.0, ThresholdMode::score_rank};
  // eval
  ThresholdSpec eval_threshold{25.0, ThresholdMode::score_rank};
  std::vector<double> thresholds = default_curve_thresholds();
  double keep_fraction = 0.1;
  // image
  std::optional<Normalization> normalization;
  // runtime
  std::size_t jobs = 1;
  std::optional<std::filesystem::path> cache_dir;

  void validate() const {
    if (oracle_command.empty() == !oracle_toy.has_value())
      throw ConfigError("exactly one of oracle.command and oracle.toy must be set");
    if (oracle_toy && !std::filesystem::exists(*oracle_toy)) throw ConfigError("toy spec not found: " + oracle_toy->string());
    if (min_area < 1) throw ConfigError("min_area must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (levels < 1) throw ConfigError("levels must be >= 1");
    if (guidance != GuidanceSource::sobel && guidance_path && !std::filesystem::exists(*guidance_path))
      throw ConfigError("guidance not found: " + guidance_path->string());
    if (metric == Metric::caoc && !references) throw ConfigError("caoc needs scoring.references (a manifest)");
    if (references && !std::filesystem::exists(*references))
      throw ConfigError("references not found: " + references->string());
    try {
      render_threshold.validate();
      eval_threshold.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ConfigError("keep_fraction must be in (0, 1]");
    if (thresholds.empty()) throw ConfigError("eval.thresholds is empty");
    for (std::size_t i = 0; i < thresholds.size(); ++i)
      if (!(thresholds[i] > 0.0 && thresholds[i] <= 100.0) || (i > 0 && !(thresholds[i] > thresholds[i - 1])))
        throw ConfigError("eval.thresholds must be strictly increasing values in (0, 100]");
    if (fill.kind == FillPolicy::Kind::dataset_mean && fill.channel_means.empty())
      throw ConfigError("fill dataset_mean needs scoring.fill_means");
  }

  /// Canonical JSON form; hashed into meta.json.
  nlohmann::json to_json() const {
    auto opt_path = [](const std::optional<std::filesystem::path>& p) {
      return p ? nlohmann::json(p->generic_string()) : nlohmann::json(nullptr);
    };
    nlohmann::json j;
    j["oracle"] = {{"command", oracle_command}, {"toy", opt_path(oracle_toy)}, {"batch_size", batch_size},
                   {"cache_entries", cache_entries}};
    j["segmentation"] = {{"hierarchy", hierxai::to_string(hierarchy)},
                         {"guidance", hierxai::to_string(guidance)},
                         {"guidance_path", opt_path(guidance_path)},
                         {"edge_combine", edge_combine == EdgeCombine::mean ? "mean" : "max"},
                         {"min_area", min_area},
                         {"label", label}};
    j["scoring"] = {{"metric", hierxai::to_string(metric)},
                    {"fill", fill.to_string()},
                    {"fill_means", fill.channel_means},
                    {"references", opt_path(references)},
                    {"persistence", persistence == PersistenceMode::first_appearance ? "first_appearance" : "branch"}};
    j["render"] = {{"levels", levels},
                   {"top_percent", render_threshold.top_percent},
                   {"mode", hierxai::to_string(render_threshold.mode)}};
    j["eval"] = {{"top_percent", eval_threshold.top_percent},
                 {"mode", hierxai::to_string(eval_threshold.mode)},
                 {"thresholds", thresholds},
                 {"keep_fraction", keep_fraction}};
    j["image"] = normalization ? nlohmann::json{{"mean", normalization->mean}, {"std", normalization->std}}
                               : nlohmann::json::object();
    return j;
  }
};

inline FillPolicy parse_fill(const std::string& kind, float value, std::vector<float> means) {
  if (kind == "normalized_zero") return FillPolicy::normalized_zero();
  if (kind == "constant") return FillPolicy::constant(value);
  if (kind == "dataset_mean") return FillPolicy::dataset_mean(std::move(means));
  throw ConfigError("unknown fill policy: " + kind);
}

/// Builds a config from parsed TOML/JSON. Relative paths resolve against
/// `base`. Unknown keys are errors.
inline PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base = {}) {
  using detail::get;
  PipelineConfig c;
  detail::only_keys(j, {"oracle", "segmentation", "scoring", "render", "eval", "image", "jobs", "cache_dir"}, "config");
  try {
    if (j.contains("jobs")) c.jobs = get<std::size_t>(j, "jobs", "config");
    if (j.contains("cache_dir")) c.cache_dir = detail::resolve(base, get<std::string>(j, "cache_dir", "config"));
    if (j.contains("oracle")) {
      const auto& o = j["oracle"];
      detail::only_keys(o, {"command", "toy", "batch_size", "cache_entries"}, "[oracle]");
      if (o.contains("command")) c.oracle_command = get<std::string>(o, "command", "[oracle]");
      if (o.contains("toy")) c.oracle_toy = detail::resolve(base, get<std::string>(o, "toy", "[oracle]"));
      if (o.contains("batch_size")) c.batch_size = get<std::size_t>(o, "batch_size", "[oracle]");
      if (o.contains("cache_entries")) c.cache_entries = get<std::size_t>(o, "cache_entries", "[oracle]");
    }
    if (j.contains("segmentation")) {
      const auto& s = j["segmentation"];
      const std::string w = "[segmentation]";
      detail::only_keys(s, {"hierarchy", "guidance", "guidance_path", "edge_combine", "min_area", "label"}, w);
      if (s.contains("hierarchy")) c.hierarchy = parse_hierarchy_kind(get<std::string>(s, "hierarchy", w));
      if (s.contains("guidance")) c.guidance = parse_guidance_source(get<std::string>(s, "guidance", w));
      if (s.contains("guidance_path")) c.guidance_path = detail::resolve(base, get<std::string>(s, "guidance_path", w));
      if (s.contains("edge_combine")) {
        const auto e = get<std::string>(s, "edge_combine", w);
        if (e != "mean" && e != "max") throw ConfigError(w + ": edge_combine must be mean or max");
        c.edge_combine = e == "mean" ? EdgeCombine::mean : EdgeCombine::max;
      }
      if (s.contains("min_area")) c.min_area = get<std::size_t>(s, "min_area", w);
      if (s.contains("label")) c.label = get<std::string>(s, "label", w);
    }
    if (j.contains("scoring")) {
      const auto& s = j["scoring"];
      const std::string w = "[scoring]";
      detail::only_keys(s, {"metric", "fill", "fill_value", "fill_means", "references", "persistence"}, w);
      if (s.contains("metric")) c.metric = parse_metric(get<std::string>(s, "metric", w));
      c.fill = parse_fill(s.value("fill", std::string("normalized_zero")), s.contains("fill_value") ? get<float>(s, "fill_value", w) : 0.0f,
                          s.contains("fill_means") ? get<std::vector<float>>(s, "fill_means", w) : std::vector<float>{});
      if (s.contains("references")) c.references = detail::resolve(base, get<std::string>(s, "references", w));
      if (s.contains("persistence")) c.persistence = parse_persistence_mode(get<std::string>(s, "persistence", w));
    }
    if (j.contains("render")) {
      const auto& r = j["render"];
      const std::string w = "[render]";
      detail::only_keys(r, {"levels", "top_percent", "mode"}, w);
      if (r.contains("levels")) c.levels = get<std::size_t>(r, "levels", w);
      if (r.contains("top_percent")) c.render_threshold.top_percent = get<double>(r, "top_percent", w);
      if (r.contains("mode")) c.render_threshold.mode = parse_threshold_mode(get<std::string>(r, "mode", w));
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      const std::string w = "[eval]";
      detail::only_keys(e, {"top_percent", "mode", "thresholds", "keep_fraction"}, w);
      if (e.contains("top_percent")) c.eval_threshold.top_percent = get<double>(e, "top_percent", w);
      if (e.contains("mode")) c.eval_threshold.mode = parse_threshold_mode(get<std::string>(e, "mode", w));
      if (e.contains("thresholds")) c.thresholds = get<std::vector<double>>(e, "thresholds", w);
      if (e.contains("keep_fraction")) c.keep_fraction = get<double>(e, "keep_fraction", w);
    }
    if (j.contains("image")) {
      const auto& im = j["image"];
      detail::only_keys(im, {"mean", "std"}, "[image]");
      if (im.contains("mean") != im.contains("std")) throw ConfigError("[image]: mean and std go together");
      if (im.contains("mean"))
        c.normalization = Normalization{get<std::vector<float>>(im, "mean", "[image]"), get<std::vector<float>>(im, "std", "[image]")};
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_config_file(path), path.parent_path());
}

/// Cache directory: config value, else $HIERXAI_CACHE, else none.
inline std::optional<std::filesystem::path> cache_dir(const PipelineConfig& c) {
  if (c.cache_dir) return c.cache_dir;
  if (const char* env = std::getenv("HIERXAI_CACHE"); env && *env) return std::filesystem::path(env);
  return std::nullopt;
}

/// Method label in the style "TreeW-Occ", "IG-TreeB-CaOC".
inline std::string method_name(const PipelineConfig& c) {
  const char* tree = c.hierarchy == HierarchyKind::bpt ? "TreeB" : c.hierarchy == HierarchyKind::watershed_area ? "TreeW" : "TreeV";
  std::string name = c.label.empty() ? std::string() : c.label + "-";
  return name + tree + (c.metric == Metric::occ ? "-Occ" : "-CaOC");
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string content_hash(std::string_view bytes) { return hex64(detail::fnv1a(bytes.data(), bytes.size())); }

inline std::string config_hash(const PipelineConfig& c) { return content_hash(c.to_json().dump()); }

// --- Oracle construction ----------------------------------------------------

inline std::shared_ptr<Oracle> make_oracle(const PipelineConfig& c) {
  std::shared_ptr<Oracle> inner;
  if (c.oracle_toy)
    inner = std::make_shared<ToyOracle>(load_toy_spec(*c.oracle_toy));
  else
    inner = std::make_shared<SubprocessOracle>(c.oracle_command);
  return std::make_shared<CachingOracle>(std::move(inner), c.cache_entries);
}

// --- Explanation pipeline -------------------------------------------------

inline GuidanceMap load_guidance(const std::filesystem::path& path, GuidanceKind kind, std::size_t h, std::size_t w) {
  if (!std::filesystem::exists(path)) throw ConfigError("guidance not found: " + path.string());
  const npy::Array a = npy::read(path);
  if (a.dtype == npy::DType::u1) throw ConfigError("guidance must be a float array: " + path.string());
  std::vector<float> v = a.f32;
  std::size_t gh = 0, gw = 0;
  if (a.shape.size() == 2) {
    gh = a.shape[0];
    gw = a.shape[1];
  } else if (a.shape.size() == 3 && a.shape[0] == 1) {
    gh = a.shape[1];
    gw = a.shape[2];
  } else {
    throw ConfigError("guidance must be an (H,W) array: " + path.string());
  }
  if (gh != h || gw != w) {
    const Image g(gh, gw, 1, std::move(v));
    const Image r = resize_bilinear(g, h, w);
    v.assign(r.data().begin(), r.data().end());
  }
  return GuidanceMap(h, w, std::move(v), kind);
}

struct Explanation {
  std::string method;
  std::size_t class_index = 0;
  Hierarchy hierarchy;
  AttributeVector attributes;
  std::vector<double> persistence;
  ScoreMap scores;
};

/// Steps 1-4 on an image already shaped for the oracle.
inline Explanation explain(Oracle& oracle, const Image& img, const PipelineConfig& cfg, std::optional<std::size_t> cls,
                           const std::optional<std::filesystem::path>& guidance_override = std::nullopt,
                           const RankingContext* ranking = nullptr) {
  const auto info = oracle.hello();
  const std::size_t c = cls ? *cls : argmax(logits_of(oracle, img));
  if (c >= info.n_classes) throw ConfigError("class " + std::to_string(c) + " out of range");

  GuidanceMap g = [&] {
    if (cfg.guidance == GuidanceSource::sobel) return sobel_edge_map(img);
    const auto path = guidance_override ? guidance_override : cfg.guidance_path;
    if (!path) throw ConfigError("guidance not found: no guidance_path given");
    return load_guidance(*path, cfg.guidance == GuidanceSource::edge ? GuidanceKind::edge : GuidanceKind::attribution,
                         img.height(), img.width());
  }();
  const auto graph = weight_from_guidance(img.height(), img.width(), g, cfg.edge_combine);
  if (cfg.min_area > img.pixel_count()) throw ConfigError("min_area exceeds the image size");
  Hierarchy h = filter_min_area(build_hierarchy(graph, cfg.hierarchy), cfg.min_area);

  ScoringOptions so;
  so.batch_size = cfg.batch_size;
  so.jobs = cfg.jobs;
  so.ranking = ranking;
  auto attrs = score_hierarchy(oracle, img, h, cfg.metric, c, cfg.fill, so);
  const auto tree = build_shape_tree(h, attrs.values);
  auto pers = persistence(tree, cfg.persistence);
  auto scores = aggregate_scores(h, pers);
  scores.provenance.metric = to_string(cfg.metric);
  return {method_name(cfg), c, std::move(h), std::move(attrs), std::move(pers), std::move(scores)};
}

/// Ranking context for class c over the manifest images, cached on disk
/// under the cache directory when one is configured.
inline RankingContext ranking_context_for(Oracle& oracle, const PipelineConfig& cfg, std::size_t c) {
  if (!cfg.references) throw ConfigError("caoc needs scoring.references");
  const auto manifest = load_manifest(*cfg.references);
  std::string key_src = oracle.identity() + "|" + std::to_string(c);
  for (const auto& e : manifest.entries) key_src += "|" + content_hash(png::read_file(e.image));
  const auto dir = cache_dir(cfg);
  std::filesystem::path cached;
  if (dir) {
    cached = *dir / ("ranking-" + content_hash(key_src) + ".json");
    if (std::filesystem::exists(cached)) return load_ranking_context(cached);
  }
  const auto info = oracle.hello();
  std::vector<Image> refs;
  for (const auto& e : manifest.entries) refs.push_back(load_for_oracle(e.image, info, cfg.normalization));
  auto ctx = build_ranking_context(oracle, refs, c, manifest.path.generic_string());
  if (dir) {
    std::filesystem::create_directories(*dir);
    save_ranking_context(cached, ctx);
  }
  return ctx;
}

struct ExplainOutputs {
  std::filesystem::path scoremap;
  std::filesystem::path overlay;
  std::filesystem::path meta;
};

/// Writes scoremap.npy, overlay.png, attributes.npy, hierarchy.hxt and
/// meta.json into `dir`. Output bytes depend only on inputs and config.
inline ExplainOutputs write_explanation(const std::filesystem::path& dir, const Image& img, const Explanation& e,
                                        const PipelineConfig& cfg, const std::string& image_name, const std::string& oracle_id) {
  std::filesystem::create_directories(dir);
  ExplainOutputs out{dir / "scoremap.npy", dir / "overlay.png", dir / "meta.json"};
  const std::string score_bytes = npy::serialize_f32({e.scores.height, e.scores.width}, e.scores.score);
  npy::write_bytes(out.scoremap, score_bytes);
  OverlayOptions oo;
  oo.levels = cfg.levels;
  oo.threshold = cfg.render_threshold;
  const std::string png_bytes = render_overlay(img, e.scores, oo);
  png::write_file(out.overlay, png_bytes);
  save_attributes(dir / "attributes.npy", e.attributes);
  save_hierarchy(dir / "hierarchy.hxt", e.hierarchy);

  nlohmann::json meta;
  meta["tool"] = "hierxai";
  meta["version"] = kVersion;
  meta["command"] = "explain";
  meta["method"] = e.method;
  meta["config_hash"] = config_hash(cfg);
  meta["config"] = cfg.to_json();
  meta["image"] = image_name;
  meta["class_index"] = e.class_index;
  meta["oracle"] = oracle_id;
  meta["provenance"] = {{"hierarchy", e.scores.provenance.hierarchy},
                        {"metric", e.scores.provenance.metric},
                        {"min_area", e.scores.provenance.min_area}};
  meta["hierarchy"] = {{"nodes", e.hierarchy.num_nodes()}, {"analyzable", e.hierarchy.analyzable_count()}};
  meta["outputs"] = {{"scoremap.npy", content_hash(score_bytes)}, {"overlay.png", content_hash(png_bytes)}};
  std::ofstream(out.meta) << meta.dump(2) << '\n';
  return out;
}

}  // namespace hierxai
