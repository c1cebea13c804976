// hierxai command-line interface.
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage or configuration error.
// Errors are reported on stderr as a single JSON object.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hierxai/eval.hpp"
#include "hierxai/pipeline.hpp"
#include "hierxai/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hierxai;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by every command that builds a PipelineConfig.
struct ConfigArgs {
  std::string config;
  std::string oracle_cmd;
  std::string oracle_toy;
  std::string hierarchy;
  std::string guidance;
  std::string guidance_path;
  std::string metric;
  std::string label;
  std::string fill;
  std::optional<float> fill_value;
  std::string references;
  std::string persistence;
  std::optional<std::size_t> min_area;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> levels;
  std::optional<double> top_percent;
  std::string mode;

  void add(CLI::App* app, bool pipeline_flags) {
    app->add_option("-c,--config", config, "TOML or JSON config file");
    app->add_option("--oracle-cmd", oracle_cmd, "oracle server command line");
    app->add_option("--oracle-toy", oracle_toy, "toy oracle spec file");
    app->add_option("-j,--jobs", jobs, "concurrent oracle work items");
    app->add_option("--batch-size", batch_size, "images per oracle request");
    if (!pipeline_flags) return;
    app->add_option("--hierarchy", hierarchy, "bpt | watershed_area | watershed_volume");
    app->add_option("--guidance", guidance, "sobel | edge | attribution");
    app->add_option("--guidance-path", guidance_path, "guidance map (NPY, H x W)");
    app->add_option("--metric", metric, "occ | caoc");
    app->add_option("--label", label, "method-name prefix, e.g. IG");
    app->add_option("--fill", fill, "normalized_zero | constant | dataset_mean");
    app->add_option("--fill-value", fill_value, "fill value for --fill constant, in [0,1] pixel space");
    app->add_option("--references", references, "reference manifest for caoc");
    app->add_option("--persistence", persistence, "first_appearance | branch");
    app->add_option("--min-area", min_area, "smallest region scored, in pixels");
    app->add_option("--levels", levels, "overlay brightness bands");
    app->add_option("--top-percent", top_percent, "selection threshold in percent");
    app->add_option("--mode", mode, "score_rank | score_range");
  }

  PipelineConfig build(const std::string& section_for_threshold = "render") const {
    json j = json::object();
    fs::path base;
    if (!config.empty()) {
      j = read_config_file(config);
      base = fs::path(config).parent_path();
    }
    auto abs = [](const std::string& p) { return fs::absolute(p).string(); };
    auto set = [&](const char* section, const char* key, json v) {
      if (!j.contains(section)) j[section] = json::object();
      j[section][key] = std::move(v);
    };
    if (!oracle_cmd.empty()) {
      set("oracle", "command", oracle_cmd);
      j["oracle"].erase("toy");
    }
    if (!oracle_toy.empty()) {
      set("oracle", "toy", abs(oracle_toy));
      j["oracle"].erase("command");
    }
    if (batch_size) set("oracle", "batch_size", *batch_size);
    if (jobs) j["jobs"] = *jobs;
    if (!hierarchy.empty()) set("segmentation", "hierarchy", hierarchy);
    if (!guidance.empty()) set("segmentation", "guidance", guidance);
    if (!guidance_path.empty()) set("segmentation", "guidance_path", abs(guidance_path));
    if (!label.empty()) set("segmentation", "label", label);
    if (min_area) set("segmentation", "min_area", *min_area);
    if (!metric.empty()) set("scoring", "metric", metric);
    if (!fill.empty()) set("scoring", "fill", fill);
    if (fill_value) set("scoring", "fill_value", *fill_value);
    if (!references.empty()) set("scoring", "references", abs(references));
    if (!persistence.empty()) set("scoring", "persistence", persistence);
    if (levels) set("render", "levels", *levels);
    if (top_percent) set(section_for_threshold.c_str(), "top_percent", *top_percent);
    if (!mode.empty()) set(section_for_threshold.c_str(), "mode", mode);
    PipelineConfig cfg = config_from_json(j, base);
    if (!cfg.cache_dir) cfg.cache_dir = cache_dir(cfg);
    cfg.validate();
    return cfg;
  }
};

std::size_t parse_class(const std::string& s) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError("class must be a non-negative integer: " + s);
  }
}

Shape3 parse_shape3(const std::string& s) {
  std::vector<std::size_t> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, 'x'))
    try {
      v.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw UsageError("expected CxHxW, got " + s);
    }
  if (v.size() != 3) throw UsageError("expected CxHxW, got " + s);
  return {v[0], v[1], v[2]};
}

void write_json(const fs::path& p, const json& j) { report::write_text(p, j.dump(2) + "\n"); }

json base_meta(const std::string& command, const PipelineConfig& cfg) {
  return {{"tool", "hierxai"}, {"version", kVersion}, {"command", command}, {"config_hash", config_hash(cfg)},
          {"config", cfg.to_json()}};
}

// --- explain ---------------------------------------------------------------

int cmd_explain(const ConfigArgs& ca, const std::string& image, const std::string& manifest, const std::string& cls,
                const std::string& out) {
  if (image.empty() == manifest.empty()) throw UsageError("give exactly one of --image and --manifest");
  const PipelineConfig cfg = ca.build();
  if (!image.empty() && !fs::exists(image)) throw ImageIoError("image not found: " + image);
  auto oracle = make_oracle(cfg);
  const auto info = oracle->hello();
  std::optional<std::size_t> fixed_class;
  if (!cls.empty()) fixed_class = parse_class(cls);

  auto run_one = [&](const fs::path& img_path, std::optional<std::size_t> c, const std::optional<fs::path>& guidance,
                     const fs::path& dir) {
    const Image img = load_for_oracle(img_path, info, cfg.normalization);
    std::optional<RankingContext> ctx;
    const std::size_t klass = c ? *c : argmax(logits_of(*oracle, img));
    if (cfg.metric == Metric::caoc) ctx = ranking_context_for(*oracle, cfg, klass);
    const auto e = explain(*oracle, img, cfg, klass, guidance, ctx ? &*ctx : nullptr);
    write_explanation(dir, img, e, cfg, img_path.filename().string(), oracle->identity());
    return e.method;
  };

  if (!image.empty()) {
    const auto method = run_one(image, fixed_class, std::nullopt, out);
    std::cout << json{{"method", method}, {"out", out}}.dump() << '\n';
    return 0;
  }
  const auto m = load_manifest(manifest);
  json jm = json::parse(std::ifstream(manifest));
  const fs::path out_dir = fs::absolute(out);
  std::string method;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const std::string sub = std::to_string(i) + "_" + e.image.stem().string();
    method = run_one(e.image, fixed_class, e.guidance, out_dir / sub);
    auto& je = jm["entries"][i];
    je["image"] = fs::absolute(e.image).generic_string();
    if (e.guidance) je["guidance"] = fs::absolute(*e.guidance).generic_string();
    for (auto& [k, v] : je["maps"].items()) v = fs::absolute(e.maps.at(k)).generic_string();
    je["maps"][method] = (fs::path(sub) / "scoremap.npy").generic_string();
  }
  write_json(out_dir / "manifest.json", jm);
  std::cout << json{{"method", method}, {"out", out}, {"images", m.entries.size()}}.dump() << '\n';
  return 0;
}

// --- score -----------------------------------------------------------------

int cmd_score(const ConfigArgs& ca, const std::string& image, const std::string& cls, const std::string& out) {
  const PipelineConfig cfg = ca.build();
  if (!fs::exists(image)) throw ImageIoError("image not found: " + image);
  auto oracle = make_oracle(cfg);
  const Image img = load_for_oracle(image, oracle->hello(), cfg.normalization);
  const std::size_t c = cls.empty() ? argmax(logits_of(*oracle, img)) : parse_class(cls);
  std::optional<RankingContext> ctx;
  if (cfg.metric == Metric::caoc) ctx = ranking_context_for(*oracle, cfg, c);
  GuidanceMap g = cfg.guidance == GuidanceSource::sobel
                      ? sobel_edge_map(img)
                      : load_guidance(cfg.guidance_path.value_or(""),
                                      cfg.guidance == GuidanceSource::edge ? GuidanceKind::edge : GuidanceKind::attribution,
                                      img.height(), img.width());
  Hierarchy h = filter_min_area(build_hierarchy(weight_from_guidance(img.height(), img.width(), g, cfg.edge_combine), cfg.hierarchy),
                                std::min(cfg.min_area, img.pixel_count()));
  ScoringOptions so;
  so.batch_size = cfg.batch_size;
  so.jobs = cfg.jobs;
  so.ranking = ctx ? &*ctx : nullptr;
  const auto attrs = score_hierarchy(*oracle, img, h, cfg.metric, c, cfg.fill, so);
  fs::create_directories(out);
  save_attributes(fs::path(out) / "attributes.npy", attrs);
  save_hierarchy(fs::path(out) / "hierarchy.hxt", h);
  json meta = base_meta("score", cfg);
  meta["image"] = fs::path(image).filename().string();
  meta["class_index"] = c;
  meta["metric"] = to_string(cfg.metric);
  meta["nodes"] = h.num_nodes();
  meta["scored"] = h.analyzable_count();
  write_json(fs::path(out) / "meta.json", meta);
  return 0;
}

// --- eval / curves ---------------------------------------------------------

std::vector<std::string> selected_methods(const DatasetManifest& m, const std::vector<std::string>& wanted) {
  const auto all = m.methods();
  if (wanted.empty()) return all;
  for (const auto& w : wanted)
    if (std::find(all.begin(), all.end(), w) == all.end()) throw ConfigError("method not in manifest: " + w);
  return wanted;
}

std::vector<EvalSample> samples_for(const DatasetManifest& m, const std::string& method, const OracleInfo& info,
                                    const PipelineConfig& cfg, std::vector<SkippedImage>& missing) {
  std::vector<EvalSample> out;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const std::string id = std::to_string(i) + ":" + e.image.filename().string();
    if (e.label >= info.n_classes) throw ConfigError("label out of range for " + id);
    auto it = e.maps.find(method);
    if (it == e.maps.end()) {
      missing.push_back({id, "no map for " + method});
      continue;
    }
    EvalSample s{id, load_for_oracle(e.image, info, cfg.normalization), e.label, load_score_map(it->second)};
    if (s.map.height != s.image.height() || s.map.width != s.image.width())
      throw ConfigError("score map size does not match oracle input: " + it->second.string());
    out.push_back(std::move(s));
  }
  return out;
}

int cmd_eval(const ConfigArgs& ca, const std::string& manifest, const std::vector<std::string>& methods, const std::string& out) {
  const PipelineConfig cfg = ca.build("eval");
  const auto m = load_manifest(manifest);
  auto oracle = make_oracle(cfg);
  const auto info = oracle->hello();
  EvalOptions opt{cfg.eval_threshold, cfg.fill, cfg.jobs};
  std::vector<ExclusionReport> ex;
  std::vector<InclusionReport> in;
  for (const auto& method : selected_methods(m, methods)) {
    std::vector<SkippedImage> missing;
    const auto samples = samples_for(m, method, info, cfg, missing);
    ex.push_back(exclusion_eval(*oracle, samples, opt, method));
    in.push_back(inclusion_eval(*oracle, samples, opt, method));
    ex.back().skipped.insert(ex.back().skipped.end(), missing.begin(), missing.end());
    in.back().skipped.insert(in.back().skipped.end(), missing.begin(), missing.end());
  }
  json summary = base_meta("eval", cfg);
  summary["manifest"] = fs::path(manifest).filename().string();
  summary["exclusion"] = json::array();
  summary["inclusion"] = json::array();
  for (const auto& r : ex) summary["exclusion"].push_back(report::to_json(r));
  for (const auto& r : in) summary["inclusion"].push_back(report::to_json(r));
  summary["mcnemar"] = json::array();
  if (!ex.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < ex.size(); ++i)
      if (ex[i].ch > ex[best].ch) best = i;
    summary["best"] = ex[best].method;
    for (std::size_t i = 0; i < ex.size(); ++i) {
      if (i == best) continue;
      json t = report::to_json(compare_exclusion(ex[best], ex[i]));
      t["method"] = ex[i].method;
      t["against"] = ex[best].method;
      summary["mcnemar"].push_back(t);
    }
  }
  fs::create_directories(out);
  report::write_text(fs::path(out) / "exclusion.csv", report::exclusion_csv(ex));
  report::write_text(fs::path(out) / "inclusion.csv", report::inclusion_csv(in));
  write_json(fs::path(out) / "eval.json", summary);
  std::cout << json{{"exclusion", summary["exclusion"]}, {"inclusion", summary["inclusion"]}}.dump() << '\n';
  return 0;
}

int cmd_curves(const ConfigArgs& ca, const std::string& manifest, const std::vector<std::string>& methods, const std::string& out,
               std::optional<double> keep) {
  const PipelineConfig cfg = ca.build("eval");
  const auto m = load_manifest(manifest);
  auto oracle = make_oracle(cfg);
  const auto info = oracle->hello();
  CurveOptions opt;
  opt.thresholds = cfg.thresholds;
  opt.keep_fraction = keep.value_or(cfg.keep_fraction);
  opt.mode = cfg.eval_threshold.mode;
  opt.jobs = cfg.jobs;
  if (!(opt.keep_fraction > 0.0 && opt.keep_fraction <= 1.0)) throw ConfigError("keep fraction must be in (0, 1]");
  std::vector<CurveReport> reps;
  for (const auto& method : selected_methods(m, methods)) {
    std::vector<SkippedImage> missing;
    const auto samples = samples_for(m, method, info, cfg, missing);
    reps.push_back(sic_aic_curves(*oracle, samples, opt, method));
    reps.back().skipped.insert(reps.back().skipped.end(), missing.begin(), missing.end());
  }
  json summary = base_meta("curves", cfg);
  summary["manifest"] = fs::path(manifest).filename().string();
  summary["keep_fraction"] = opt.keep_fraction;
  summary["curves"] = json::array();
  for (const auto& r : reps) summary["curves"].push_back(report::to_json(r));
  fs::create_directories(out);
  report::write_text(fs::path(out) / "curves.csv", report::curves_csv(reps));
  report::write_text(fs::path(out) / "sic.svg", report::curves_svg(reps, false, "Softmax information curve"));
  report::write_text(fs::path(out) / "aic.svg", report::curves_svg(reps, true, "Accuracy information curve"));
  write_json(fs::path(out) / "curves.json", summary);
  json brief = json::array();
  for (const auto& r : reps) brief.push_back({{"method", r.method}, {"auc_sic", r.auc_sic}, {"auc_aic", r.auc_aic}, {"n", r.n}});
  std::cout << brief.dump() << '\n';
  return 0;
}

// --- render / occlusion / check ---------------------------------------------

int cmd_render(const std::string& image, const std::string& scores, const std::string& out, std::size_t levels,
               std::optional<double> top_percent, const std::string& mode) {
  if (!fs::exists(image)) throw ImageIoError("image not found: " + image);
  const ScoreMap s = load_score_map(scores);
  const Image img = load_image(image, Size2{s.height, s.width});
  OverlayOptions opt;
  opt.levels = levels;
  if (top_percent || !mode.empty()) {
    ThresholdSpec t;
    try {
      if (top_percent) t.top_percent = *top_percent;
      if (!mode.empty()) t.mode = parse_threshold_mode(mode);
      t.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    opt.threshold = t;
  }
  if (opt.levels < 1) throw ConfigError("levels must be >= 1");
  const std::string bytes = render_overlay(img, s, opt);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  png::write_file(out, bytes);
  return 0;
}

int cmd_occlusion(const ConfigArgs& ca, const std::string& image, const std::string& cls, const std::string& out,
                  const std::string& window, const std::string& step) {
  const PipelineConfig cfg = ca.build();
  if (!fs::exists(image)) throw ImageIoError("image not found: " + image);
  auto oracle = make_oracle(cfg);
  const Image img = load_for_oracle(image, oracle->hello(), cfg.normalization);
  const std::size_t c = cls.empty() ? argmax(logits_of(*oracle, img)) : parse_class(cls);
  Shape3 w = parse_shape3(window), s = parse_shape3(step);
  w.c = std::min(w.c, img.channels());
  s.c = std::min(s.c, img.channels());
  const ScoreMap map = sliding_occlusion_map(*oracle, img, c, w, s, cfg.fill, cfg.batch_size);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  save_score_map(out, map);
  return 0;
}

int cmd_check(const ConfigArgs& ca) {
  const PipelineConfig cfg = ca.build();
  auto oracle = make_oracle(cfg);
  const auto info = oracle->hello();
  std::cout << json{{"ok", true}, {"classes", info.n_classes}, {"input", info.input_shape}, {"oracle", oracle->identity()}}.dump()
            << '\n';
  return 0;
}

int report_error(const std::string& command, const std::string& msg, int code) {
  std::cerr << json{{"error", msg}, {"command", command}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical occlusion explanations for black-box image classifiers"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  ConfigArgs ca;
  std::string image, manifest, cls, out, scores, window = "3x14x14", step = "3x7x7", render_mode;
  std::vector<std::string> methods;
  std::size_t render_levels = 4;
  std::optional<double> render_top, keep;

  auto* explain = app.add_subcommand("explain", "segment, score, shape and render one image or a manifest");
  ca.add(explain, true);
  explain->add_option("--image", image, "input image (PNG or NPY)");
  explain->add_option("--manifest", manifest, "explain every manifest entry; writes an updated manifest");
  explain->add_option("--class", cls, "class to explain (default: predicted class)");
  explain->add_option("-o,--out", out, "output directory")->required();

  auto* score = app.add_subcommand("score", "per-region occlusion attributes only");
  ca.add(score, true);
  score->add_option("--image", image, "input image")->required();
  score->add_option("--class", cls, "class to score (default: predicted class)");
  score->add_option("-o,--out", out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "exclusion, inclusion, PIR and McNemar over a manifest");
  ca.add(eval, true);
  eval->add_option("--manifest", manifest, "dataset manifest (JSON)")->required();
  eval->add_option("--methods", methods, "methods to evaluate (default: all)")->delimiter(',');
  eval->add_option("-o,--out", out, "output directory")->required();

  auto* curves = app.add_subcommand("curves", "SIC and AIC curves over a manifest");
  ca.add(curves, true);
  curves->add_option("--manifest", manifest, "dataset manifest (JSON)")->required();
  curves->add_option("--methods", methods, "methods to evaluate (default: all)")->delimiter(',');
  curves->add_option("--keep-fraction", keep, "pixels kept by the blurred baseline");
  curves->add_option("-o,--out", out, "output directory")->required();

  auto* render = app.add_subcommand("render", "overlay a score map on an image");
  render->add_option("--image", image, "input image")->required();
  render->add_option("--scores", scores, "score map (NPY, H x W)")->required();
  render->add_option("--levels", render_levels, "brightness bands");
  render->add_option("--top-percent", render_top, "dim everything outside this selection");
  render->add_option("--mode", render_mode, "score_rank | score_range");
  render->add_option("-o,--out", out, "output PNG")->required();

  auto* occl = app.add_subcommand("occlusion", "sliding-window occlusion baseline map");
  ca.add(occl, false);
  occl->add_option("--image", image, "input image")->required();
  occl->add_option("--class", cls, "class (default: predicted class)");
  occl->add_option("--window", window, "window CxHxW")->capture_default_str();
  occl->add_option("--step", step, "step CxHxW")->capture_default_str();
  occl->add_option("--fill", ca.fill, "normalized_zero | constant | dataset_mean");
  occl->add_option("--fill-value", ca.fill_value, "fill value for --fill constant");
  occl->add_option("-o,--out", out, "output NPY")->required();

  auto* check = app.add_subcommand("check", "handshake with the configured oracle");
  ca.add(check, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "explain") return cmd_explain(ca, image, manifest, cls, out);
    if (command == "score") return cmd_score(ca, image, cls, out);
    if (command == "eval") return cmd_eval(ca, manifest, methods, out);
    if (command == "curves") return cmd_curves(ca, manifest, methods, out, keep);
    if (command == "render") return cmd_render(image, scores, out, render_levels, render_top, render_mode);
    if (command == "occlusion") return cmd_occlusion(ca, image, cls, out, window, step);
    if (command == "check") return cmd_check(ca);
  } catch (const UsageError& e) {
    return report_error(command, e.what(), 2);
  } catch (const ConfigError& e) {
    return report_error(command, e.what(), 2);
  } catch (const ManifestError& e) {
    return report_error(command, e.what(), 2);
  } catch (const ImageIoError& e) {
    return report_error(command, e.what(), 2);
  } catch (const std::exception& e) {
    return report_error(command, e.what(), 1);
  }
  return 2;
}
