#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hierxai/eval.hpp"

namespace hierxai::report {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::string exclusion_csv(const std::vector<ExclusionReport>& reports) {
  std::ostringstream os;
  os << "method,image,label,original_class,new_class,original_logit,occluded_logit,masked_pixels,changed,same,impact,pir\n";
  for (const auto& rep : reports)
    for (const auto& r : rep.rows)
      os << csv_field(rep.method) << ',' << csv_field(r.id) << ',' << r.label << ',' << r.original_class << ',' << r.new_class
         << ',' << num(r.original_logit) << ',' << num(r.occluded_logit) << ',' << r.masked_pixels << ',' << int(r.changed)
         << ',' << int(r.same) << ',' << num(r.impact) << ',' << num(r.pir) << '\n';
  return os.str();
}

inline std::string inclusion_csv(const std::vector<InclusionReport>& reports) {
  std::ostringstream os;
  os << "method,image,original_class,new_class,kept_pixels,changed\n";
  for (const auto& rep : reports)
    for (const auto& r : rep.rows)
      os << csv_field(rep.method) << ',' << csv_field(r.id) << ',' << r.original_class << ',' << r.new_class << ','
         << r.kept_pixels << ',' << int(r.changed) << '\n';
  return os.str();
}

inline std::string curves_csv(const std::vector<CurveReport>& reports) {
  std::ostringstream os;
  os << "method,threshold,sic,aic,accuracy\n";
  for (const auto& rep : reports)
    for (std::size_t j = 0; j < rep.thresholds.size(); ++j)
      os << csv_field(rep.method) << ',' << num(rep.thresholds[j]) << ',' << num(rep.sic[j]) << ',' << num(rep.aic[j]) << ','
         << num(rep.accuracy[j]) << '\n';
  return os.str();
}

inline nlohmann::json skipped_json(const std::vector<SkippedImage>& s) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& x : s) j.push_back({{"image", x.id}, {"error", x.error}});
  return j;
}

inline nlohmann::json to_json(const ExclusionReport& r) {
  return {{"method", r.method}, {"top_percent", r.top_percent}, {"ch", r.ch},         {"same", r.same},
          {"total", r.total},   {"mean_pir", r.mean_pir},       {"n", r.n},           {"skipped", skipped_json(r.skipped)}};
}

inline nlohmann::json to_json(const InclusionReport& r) {
  return {{"method", r.method}, {"top_percent", r.top_percent}, {"changed", r.changed}, {"n", r.n},
          {"skipped", skipped_json(r.skipped)}};
}

inline nlohmann::json to_json(const CurveReport& r) {
  return {{"method", r.method}, {"thresholds", r.thresholds}, {"sic", r.sic},   {"aic", r.aic},
          {"accuracy", r.accuracy}, {"auc_sic", r.auc_sic},   {"auc_aic", r.auc_aic}, {"n", r.n},
          {"skipped", skipped_json(r.skipped)}};
}

inline nlohmann::json to_json(const McNemarResult& m) {
  return {{"statistic", m.statistic}, {"p_value", m.p_value}, {"method", m.method}};
}

/// Line chart of one curve family (e.g. all methods' SIC) as standalone SVG.
inline std::string curves_svg(const std::vector<CurveReport>& reports, bool aic, const std::string& title) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  constexpr double W = 640, H = 400, L = 60, R = 180, T = 40, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  double xmax = 0.0;
  for (const auto& r : reports)
    if (!r.thresholds.empty()) xmax = std::max(xmax, r.thresholds.back());
  if (xmax <= 0.0) xmax = 100.0;
  auto px = [&](double x) { return L + x / xmax * pw; };
  auto py = [&](double y) { return T + (1.0 - y) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' '
     << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(title)
     << "</text>\n";
  os << "<g stroke=\"#444\" fill=\"none\"><rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\"/></g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = k / 4.0;
    os << "<text x=\"" << L - 6 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << num(y) << "</text>\n";
    const double x = xmax * k / 4.0;
    os << "<text x=\"" << num(px(x)) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">" << num(x) << "</text>\n";
  }
  os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">threshold (%)</text>\n";
  os << "</g>\n";
  for (std::size_t m = 0; m < reports.size(); ++m) {
    const auto& r = reports[m];
    const auto& ys = aic ? r.aic : r.sic;
    const char* color = kColors[m % (sizeof(kColors) / sizeof(kColors[0]))];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t j = 0; j < ys.size(); ++j) os << (j ? " " : "") << num(px(r.thresholds[j])) << ',' << num(py(ys[j]));
    os << "\"/>\n";
    const double ly = T + 14 + 18.0 * static_cast<double>(m);
    os << "<line x1=\"" << L + pw + 12 << "\" y1=\"" << num(ly) << "\" x2=\"" << L + pw + 32 << "\" y2=\"" << num(ly)
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << L + pw + 38 << "\" y=\"" << num(ly + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(r.method) << " (AUC " << num(aic ? r.auc_aic : r.auc_sic)
       << ")</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace hierxai::report
