#include "conceptlens/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "conceptlens/bundleio.hpp"
#include "conceptlens/error.hpp"
#include "conceptlens/grounding.hpp"

namespace conceptlens {

using json = nlohmann::json;

namespace {

json image_ref(const std::map<std::string, std::string>& paths, const std::string& id) {
  auto it = paths.find(id);
  if (it == paths.end()) return nullptr;
  return it->second;
}

std::string fmt(double v, const char* spec = "%.3f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

json report_json(const ReportInputs& in) {
  const auto& g = in.grounding;
  require(in.r >= 1, ErrorCode::parameter, "report: r must be >= 1");
  require(in.rnd_words.empty() || in.rnd_words.size() == g.concepts.size(), ErrorCode::parameter,
          "report: rnd-words concept count does not match the grounding");
  require(in.ttests.size() == in.ttest_labels.size(), ErrorCode::parameter, "report: t-test labels missing");

  json out = to_json(g);
  out["r"] = in.r;

  std::optional<OverlapResult> ov;
  if (g.concepts.size() >= 2) {
    std::vector<std::vector<std::string>> sets;
    for (const auto& c : g.concepts) {
      sets.emplace_back();
      for (const auto& w : c.words) sets.back().push_back(w.word);
    }
    ov = overlap(sets);
  }
  out["overlap"] = ov ? json{{"mean", ov->mean}, {"per_concept", ov->per_concept}, {"empty_concepts", ov->empty_concepts}}
                      : json(nullptr);

  for (std::size_t k = 0; k < g.concepts.size(); ++k) {
    auto& cj = out["concepts"][k];
    for (auto& m : cj["mas"]) m["image"] = image_ref(in.image_paths, m["sample_id"].get<std::string>());
    if (!in.rnd_words.empty()) cj["rnd_words"] = in.rnd_words[k];
  }

  json samples = json::array();
  if (in.activations) {
    const auto& acts = *in.activations;
    require(acts.values.rows() == static_cast<Eigen::Index>(g.concepts.size()), ErrorCode::parameter,
            "report: activations K does not match the grounding");
    for (std::size_t j = 0; j < acts.sample_ids.size(); ++j) {
      json top = json::array();
      for (const auto& c : top_activating_concepts(acts.values.col(static_cast<Eigen::Index>(j)), in.r))
        top.push_back({{"concept", c.index}, {"activation", c.activation}, {"share", c.share}});
      samples.push_back({{"sample_id", acts.sample_ids[j]},
                         {"image", image_ref(in.image_paths, acts.sample_ids[j])},
                         {"top", top}});
    }
  }
  out["samples"] = samples;

  json scores = json::array();
  for (const auto& s : in.scores) scores.push_back(s.to_json());
  out["scores"] = scores;

  json ttests = json::array();
  for (std::size_t i = 0; i < in.ttests.size(); ++i)
    ttests.push_back({{"a", in.ttest_labels[i].first},
                      {"b", in.ttest_labels[i].second},
                      {"t", in.ttests[i].t},
                      {"dof", in.ttests[i].dof},
                      {"p", in.ttests[i].p}});
  out["ttests"] = ttests;

  json curves = json::array();
  for (const auto& c : in.curves) {
    json pts = json::array();
    for (const auto& [x, y] : c.points) pts.push_back({x, y});
    curves.push_back({{"title", c.title}, {"x_label", c.x_label}, {"y_label", c.y_label}, {"points", pts}});
  }
  out["curves"] = curves;

  json saliency = json::array();
  for (const auto& s : in.saliency) {
    std::vector<double> values;
    for (Eigen::Index i = 0; i < s.map.rows(); ++i)
      for (Eigen::Index j = 0; j < s.map.cols(); ++j) values.push_back(s.map(i, j));
    saliency.push_back({{"concept", s.concept_index},
                        {"sample_id", s.sample_id},
                        {"rows", s.map.rows()},
                        {"cols", s.map.cols()},
                        {"values", values}});
  }
  out["saliency"] = saliency;
  return out;
}

namespace {

constexpr const char* kStyle = R"(body{font-family:sans-serif;margin:2em;color:#222;max-width:1100px}
h2{border-bottom:1px solid #ccc;padding-bottom:.2em}
.strip{display:flex;gap:6px;flex-wrap:wrap}
.tile{width:120px;text-align:center;font-size:11px}
.tile img{width:120px;height:120px;object-fit:cover;display:block}
.placeholder{width:120px;height:120px;background:#e4e4e4;color:#777;display:flex;align-items:center;justify-content:center}
.words span{display:inline-block;background:#eef3fb;border-radius:3px;padding:1px 5px;margin:2px;font-size:13px}
.words.rnd span{background:#f5eee6}
.empty{color:#a33;font-style:italic}
table{border-collapse:collapse;margin:.5em 0}
td,th{border:1px solid #ccc;padding:3px 8px;font-size:13px;text-align:right}
th{background:#f4f4f4}
.panel{display:flex;gap:12px;align-items:center;margin:8px 0}
.bar{background:#4a78c2;height:10px;display:inline-block;vertical-align:middle;margin-right:6px}
)";

std::string tile(const json& image, const std::string& caption) {
  std::ostringstream o;
  o << "<div class=\"tile\">";
  if (image.is_string())
    o << "<img src=\"" << html_escape(image.get<std::string>()) << "\" alt=\"" << html_escape(caption) << "\">";
  else
    o << "<div class=\"placeholder\">no image</div>";
  o << html_escape(caption) << "</div>";
  return o.str();
}

std::string concept_label(const json& entry, std::size_t max_words = 3) {
  std::string s = "concept " + std::to_string(entry["index"].get<int>());
  const auto& words = entry["words"];
  if (words.empty()) return s;
  s += " (";
  for (std::size_t i = 0; i < std::min(max_words, words.size()); ++i) {
    if (i) s += ", ";
    s += words[i]["word"].get<std::string>();
  }
  return s + ")";
}

std::string svg_chart(const json& curve) {
  constexpr double w = 520, h = 280, left = 60, right = 20, top = 20, bottom = 45;
  const auto& pts = curve["points"];
  double xmin = pts[0][0], xmax = xmin, ymin = pts[0][1], ymax = ymin;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p[0].get<double>());
    xmax = std::max(xmax, p[0].get<double>());
    ymin = std::min(ymin, p[1].get<double>());
    ymax = std::max(ymax, p[1].get<double>());
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (w - left - right); };
  auto sy = [&](double y) { return h - bottom - (y - ymin) / (ymax - ymin) * (h - top - bottom); };

  std::ostringstream o;
  o << "<svg width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\">";
  o << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
    << "\" stroke=\"#444\"/>";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
    << "\" stroke=\"#444\"/>";
  o << "<polyline fill=\"none\" stroke=\"#4a78c2\" stroke-width=\"2\" points=\"";
  for (const auto& p : pts) o << fmt(sx(p[0]), "%.1f") << ',' << fmt(sy(p[1]), "%.1f") << ' ';
  o << "\"/>";
  for (const auto& p : pts) {
    o << "<circle cx=\"" << fmt(sx(p[0]), "%.1f") << "\" cy=\"" << fmt(sy(p[1]), "%.1f")
      << "\" r=\"3\" fill=\"#4a78c2\"/>";
    o << "<text x=\"" << fmt(sx(p[0]), "%.1f") << "\" y=\"" << h - bottom + 15
      << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(p[0], "%g") << "</text>";
  }
  o << "<text x=\"" << left - 5 << "\" y=\"" << top + 4 << "\" font-size=\"10\" text-anchor=\"end\">"
    << fmt(ymax, "%.4g") << "</text>";
  o << "<text x=\"" << left - 5 << "\" y=\"" << h - bottom << "\" font-size=\"10\" text-anchor=\"end\">"
    << fmt(ymin, "%.4g") << "</text>";
  o << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 8 << "\" font-size=\"12\" text-anchor=\"middle\">"
    << html_escape(curve["x_label"].get<std::string>()) << "</text>";
  o << "<text x=\"14\" y=\"" << (top + h - bottom) / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << (top + h - bottom) / 2 << ")\">" << html_escape(curve["y_label"].get<std::string>()) << "</text>";
  o << "</svg>";
  return o.str();
}

std::string svg_heatmap(const json& s) {
  const int rows = s["rows"], cols = s["cols"];
  const auto& v = s["values"];
  double lo = 0, hi = 0;
  if (!v.empty()) {
    lo = hi = v[0].get<double>();
    for (const auto& x : v) {
      lo = std::min(lo, x.get<double>());
      hi = std::max(hi, x.get<double>());
    }
  }
  const double cell = std::max(2.0, std::min(16.0, 160.0 / std::max(rows, cols)));
  std::ostringstream o;
  o << "<svg width=\"" << cell * cols << "\" height=\"" << cell * rows << "\">";
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const double x = v[static_cast<std::size_t>(i * cols + j)];
      const double t = hi > lo ? (x - lo) / (hi - lo) : 0.0;
      const int red = static_cast<int>(std::lround(255 * t));
      const int blue = 255 - red;
      o << "<rect x=\"" << j * cell << "\" y=\"" << i * cell << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"rgb(" << red << ",40," << blue << ")\"/>";
    }
  o << "</svg>";
  return o.str();
}

}  // namespace

std::string render_html(const json& report) {
  std::ostringstream o;
  const auto& concepts = report["concepts"];
  o << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Concept report</title>\n<style>"
    << kStyle << "</style>\n</head>\n<body>\n";
  o << "<h1>Concept report</h1>\n<p>method: " << html_escape(report["method"].get<std::string>())
    << " &middot; dictionary " << html_escape(report["dictionary_id"].get<std::string>().substr(0, 12))
    << " &middot; " << concepts.size() << " concepts</p>\n";

  if (concepts.empty()) o << "<p class=\"empty\">no concepts</p>\n";

  for (const auto& c : concepts) {
    const int k = c["index"];
    o << "<section class=\"concept\" id=\"concept-" << k << "\">\n<h2>" << html_escape(concept_label(c)) << "</h2>\n";
    o << "<div class=\"strip\">";
    for (const auto& m : c["mas"])
      o << tile(m["image"], m["sample_id"].get<std::string>() + " | " + fmt(m["activation"]));
    o << "</div>\n";
    if (c["empty_words"].get<bool>()) {
      o << "<p class=\"empty\">no grounded words</p>\n";
    } else {
      o << "<p class=\"words\">";
      for (const auto& w : c["words"])
        o << "<span title=\"logit " << fmt(w["logit"], "%.4g") << "\">" << html_escape(w["word"].get<std::string>())
          << "</span>";
      o << "</p>\n";
    }
    if (c.contains("rnd_words")) {
      o << "<p class=\"words rnd\">random words: ";
      for (const auto& w : c["rnd_words"]) o << "<span>" << html_escape(w.get<std::string>()) << "</span>";
      o << "</p>\n";
    }
    o << "</section>\n";
  }

  if (!report["overlap"].is_null()) {
    const auto& ov = report["overlap"];
    o << "<h2>Overlap</h2>\n<table><tr><th>concept</th><th>overlap</th></tr>";
    for (std::size_t k = 0; k < ov["per_concept"].size(); ++k)
      o << "<tr><td>" << k << "</td><td>" << fmt(ov["per_concept"][k]) << "</td></tr>";
    o << "<tr><th>mean</th><th>" << fmt(ov["mean"]) << "</th></tr></table>\n";
  }

  if (!report["samples"].empty()) {
    o << "<h2>Most activating concepts per sample (top " << report["r"].get<int>() << ")</h2>\n";
    for (const auto& s : report["samples"]) {
      o << "<div class=\"panel\">" << tile(s["image"], s["sample_id"].get<std::string>()) << "<div>";
      for (const auto& t : s["top"]) {
        const int k = t["concept"];
        const double share = t["share"];
        o << "<div><span class=\"bar\" style=\"width:" << fmt(120 * share, "%.0f") << "px\"></span>"
          << html_escape(concept_label(concepts[static_cast<std::size_t>(k)])) << " " << fmt(share) << "</div>";
      }
      o << "</div></div>\n";
    }
  }

  if (!report["scores"].empty()) {
    o << "<h2>Scores</h2>\n<table><tr><th>metric</th><th>baseline</th><th>mean &plusmn; std</th><th>n</th></tr>";
    for (const auto& s : report["scores"])
      o << "<tr><td>" << html_escape(s["metric"].get<std::string>()) << "</td><td>"
        << html_escape(s["baseline"].get<std::string>()) << "</td><td>" << fmt(s["mean"]) << " &plusmn; "
        << fmt(s["std"], "%.2f") << "</td><td>" << s["n"].get<int>() << "</td></tr>";
    o << "</table>\n";
  }
  if (!report["ttests"].empty()) {
    o << "<table><tr><th>a</th><th>b</th><th>t</th><th>p</th></tr>";
    for (const auto& t : report["ttests"])
      o << "<tr><td>" << html_escape(t["a"].get<std::string>()) << "</td><td>" << html_escape(t["b"].get<std::string>())
        << "</td><td>" << fmt(t["t"]) << "</td><td>" << fmt(t["p"], "%.3g") << "</td></tr>";
    o << "</table>\n";
  }

  for (const auto& c : report["curves"]) {
    o << "<h2>" << html_escape(c["title"].get<std::string>()) << "</h2>\n";
    if (c["points"].empty())
      o << "<p class=\"empty\">no points</p>\n";
    else
      o << svg_chart(c) << "\n";
  }

  if (!report["saliency"].empty()) {
    o << "<h2>Saliency</h2>\n<div class=\"strip\">";
    for (const auto& s : report["saliency"])
      o << "<div class=\"tile\">" << svg_heatmap(s) << "concept " << s["concept"].get<int>() << " | "
        << html_escape(s["sample_id"].get<std::string>()) << "</div>";
    o << "</div>\n";
  }

  o << "</body>\n</html>\n";
  return o.str();
}

}  // namespace conceptlens
