#pragma once

// Static report: report.json carries every number shown, report.html is
// rendered from that JSON alone and references no network resources.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "conceptlens/metrics.hpp"
#include "conceptlens/types.hpp"

namespace conceptlens {

struct Curve {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::pair<double, double>> points;
};

struct SaliencyPanel {
  int concept_index = 0;
  std::string sample_id;
  Matrix map;  // raw scores; the page min-max normalizes per map
};

struct ReportInputs {
  GroundingResult grounding;
  // sample id -> image reference used by the page. Samples absent here get a
  // placeholder tile.
  std::map<std::string, std::string> image_paths;
  std::optional<ActivationMatrix> activations;  // drives per-sample top-r panels
  int r = 3;
  std::vector<std::vector<std::string>> rnd_words;  // per concept, optional
  std::vector<ScoreReport> scores;
  std::vector<TTest> ttests;
  std::vector<std::pair<std::string, std::string>> ttest_labels;  // (a, b) per entry of ttests
  std::vector<Curve> curves;
  std::vector<SaliencyPanel> saliency;
};

nlohmann::json report_json(const ReportInputs& in);
std::string render_html(const nlohmann::json& report);

std::string html_escape(std::string_view s);

}  // namespace conceptlens
