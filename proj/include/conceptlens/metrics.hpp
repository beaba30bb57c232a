#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "conceptlens/types.hpp"

namespace conceptlens {

struct OverlapResult {
  std::vector<double> per_concept;
  double mean = 0.0;
  std::vector<int> empty_concepts;  // indices with an empty word set
};

// Mean fraction of a concept's grounded words shared with each other concept.
// Words are normalized (marker-stripped, lowercased) before intersecting.
OverlapResult overlap(const std::vector<std::vector<std::string>>& word_sets);

// 2.5 * max(cos(img, txt), 0).
double clip_score(const Vector& image, const Vector& text);

// Text submitted for embedding for one concept: at most `cap` words joined by ", ".
std::string concept_text(const std::vector<WordScore>& words, std::size_t cap = 10);

// Ids used in eval_requests.json and the embedding tables.
std::string concept_text_id(int k);
std::string rnd_text_id(int k);
std::string caption_text_id(const std::string& sample_id, std::size_t i);

struct ScoreReport {
  std::string metric;    // "CS top-1", "CS top-3", "BS top-1", ...
  std::string baseline;  // "method", "rnd_words", "gt_captions", ...
  std::vector<std::string> sample_ids;
  std::vector<double> scores;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  int n = 0;

  static ScoreReport from_scores(std::string metric, std::string baseline, std::vector<std::string> ids,
                                 std::vector<double> scores);
  nlohmann::json to_json() const;
  static ScoreReport from_json(const nlohmann::json& j);
};

// Per test sample: mean CLIPScore between the image and the texts of its r
// most activating concepts. `text_id` maps a concept index to its text id.
ScoreReport eval_topr(const ActivationMatrix& test_acts, int num_concepts, const EmbeddingTable& images,
                      const EmbeddingTable& texts, int r, std::string baseline,
                      std::string (*text_id)(int) = &concept_text_id);

// Reference baseline: per sample, the best CLIPScore over its own captions.
ScoreReport eval_gt_captions(const std::vector<std::string>& sample_ids, const std::vector<std::size_t>& caption_counts,
                             const EmbeddingTable& images, const EmbeddingTable& texts);

struct PhraseScore {
  std::string sample_id;
  int concept_index = 0;
  std::string phrase;
  double score_f1 = 0.0;
};

std::vector<PhraseScore> parse_external_scores(const nlohmann::json& j);

// Per sample: over its r most activating concepts, the best phrase score for
// each (sample, concept) pair, averaged. Pairs without phrases are skipped;
// samples left with none are dropped from the report.
ScoreReport eval_bertscore(const ActivationMatrix& test_acts, const std::vector<PhraseScore>& pairs, int r,
                           std::string baseline = "method");

struct Specificity {
  double tau = 0.0;
  double fraction = 0.0;
  int top_count = 0;
};

// tau = max/2; fraction of samples with activation > tau that carry the label.
Specificity specificity(std::span<const double> activations, const std::vector<bool>& true_labels);

struct TTest {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's unequal-variance t-test.
TTest welch_ttest(std::span<const double> a, std::span<const double> b);

}  // namespace conceptlens
