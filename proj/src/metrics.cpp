#include "conceptlens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "conceptlens/error.hpp"
#include "conceptlens/grounding.hpp"

namespace conceptlens {

using json = nlohmann::json;

OverlapResult overlap(const std::vector<std::vector<std::string>>& word_sets) {
  require(word_sets.size() >= 2, ErrorCode::parameter, "overlap needs at least two concepts");
  const WordFilter normalizer;
  std::vector<std::set<std::string>> sets;
  for (const auto& ws : word_sets) {
    std::set<std::string> s;
    for (const auto& w : ws) s.insert(normalizer.normalize(w));
    sets.push_back(std::move(s));
  }
  const auto k_count = sets.size();
  OverlapResult out;
  for (std::size_t k = 0; k < k_count; ++k) {
    if (sets[k].empty()) {
      out.per_concept.push_back(0.0);
      out.empty_concepts.push_back(static_cast<int>(k));
      continue;
    }
    double acc = 0.0;
    for (std::size_t l = 0; l < k_count; ++l) {
      if (l == k) continue;
      const auto common = std::count_if(sets[k].begin(), sets[k].end(), [&](const auto& w) { return sets[l].count(w) > 0; });
      acc += static_cast<double>(common) / static_cast<double>(sets[k].size());
    }
    out.per_concept.push_back(acc / static_cast<double>(k_count - 1));
  }
  double sum = 0.0;
  for (double v : out.per_concept) sum += v;
  out.mean = sum / static_cast<double>(k_count);
  return out;
}

double clip_score(const Vector& image, const Vector& text) {
  require(image.size() == text.size(), ErrorCode::parameter, "clip_score: embedding dimensions differ");
  const double ni = image.norm();
  const double nt = text.norm();
  require(ni > 0.0 && nt > 0.0, ErrorCode::data, "clip_score: zero embedding");
  return 2.5 * std::max(image.dot(text) / (ni * nt), 0.0);
}

std::string concept_text(const std::vector<WordScore>& words, std::size_t cap) {
  std::string out;
  for (std::size_t i = 0; i < std::min(cap, words.size()); ++i) {
    if (i) out += ", ";
    out += words[i].word;
  }
  return out;
}

std::string concept_text_id(int k) { return "concept:" + std::to_string(k); }
std::string rnd_text_id(int k) { return "rnd:" + std::to_string(k); }
std::string caption_text_id(const std::string& sample_id, std::size_t i) {
  return "caption:" + sample_id + ":" + std::to_string(i);
}

ScoreReport ScoreReport::from_scores(std::string metric, std::string baseline, std::vector<std::string> ids,
                                     std::vector<double> scores) {
  ScoreReport r;
  r.metric = std::move(metric);
  r.baseline = std::move(baseline);
  r.sample_ids = std::move(ids);
  r.scores = std::move(scores);
  r.n = static_cast<int>(r.scores.size());
  if (r.n > 0) {
    double sum = 0.0;
    for (double s : r.scores) sum += s;
    r.mean = sum / r.n;
    double sq = 0.0;
    for (double s : r.scores) sq += (s - r.mean) * (s - r.mean);
    r.std = std::sqrt(sq / r.n);
  }
  return r;
}

json ScoreReport::to_json() const {
  return {{"metric", metric}, {"baseline", baseline}, {"n", n},         {"mean", mean},
          {"std", std},       {"sample_ids", sample_ids}, {"scores", scores}};
}

ScoreReport ScoreReport::from_json(const json& j) {
  try {
    return from_scores(j.at("metric").get<std::string>(), j.at("baseline").get<std::string>(),
                       j.at("sample_ids").get<std::vector<std::string>>(), j.at("scores").get<std::vector<double>>());
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, std::string("malformed score report: ") + e.what());
  }
}

namespace {

std::unordered_map<std::string, Eigen::Index> index_of(const EmbeddingTable& t) {
  std::unordered_map<std::string, Eigen::Index> idx;
  for (std::size_t i = 0; i < t.ids.size(); ++i) idx.emplace(t.ids[i], static_cast<Eigen::Index>(i));
  return idx;
}

Vector row(const EmbeddingTable& t, const std::unordered_map<std::string, Eigen::Index>& idx, const std::string& id) {
  auto it = idx.find(id);
  if (it == idx.end())
    fail(ErrorCode::missing_dependency, "missing " + std::string(to_string(t.space)) + " embedding for id '" + id + "'");
  return t.embeddings.row(it->second).transpose();
}

}  // namespace

ScoreReport eval_topr(const ActivationMatrix& test_acts, int num_concepts, const EmbeddingTable& images,
                      const EmbeddingTable& texts, int r, std::string baseline, std::string (*text_id)(int)) {
  require(r >= 1, ErrorCode::parameter, "eval_topr: r must be >= 1");
  require(test_acts.values.rows() == num_concepts, ErrorCode::parameter,
          "eval_topr: activations K does not match the grounding");
  const auto img_idx = index_of(images);
  const auto txt_idx = index_of(texts);
  std::vector<double> scores;
  for (std::size_t j = 0; j < test_acts.sample_ids.size(); ++j) {
    const Vector img = row(images, img_idx, test_acts.sample_ids[j]);
    const auto top = top_activating_concepts(test_acts.values.col(static_cast<Eigen::Index>(j)), r);
    double acc = 0.0;
    for (const auto& c : top) acc += clip_score(img, row(texts, txt_idx, text_id(c.index)));
    scores.push_back(acc / static_cast<double>(top.size()));
  }
  return ScoreReport::from_scores("CS top-" + std::to_string(r), std::move(baseline), test_acts.sample_ids,
                                  std::move(scores));
}

ScoreReport eval_gt_captions(const std::vector<std::string>& sample_ids, const std::vector<std::size_t>& caption_counts,
                             const EmbeddingTable& images, const EmbeddingTable& texts) {
  require(sample_ids.size() == caption_counts.size(), ErrorCode::parameter,
          "eval_gt_captions: caption counts do not match samples");
  const auto img_idx = index_of(images);
  const auto txt_idx = index_of(texts);
  std::vector<double> scores;
  for (std::size_t j = 0; j < sample_ids.size(); ++j) {
    require(caption_counts[j] > 0, ErrorCode::data, "eval_gt_captions: sample '" + sample_ids[j] + "' has no captions");
    const Vector img = row(images, img_idx, sample_ids[j]);
    double best = 0.0;
    for (std::size_t i = 0; i < caption_counts[j]; ++i)
      best = std::max(best, clip_score(img, row(texts, txt_idx, caption_text_id(sample_ids[j], i))));
    scores.push_back(best);
  }
  return ScoreReport::from_scores("CS top-1", "gt_captions", sample_ids, std::move(scores));
}

std::vector<PhraseScore> parse_external_scores(const json& j) {
  try {
    std::vector<PhraseScore> out;
    for (const auto& p : j.at("pairs"))
      out.push_back({p.at("sample_id").get<std::string>(), p.at("concept").get<int>(), p.at("phrase").get<std::string>(),
                     p.at("score_f1").get<double>()});
    return out;
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, std::string("malformed external_scores.json: ") + e.what());
  }
}

ScoreReport eval_bertscore(const ActivationMatrix& test_acts, const std::vector<PhraseScore>& pairs, int r,
                           std::string baseline) {
  require(r >= 1, ErrorCode::parameter, "eval_bertscore: r must be >= 1");
  std::map<std::pair<std::string, int>, double> best;
  for (const auto& p : pairs) {
    auto key = std::make_pair(p.sample_id, p.concept_index);
    auto it = best.find(key);
    if (it == best.end())
      best.emplace(key, p.score_f1);
    else
      it->second = std::max(it->second, p.score_f1);
  }
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (std::size_t j = 0; j < test_acts.sample_ids.size(); ++j) {
    double acc = 0.0;
    int found = 0;
    for (const auto& c : top_activating_concepts(test_acts.values.col(static_cast<Eigen::Index>(j)), r)) {
      auto it = best.find({test_acts.sample_ids[j], c.index});
      if (it == best.end()) continue;
      acc += it->second;
      ++found;
    }
    if (found == 0) continue;
    ids.push_back(test_acts.sample_ids[j]);
    scores.push_back(acc / found);
  }
  return ScoreReport::from_scores("BS top-" + std::to_string(r), std::move(baseline), std::move(ids), std::move(scores));
}

Specificity specificity(std::span<const double> activations, const std::vector<bool>& true_labels) {
  require(activations.size() == true_labels.size(), ErrorCode::parameter,
          "specificity: label count does not match activations");
  require(!activations.empty(), ErrorCode::data, "specificity: no samples");
  const double peak = *std::max_element(activations.begin(), activations.end());
  require(peak > 0.0, ErrorCode::data, "specificity: undefined, no positive activation");
  Specificity s;
  s.tau = peak / 2.0;
  int hits = 0;
  for (std::size_t i = 0; i < activations.size(); ++i) {
    if (activations[i] <= s.tau) continue;
    ++s.top_count;
    if (true_labels[i]) ++hits;
  }
  s.fraction = static_cast<double>(hits) / s.top_count;
  return s;
}

TTest welch_ttest(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 2 && b.size() >= 2, ErrorCode::parameter, "welch_ttest: each sample needs at least 2 values");
  auto moments = [](std::span<const double> x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double sa = va / static_cast<double>(a.size());
  const double sb = vb / static_cast<double>(b.size());
  require(sa + sb > 0.0, ErrorCode::data, "welch_ttest: degenerate variance");

  TTest out;
  out.t = (ma - mb) / std::sqrt(sa + sb);
  out.dof = (sa + sb) * (sa + sb) /
            (sa * sa / static_cast<double>(a.size() - 1) + sb * sb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(out.dof);
  out.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t))));
  return out;
}

}  // namespace conceptlens
