#include "conceptlens/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "conceptlens/rng.hpp"

#ifndef CONCEPTLENS_DATA_DIR
#define CONCEPTLENS_DATA_DIR "data"
#endif

namespace conceptlens {

namespace fs = std::filesystem;

namespace {

std::unordered_set<std::string> load_word_set(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read word list " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  if (words.empty()) fail(ErrorCode::data, "word list is empty: " + path.string());
  return words;
}

fs::path env_or(const char* var, const fs::path& fallback) {
  if (const char* v = std::getenv(var); v && *v) return v;
  return fallback;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

fs::path default_wordlist_path() {
  return env_or("CONCEPTLENS_WORDLIST", fs::path(CONCEPTLENS_DATA_DIR) / "english_words.txt");
}

fs::path default_stopwords_path() {
  return env_or("CONCEPTLENS_STOPWORDS", fs::path(CONCEPTLENS_DATA_DIR) / "stopwords.txt");
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string WordFilter::normalize(std::string_view token) const {
  auto trim = [](std::string_view& s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  };
  trim(token);
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (const auto& marker : prefix_markers) {
      if (!marker.empty() && token.starts_with(marker)) {
        token.remove_prefix(marker.size());
        stripped = true;
      }
    }
    trim(token);
  }
  std::string out(token);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

bool WordFilter::accepts(const std::string& w) const {
  return utf8_length(w) >= static_cast<std::size_t>(min_word_len) && english.count(w) > 0 && stopwords.count(w) == 0;
}

WordFilter WordFilter::from_files(const fs::path& english, const fs::path& stopwords) {
  WordFilter f;
  f.english = load_word_set(english);
  f.stopwords = load_word_set(stopwords);
  return f;
}

WordFilter WordFilter::bundled() { return from_files(default_wordlist_path(), default_stopwords_path()); }

std::vector<MasEntry> select_mas(const ActivationMatrix& acts, int k, int n_mas, std::span<const double> tie_key) {
  require(k >= 0 && k < acts.values.rows(), ErrorCode::parameter,
          "select_mas: concept index " + std::to_string(k) + " out of range");
  require(n_mas >= 1, ErrorCode::parameter, "select_mas: n_mas must be >= 1");
  const Eigen::Index m = acts.values.cols();
  require(tie_key.empty() || static_cast<Eigen::Index>(tie_key.size()) == m, ErrorCode::parameter,
          "select_mas: tie_key length does not match sample count");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(n_mas), order.size());
  auto mag = [&](Eigen::Index j) { return std::abs(acts.values(k, j)); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      if (mag(a) != mag(b)) return mag(a) > mag(b);
                      if (!tie_key.empty() && tie_key[static_cast<std::size_t>(a)] != tie_key[static_cast<std::size_t>(b)])
                        return tie_key[static_cast<std::size_t>(a)] < tie_key[static_cast<std::size_t>(b)];
                      return a < b;
                    });
  std::vector<MasEntry> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({acts.sample_ids[static_cast<std::size_t>(order[i])], mag(order[i])});
  return out;
}

std::vector<WordScore> decode_concept_words(const Matrix& unembedding, const std::vector<std::string>& vocab,
                                            const Vector& atom, int top_tokens) {
  require(unembedding.cols() == atom.size(), ErrorCode::parameter, "decode: W_U columns do not match atom length");
  require(unembedding.rows() == static_cast<Eigen::Index>(vocab.size()), ErrorCode::parameter,
          "decode: W_U rows do not match vocab size");
  require(top_tokens >= 1, ErrorCode::parameter, "decode: top_tokens must be >= 1");
  const Vector logits = unembedding * atom;
  std::vector<Eigen::Index> order(vocab.size());
  std::iota(order.begin(), order.end(), 0);
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(top_tokens), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      if (logits(a) != logits(b)) return logits(a) > logits(b);
                      return a < b;
                    });
  std::vector<WordScore> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({vocab[static_cast<std::size_t>(order[i])], logits(order[i])});
  return out;
}

std::vector<WordScore> filter_words(const std::vector<WordScore>& raw, const WordFilter& filter) {
  std::vector<WordScore> kept;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& [token, logit] : raw) {
    std::string w = filter.normalize(token);
    if (!filter.accepts(w)) continue;
    if (auto it = seen.find(w); it != seen.end()) {
      kept[it->second].logit = std::max(kept[it->second].logit, logit);
      continue;
    }
    seen.emplace(w, kept.size());
    kept.push_back({std::move(w), logit});
  }
  std::stable_sort(kept.begin(), kept.end(), [](const WordScore& a, const WordScore& b) { return a.logit > b.logit; });
  return kept;
}

Vector final_norm(const Vector& u) {
  const double mean = u.mean();
  const Vector centered = u.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(u.size(), 1));
  return centered / std::sqrt(var + 1e-5);
}

std::vector<std::string> rnd_words(const Matrix& unembedding, const std::vector<std::string>& vocab, int count,
                                   const WordFilter& filter, std::uint64_t seed, const RndWordsOptions& opts) {
  require(count >= 0, ErrorCode::parameter, "rnd_words: count must be >= 0");
  std::vector<std::string> words;
  if (count == 0) return words;
  const int max_draws = opts.max_draws > 0 ? opts.max_draws : 100 + 20 * count;
  std::unordered_set<std::string> seen;
  Rng rng(seed);
  Vector z(unembedding.cols());
  for (int draw = 0; draw < max_draws; ++draw) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
    z *= opts.scale / z.norm();
    for (const auto& ws : filter_words(decode_concept_words(unembedding, vocab, z, opts.top_tokens), filter)) {
      if (!seen.insert(ws.word).second) continue;
      words.push_back(ws.word);
      if (static_cast<int>(words.size()) == count) return words;
    }
  }
  throw RndWordsError("rnd_words: collected " + std::to_string(words.size()) + " of " + std::to_string(count) +
                          " words after " + std::to_string(max_draws) + " draws",
                      words);
}

std::vector<ConceptShare> top_activating_concepts(const Vector& codes, int r) {
  require(r >= 1, ErrorCode::parameter, "top_activating_concepts: r must be >= 1");
  std::vector<int> order(static_cast<std::size_t>(codes.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(codes(a)) > std::abs(codes(b)); });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(r)));
  double total = 0.0;
  for (int k : order) total += std::abs(codes(k));
  std::vector<ConceptShare> out;
  for (int k : order) out.push_back({k, codes(k), total > 0.0 ? std::abs(codes(k)) / total : 0.0});
  return out;
}

Matrix saliency_map(const Vector& atom, const Matrix& visual_tokens, Grid grid) {
  require(grid.rows > 0 && grid.cols > 0 &&
              static_cast<Eigen::Index>(grid.rows) * grid.cols == visual_tokens.rows(),
          ErrorCode::parameter, "saliency: grid rows*cols does not match the number of visual tokens");
  require(visual_tokens.cols() == atom.size(), ErrorCode::parameter,
          "saliency: visual token dimension does not match atom length");
  const Vector scores = visual_tokens * atom;
  Matrix out(grid.rows, grid.cols);
  for (int i = 0; i < grid.rows; ++i)
    for (int j = 0; j < grid.cols; ++j) out(i, j) = scores(i * grid.cols + j);
  return out;
}

GroundingResult ground_dictionary(const ConceptDictionary& dict, const RepresentationBundle& bundle,
                                  const ActivationMatrix& acts, const GroundingConfig& config,
                                  const WordFilter& filter) {
  if (!bundle.unembedding || !bundle.vocab) fail(ErrorCode::missing_dependency, "bundle lacks unembedding data");
  require(config.n_mas >= 1 && config.top_tokens >= 1 && config.r >= 1 && config.min_word_len >= 1,
          ErrorCode::parameter, "grounding config values must all be >= 1");
  require(dict.dim() == bundle.dim(), ErrorCode::parameter, "grounding: dictionary B does not match bundle B");
  require(acts.values.rows() == dict.num_concepts(), ErrorCode::parameter,
          "grounding: activations K does not match dictionary K");

  WordFilter f = filter;
  f.min_word_len = config.min_word_len;

  // For one-hot methods, samples sharing activation 1 are ranked by distance.
  std::vector<std::vector<double>> distances;
  if (is_one_hot(dict.method)) {
    std::unordered_map<std::string, Eigen::Index> column;
    for (std::size_t j = 0; j < bundle.sample_ids.size(); ++j)
      column.emplace(bundle.sample_ids[j], static_cast<Eigen::Index>(j));
    distances.assign(static_cast<std::size_t>(dict.num_concepts()), std::vector<double>(acts.sample_ids.size()));
    for (std::size_t j = 0; j < acts.sample_ids.size(); ++j) {
      auto it = column.find(acts.sample_ids[j]);
      require(it != column.end(), ErrorCode::data,
              "grounding: activation sample '" + acts.sample_ids[j] + "' is not in the bundle");
      for (int k = 0; k < dict.num_concepts(); ++k)
        distances[static_cast<std::size_t>(k)][j] = (bundle.reps.col(it->second) - dict.atoms.col(k)).norm();
    }
  }

  GroundingResult out;
  out.config = config;
  out.dictionary_id = dict.id;
  out.method = dict.method;
  for (int k = 0; k < dict.num_concepts(); ++k) {
    ConceptGrounding cg;
    cg.index = k;
    cg.mas = distances.empty() ? select_mas(acts, k, config.n_mas)
                               : select_mas(acts, k, config.n_mas, distances[static_cast<std::size_t>(k)]);
    const Vector atom = config.apply_final_norm ? final_norm(dict.atoms.col(k)) : Vector(dict.atoms.col(k));
    cg.words = filter_words(decode_concept_words(*bundle.unembedding, *bundle.vocab, atom, config.top_tokens), f);
    cg.empty_words = cg.words.empty();
    out.concepts.push_back(std::move(cg));
  }
  return out;
}

}  // namespace conceptlens
