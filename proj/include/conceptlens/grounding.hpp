#pragma once

// Grounds concepts in images (maximum-activating samples) and text (words
// decoded through the unembedding matrix).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "conceptlens/error.hpp"
#include "conceptlens/types.hpp"

namespace conceptlens {

// Predicate deciding which decoded tokens count as grounded words: after
// normalization a token must be an English word, not a stopword, and at least
// `min_word_len` characters long.
struct WordFilter {
  std::unordered_set<std::string> english;
  std::unordered_set<std::string> stopwords;
  std::vector<std::string> prefix_markers = {"\xC4\xA0", "\xE2\x96\x81"};  // "Ġ", "▁"
  int min_word_len = 3;

  // Strips prefix markers and surrounding whitespace, lowercases ASCII.
  std::string normalize(std::string_view token) const;
  bool accepts(const std::string& normalized) const;

  // One lowercase word per line. Throws Error(io) on unreadable files.
  static WordFilter from_files(const std::filesystem::path& english, const std::filesystem::path& stopwords);
  // Bundled lists, overridable via CONCEPTLENS_WORDLIST / CONCEPTLENS_STOPWORDS.
  static WordFilter bundled();
};

std::filesystem::path default_wordlist_path();
std::filesystem::path default_stopwords_path();

// Number of UTF-8 code points.
std::size_t utf8_length(std::string_view s);

// The n_mas samples with largest |v_k|, descending. Ties go to the smaller
// `tie_key` when given, then to the lower sample index.
std::vector<MasEntry> select_mas(const ActivationMatrix& acts, int k, int n_mas,
                                 std::span<const double> tie_key = {});

// Top `top_tokens` vocabulary entries by logit of W_U u, lowest index on ties.
std::vector<WordScore> decode_concept_words(const Matrix& unembedding, const std::vector<std::string>& vocab,
                                            const Vector& atom, int top_tokens);

std::vector<WordScore> filter_words(const std::vector<WordScore>& raw, const WordFilter& filter);

// Parameter-free layer norm: zero mean, unit variance across coordinates.
Vector final_norm(const Vector& u);

// Thrown by rnd_words when the draw budget runs out; carries what was found.
class RndWordsError : public Error {
 public:
  RndWordsError(const std::string& what, std::vector<std::string> partial)
      : Error(ErrorCode::data, what), partial_(std::move(partial)) {}
  const std::vector<std::string>& partial() const noexcept { return partial_; }

 private:
  std::vector<std::string> partial_;
};

struct RndWordsOptions {
  int top_tokens = 15;
  double scale = 1.0;  // norm of each random representation
  int max_draws = 0;   // 0 means 100 + 20 * count
};

// Random-words baseline: decode standard Gaussian directions scaled to
// `opts.scale`, filter, and accumulate distinct words until `count` are found.
std::vector<std::string> rnd_words(const Matrix& unembedding, const std::vector<std::string>& vocab, int count,
                                   const WordFilter& filter, std::uint64_t seed, const RndWordsOptions& opts = {});

struct ConceptShare {
  int index = 0;
  double activation = 0.0;
  double share = 0.0;  // |v_k| / sum of |v| over the selected concepts
};

std::vector<ConceptShare> top_activating_concepts(const Vector& codes, int r);

// Entry (i, j) is u . h_{i*cols + j}.
Matrix saliency_map(const Vector& atom, const Matrix& visual_tokens, Grid grid);

// Grounds every concept of `dict` using the bundle it was fit on and its
// activations over that bundle's samples.
GroundingResult ground_dictionary(const ConceptDictionary& dict, const RepresentationBundle& bundle,
                                  const ActivationMatrix& acts, const GroundingConfig& config,
                                  const WordFilter& filter);

}  // namespace conceptlens
