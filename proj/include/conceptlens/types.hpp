#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace conceptlens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Method { semi_nmf, pca, kmeans, simple };

std::string_view to_string(Method m) noexcept;
// Accepts "semi_nmf" and "semi-nmf" spellings. Throws Error(parameter).
Method parse_method(std::string_view s);

// kmeans and simple encode each sample as a one-hot assignment.
inline bool is_one_hot(Method m) { return m == Method::kmeans || m == Method::simple; }

struct Grid {
  int rows = 0;
  int cols = 0;
  friend bool operator==(const Grid&, const Grid&) = default;
};

// Token representations of M samples at one layer, plus everything needed to
// ground concepts learned from them. Columns of `reps` are samples.
struct RepresentationBundle {
  Matrix reps;  // B x M
  std::string token;
  int layer = 0;
  std::string model_id;
  std::vector<std::string> sample_ids;
  std::vector<std::vector<std::string>> captions;
  std::optional<std::vector<std::string>> image_paths;
  std::optional<Matrix> unembedding;  // |vocab| x B
  std::optional<std::vector<std::string>> vocab;
  // One N_V x B block per sample when present; empty means absent.
  std::vector<Matrix> visual_reps;
  std::optional<Grid> grid;
  // Optional per-sample semantic labels (used for specificity).
  std::optional<std::vector<std::vector<std::string>>> labels;
  // Free-form tag, e.g. "noise" for the noise-image baseline. Empty if unset.
  std::string baseline;

  // sha256 of manifest.json; filled by write_bundle/read_bundle.
  std::string id;

  int dim() const { return static_cast<int>(reps.rows()); }
  int num_samples() const { return static_cast<int>(reps.cols()); }
};

// Where a dictionary's training representations came from.
struct Provenance {
  std::string bundle_id;
  std::string token;
  int layer = 0;
  std::string model_id;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ConceptDictionary {
  Method method = Method::semi_nmf;
  Matrix atoms;  // B x K, one concept per column
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::optional<Vector> mean;  // pca centering
  std::vector<double> objective_trace;
  Provenance source;

  std::string id;  // sha256 of manifest.json once written or read

  int num_concepts() const { return static_cast<int>(atoms.cols()); }
  int dim() const { return static_cast<int>(atoms.rows()); }
};

struct ActivationMatrix {
  Matrix values;  // K x M'
  std::vector<std::string> sample_ids;
  std::string dictionary_id;
  Method method = Method::semi_nmf;

  std::string id;
};

struct GroundingConfig {
  int n_mas = 5;
  int top_tokens = 15;
  int r = 3;
  int min_word_len = 3;
  // Parameter-free layer norm on u_k before the unembedding.
  bool apply_final_norm = false;
  friend bool operator==(const GroundingConfig&, const GroundingConfig&) = default;
};

struct MasEntry {
  std::string sample_id;
  double activation = 0.0;  // |v_k|
  friend bool operator==(const MasEntry&, const MasEntry&) = default;
};

struct WordScore {
  std::string word;
  double logit = 0.0;
  friend bool operator==(const WordScore&, const WordScore&) = default;
};

struct ConceptGrounding {
  int index = 0;
  std::vector<MasEntry> mas;
  std::vector<WordScore> words;
  bool empty_words = false;
  friend bool operator==(const ConceptGrounding&, const ConceptGrounding&) = default;
};

struct GroundingResult {
  GroundingConfig config;
  std::string dictionary_id;
  Method method = Method::semi_nmf;
  std::vector<ConceptGrounding> concepts;

  std::string id;
};

enum class EmbeddingSpace { clip_image, clip_text };

std::string_view to_string(EmbeddingSpace s) noexcept;
EmbeddingSpace parse_embedding_space(std::string_view s);

struct EmbeddingTable {
  std::vector<std::string> ids;
  Matrix embeddings;  // N x D
  EmbeddingSpace space = EmbeddingSpace::clip_image;

  // Row index of `id`; throws Error(missing_dependency) naming the id.
  Eigen::Index row_of(const std::string& id) const;
};

}  // namespace conceptlens
