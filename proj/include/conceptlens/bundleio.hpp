#pragma once

// On-disk artifact formats. Every artifact is a directory holding
// manifest.json, one raw little-endian float32 file per tensor, and a
// kind-specific metadata.json. See FORMATS.md for the schemas.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "conceptlens/types.hpp"

namespace conceptlens {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

struct TensorRecord {
  std::string name;
  std::string dtype = "f32";
  std::vector<std::int64_t> shape;
  std::string file;
  std::optional<std::string> checksum;  // hex sha256 of the payload

  std::int64_t num_elements() const;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

// Payload encoding: IEEE-754 binary32, little-endian, row-major.
std::vector<std::uint8_t> encode_f32(const Matrix& m);
Matrix decode_f32(std::span<const std::uint8_t> bytes, Eigen::Index rows, Eigen::Index cols);

// Reads manifest.json from `dir` and returns its "kind" field.
std::string read_kind(const fs::path& dir);

// Structural invariants. Throw Error(validation) naming the failing invariant.
void validate(const RepresentationBundle& bundle);
void validate(const ActivationMatrix& acts);
void validate(const EmbeddingTable& table);
// Orthonormality tolerance for pca dictionaries: 1e-8 for in-memory fits,
// looser for values that went through float32 storage.
enum class Precision { f64, f32 };
void validate(const ConceptDictionary& dict, Precision precision = Precision::f64);

// Writers return the artifact id (sha256 of the manifest bytes).
std::string write_bundle(const RepresentationBundle& bundle, const fs::path& dir);
RepresentationBundle read_bundle(const fs::path& dir);

std::string write_dictionary(const ConceptDictionary& dict, const fs::path& dir);
ConceptDictionary read_dictionary(const fs::path& dir);

std::string write_activations(const ActivationMatrix& acts, const fs::path& dir);
ActivationMatrix read_activations(const fs::path& dir);

std::string write_grounding(const GroundingResult& grounding, const fs::path& dir);
GroundingResult read_grounding(const fs::path& dir);

std::string write_embeddings(const EmbeddingTable& table, const fs::path& dir);
EmbeddingTable read_embeddings(const fs::path& dir);

// A named collection of 2-D tensors (saliency maps and similar outputs).
struct NamedTensor {
  std::string name;
  Matrix value;
};
std::string write_tensor_set(std::string_view kind, const std::vector<NamedTensor>& tensors,
                             const json& metadata, const fs::path& dir);
std::vector<NamedTensor> read_tensor_set(const fs::path& dir, json* metadata = nullptr);

// JSON forms shared by grounding.json and the report.
json to_json(const GroundingResult& g);
GroundingResult grounding_from_json(const json& j);

// Writes text to a file, replacing it. Throws Error(io).
void write_text_file(const fs::path& path, std::string_view text);
std::string read_text_file(const fs::path& path);

}  // namespace conceptlens
