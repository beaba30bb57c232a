#include "conceptlens/types.hpp"

#include <algorithm>

#include "conceptlens/error.hpp"

namespace conceptlens {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::parameter: return "parameter";
    case ErrorCode::data: return "data";
    case ErrorCode::validation: return "validation";
    case ErrorCode::io: return "io";
    case ErrorCode::missing_tensor_file: return "missing_tensor_file";
    case ErrorCode::size_mismatch: return "size_mismatch";
    case ErrorCode::checksum_mismatch: return "checksum_mismatch";
    case ErrorCode::missing_dependency: return "missing_dependency";
  }
  return "unknown";
}

int exit_code(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::parameter: return 2;
    case ErrorCode::data:
    case ErrorCode::validation:
    case ErrorCode::size_mismatch:
    case ErrorCode::checksum_mismatch: return 3;
    case ErrorCode::io:
    case ErrorCode::missing_tensor_file: return 4;
    case ErrorCode::missing_dependency: return 5;
  }
  return 1;
}

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::semi_nmf: return "semi_nmf";
    case Method::pca: return "pca";
    case Method::kmeans: return "kmeans";
    case Method::simple: return "simple";
  }
  return "unknown";
}

Method parse_method(std::string_view s) {
  if (s == "semi_nmf" || s == "semi-nmf") return Method::semi_nmf;
  if (s == "pca") return Method::pca;
  if (s == "kmeans") return Method::kmeans;
  if (s == "simple") return Method::simple;
  fail(ErrorCode::parameter, "unknown method: " + std::string(s));
}

std::string_view to_string(EmbeddingSpace s) noexcept {
  return s == EmbeddingSpace::clip_image ? "clip_image" : "clip_text";
}

EmbeddingSpace parse_embedding_space(std::string_view s) {
  if (s == "clip_image") return EmbeddingSpace::clip_image;
  if (s == "clip_text") return EmbeddingSpace::clip_text;
  fail(ErrorCode::validation, "unknown embedding space: " + std::string(s));
}

Eigen::Index EmbeddingTable::row_of(const std::string& id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) fail(ErrorCode::missing_dependency, "missing embedding for id '" + id + "'");
  return static_cast<Eigen::Index>(it - ids.begin());
}

}  // namespace conceptlens
