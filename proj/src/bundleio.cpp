#include "conceptlens/bundleio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "conceptlens/error.hpp"

namespace conceptlens {

namespace {

constexpr double kUnitBallSlack = 1e-9;
constexpr double kOrthoTolF64 = 1e-8;
// Entrywise error of U^T U after rounding U to binary32 is bounded by
// roughly 2 * 2^-24 for unit columns; 1e-6 leaves headroom.
constexpr double kOrthoTolF32 = 1e-6;

std::string hex(const unsigned char* data, unsigned int len) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xf]);
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "write failed: " + path.string());
}

void append_f32(std::vector<std::uint8_t>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  out.push_back(static_cast<std::uint8_t>(bits));
  out.push_back(static_cast<std::uint8_t>(bits >> 8));
  out.push_back(static_cast<std::uint8_t>(bits >> 16));
  out.push_back(static_cast<std::uint8_t>(bits >> 24));
}

float load_f32(const std::uint8_t* p) {
  const std::uint32_t bits = std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) |
                             (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
  return std::bit_cast<float>(bits);
}

// Collects tensors and metadata for one artifact directory, then emits the
// manifest last so the manifest hash covers every payload.
class ArtifactWriter {
 public:
  ArtifactWriter(fs::path dir, std::string kind) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorCode::io, "cannot create directory " + dir_.string() + ": " + ec.message());
    manifest_["version"] = kFormatVersion;
    manifest_["kind"] = std::move(kind);
    manifest_["tensors"] = json::array();
  }

  void add_tensor(const std::string& name, std::vector<std::int64_t> shape,
                  std::span<const std::uint8_t> payload) {
    TensorRecord rec;
    rec.name = name;
    rec.shape = std::move(shape);
    rec.file = name + ".bin";
    rec.checksum = sha256_hex(payload);
    write_bytes(dir_ / rec.file, payload);
    manifest_["tensors"].push_back({{"name", rec.name},
                                    {"dtype", rec.dtype},
                                    {"shape", rec.shape},
                                    {"file", rec.file},
                                    {"checksum", *rec.checksum}});
  }

  void add_matrix(const std::string& name, const Matrix& m) {
    add_tensor(name, {m.rows(), m.cols()}, encode_f32(m));
  }

  void set_metadata(const json& meta, const std::string& file = "metadata.json") {
    const std::string text = meta.dump(2) + "\n";
    write_text_file(dir_ / file, text);
    manifest_["metadata"] = {{"file", file}, {"checksum", sha256_hex(text)}};
  }

  json& manifest() { return manifest_; }

  std::string finish() {
    const std::string text = manifest_.dump(2) + "\n";
    write_text_file(dir_ / "manifest.json", text);
    return sha256_hex(text);
  }

 private:
  fs::path dir_;
  json manifest_;
};

std::vector<TensorRecord> parse_records(const json& manifest) {
  std::vector<TensorRecord> out;
  std::set<std::string> names;
  for (const auto& t : manifest.at("tensors")) {
    TensorRecord rec;
    rec.name = t.at("name").get<std::string>();
    rec.dtype = t.at("dtype").get<std::string>();
    rec.shape = t.at("shape").get<std::vector<std::int64_t>>();
    rec.file = t.at("file").get<std::string>();
    if (t.contains("checksum")) rec.checksum = t.at("checksum").get<std::string>();
    if (rec.dtype != "f32") fail(ErrorCode::validation, "unsupported dtype for " + rec.name + ": " + rec.dtype);
    for (auto d : rec.shape)
      if (d < 0) fail(ErrorCode::validation, "negative dimension in shape of " + rec.name);
    if (!names.insert(rec.name).second) fail(ErrorCode::validation, "duplicate tensor name: " + rec.name);
    out.push_back(std::move(rec));
  }
  return out;
}

// A parsed artifact directory with payloads verified against the manifest.
class ArtifactReader {
 public:
  ArtifactReader(fs::path dir, std::string_view expected_kind) : dir_(std::move(dir)) {
    const fs::path mpath = dir_ / "manifest.json";
    if (!fs::exists(mpath)) fail(ErrorCode::io, "manifest missing: " + mpath.string());
    const std::string text = read_text_file(mpath);
    id_ = sha256_hex(text);
    try {
      manifest_ = json::parse(text);
      if (manifest_.at("version").get<int>() != kFormatVersion)
        fail(ErrorCode::validation, "unsupported manifest version");
      const auto kind = manifest_.at("kind").get<std::string>();
      if (kind != expected_kind)
        fail(ErrorCode::validation, "expected kind '" + std::string(expected_kind) + "' but manifest says '" + kind + "'");
      records_ = parse_records(manifest_);
    } catch (const json::exception& e) {
      fail(ErrorCode::validation, "malformed manifest " + mpath.string() + ": " + e.what());
    }
  }

  const json& manifest() const { return manifest_; }
  const std::string& id() const { return id_; }

  bool has(const std::string& name) const {
    return std::any_of(records_.begin(), records_.end(), [&](const auto& r) { return r.name == name; });
  }

  const TensorRecord& record(const std::string& name) const {
    for (const auto& r : records_)
      if (r.name == name) return r;
    fail(ErrorCode::validation, "manifest lacks tensor " + name);
  }

  std::vector<std::uint8_t> payload(const std::string& name) const {
    const auto& rec = record(name);
    const fs::path path = dir_ / rec.file;
    if (!fs::exists(path)) fail(ErrorCode::missing_tensor_file, "missing tensor file: " + rec.file);
    auto bytes = read_bytes(path);
    if (static_cast<std::int64_t>(bytes.size()) != 4 * rec.num_elements())
      fail(ErrorCode::size_mismatch, "size mismatch: " + rec.name);
    if (rec.checksum && sha256_hex(bytes) != *rec.checksum)
      fail(ErrorCode::checksum_mismatch, "checksum mismatch: " + rec.name);
    return bytes;
  }

  Matrix matrix(const std::string& name) const {
    const auto& rec = record(name);
    if (rec.shape.size() != 2) fail(ErrorCode::validation, "tensor " + name + " is not 2-D");
    const auto bytes = payload(name);
    return decode_f32(bytes, rec.shape[0], rec.shape[1]);
  }

  json metadata() const {
    if (!manifest_.contains("metadata")) return json::object();
    const auto& m = manifest_.at("metadata");
    const fs::path path = dir_ / m.at("file").get<std::string>();
    if (!fs::exists(path)) fail(ErrorCode::io, "metadata missing: " + path.string());
    const std::string text = read_text_file(path);
    if (m.contains("checksum") && sha256_hex(text) != m.at("checksum").get<std::string>())
      fail(ErrorCode::checksum_mismatch, "checksum mismatch: " + m.at("file").get<std::string>());
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      fail(ErrorCode::validation, "malformed metadata " + path.string() + ": " + e.what());
    }
  }

 private:
  fs::path dir_;
  json manifest_;
  std::vector<TensorRecord> records_;
  std::string id_;
};

template <typename Fn>
auto guard_json(const std::string& what, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, "malformed " + what + ": " + e.what());
  }
}

// Rounds semi_nmf atoms to binary32, shrinking any column whose rounded
// norm exceeds 1 so the stored dictionary still satisfies ||u_k|| <= 1.
Matrix round_into_unit_ball(const Matrix& atoms) {
  Matrix out = atoms.cast<float>().cast<double>();
  for (Eigen::Index k = 0; k < out.cols(); ++k) {
    auto col = out.col(k);
    for (int attempt = 0; attempt < 64 && col.norm() > 1.0; ++attempt) {
      const double shrink = (1.0 - 4.0 * std::ldexp(1.0, -24)) / col.norm();
      col = (col * shrink).cast<float>().cast<double>();
    }
  }
  return out;
}

}  // namespace

std::int64_t TensorRecord::num_elements() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::io, "sha256 failed");
  return hex(digest, len);
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> encode_f32(const Matrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(4 * m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) append_f32(out, static_cast<float>(m(i, j)));
  return out;
}

Matrix decode_f32(std::span<const std::uint8_t> bytes, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(bytes.size()) != 4 * rows * cols)
    fail(ErrorCode::size_mismatch, "size mismatch: payload does not match shape");
  Matrix m(rows, cols);
  const std::uint8_t* p = bytes.data();
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j, p += 4) m(i, j) = load_f32(p);
  return m;
}

void write_text_file(const fs::path& path, std::string_view text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_kind(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) fail(ErrorCode::io, "manifest missing: " + mpath.string());
  return guard_json("manifest", [&] { return json::parse(read_text_file(mpath)).at("kind").get<std::string>(); });
}

// ---------------------------------------------------------------- validation

void validate(const RepresentationBundle& b) {
  const auto m = static_cast<std::size_t>(b.reps.cols());
  const auto dim = b.reps.rows();
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::validation, what); };

  check(b.sample_ids.size() == m, "sample_ids count does not match columns of Z");
  check(b.captions.size() == m, "captions count does not match columns of Z");
  check(std::set<std::string>(b.sample_ids.begin(), b.sample_ids.end()).size() == m, "duplicate sample id");
  if (b.unembedding) {
    check(b.vocab.has_value(), "vocab missing");
    check(b.unembedding->rows() == static_cast<Eigen::Index>(b.vocab->size()), "W_U row count does not match vocab size");
    check(b.unembedding->cols() == dim, "W_U column count does not match B");
  }
  if (b.image_paths) check(b.image_paths->size() == m, "image_paths count does not match columns of Z");
  if (b.labels) check(b.labels->size() == m, "labels count does not match columns of Z");
  if (!b.visual_reps.empty()) {
    check(b.visual_reps.size() == m, "visual_reps count does not match columns of Z");
    const auto nv = b.visual_reps.front().rows();
    for (const auto& block : b.visual_reps) {
      check(block.cols() == dim, "visual_reps block does not have B columns");
      check(block.rows() == nv, "visual_reps blocks differ in token count");
    }
    if (b.grid) check(static_cast<Eigen::Index>(b.grid->rows) * b.grid->cols == nv, "grid rows*cols does not equal N_V");
  }
  if (b.grid) check(b.grid->rows > 0 && b.grid->cols > 0, "grid dimensions must be positive");
}

void validate(const ConceptDictionary& d, Precision precision) {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::validation, what); };
  check(d.atoms.cols() >= 1, "K must be at least 1");
  check(std::isfinite(d.lambda) && d.lambda >= 0.0, "lambda must be non-negative");
  check(d.atoms.allFinite(), "dictionary atoms must be finite");
  if (d.method == Method::semi_nmf) {
    for (Eigen::Index k = 0; k < d.atoms.cols(); ++k)
      check(d.atoms.col(k).norm() <= 1.0 + kUnitBallSlack,
            "semi_nmf atom norm exceeds 1 (column " + std::to_string(k) + ")");
  }
  if (d.method == Method::pca) {
    const double tol = precision == Precision::f64 ? kOrthoTolF64 : kOrthoTolF32;
    const Matrix gram = d.atoms.transpose() * d.atoms;
    const Matrix eye = Matrix::Identity(gram.rows(), gram.cols());
    check((gram - eye).cwiseAbs().maxCoeff() <= tol, "pca atoms are not orthonormal");
    check(d.mean.has_value(), "pca dictionary lacks mean");
  }
  if (d.mean) check(d.mean->size() == d.atoms.rows(), "mean length does not match B");
}

void validate(const ActivationMatrix& a) {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::validation, what); };
  check(a.sample_ids.size() == static_cast<std::size_t>(a.values.cols()), "sample_ids count does not match columns of V");
  if (a.method != Method::pca) check(a.values.size() == 0 || a.values.minCoeff() >= 0.0, "activations must be non-negative");
  if (is_one_hot(a.method)) {
    for (Eigen::Index j = 0; j < a.values.cols(); ++j) {
      int nonzero = 0;
      bool unit = true;
      for (Eigen::Index k = 0; k < a.values.rows(); ++k) {
        if (a.values(k, j) != 0.0) {
          ++nonzero;
          unit = unit && a.values(k, j) == 1.0;
        }
      }
      check(nonzero == 1 && unit, "activation column " + std::to_string(j) + " is not one-hot");
    }
  }
}

void validate(const EmbeddingTable& t) {
  require(t.ids.size() == static_cast<std::size_t>(t.embeddings.rows()), ErrorCode::validation,
          "ids count does not match embedding rows");
  require(std::set<std::string>(t.ids.begin(), t.ids.end()).size() == t.ids.size(), ErrorCode::validation,
          "duplicate embedding id");
}

// ------------------------------------------------------------------- bundles

std::string write_bundle(const RepresentationBundle& b, const fs::path& dir) {
  validate(b);
  ArtifactWriter w(dir, "bundle");
  w.add_matrix("Z", b.reps);
  if (b.unembedding) w.add_matrix("W_U", *b.unembedding);
  if (!b.visual_reps.empty()) {
    std::vector<std::uint8_t> payload;
    for (const auto& block : b.visual_reps) {
      auto bytes = encode_f32(block);
      payload.insert(payload.end(), bytes.begin(), bytes.end());
    }
    w.add_tensor("visual_reps",
                 {static_cast<std::int64_t>(b.visual_reps.size()), b.visual_reps.front().rows(), b.reps.rows()},
                 payload);
  }

  json meta;
  meta["sample_ids"] = b.sample_ids;
  meta["captions"] = b.captions;
  if (b.image_paths) meta["image_paths"] = *b.image_paths;
  if (b.vocab) meta["vocab"] = *b.vocab;
  if (b.labels) meta["labels"] = *b.labels;
  if (b.grid) meta["grid"] = {b.grid->rows, b.grid->cols};
  w.set_metadata(meta);

  auto& m = w.manifest();
  m["token"] = b.token;
  m["layer"] = b.layer;
  m["model_id"] = b.model_id;
  m["B"] = b.reps.rows();
  m["M"] = b.reps.cols();
  if (!b.baseline.empty()) m["baseline"] = b.baseline;
  return w.finish();
}

RepresentationBundle read_bundle(const fs::path& dir) {
  ArtifactReader r(dir, "bundle");
  RepresentationBundle b;
  b.reps = r.matrix("Z");
  if (r.has("W_U")) b.unembedding = r.matrix("W_U");
  if (r.has("visual_reps")) {
    const auto& rec = r.record("visual_reps");
    require(rec.shape.size() == 3, ErrorCode::validation, "visual_reps must be 3-D");
    const auto bytes = r.payload("visual_reps");
    const auto block = 4 * rec.shape[1] * rec.shape[2];
    for (std::int64_t s = 0; s < rec.shape[0]; ++s)
      b.visual_reps.push_back(
          decode_f32(std::span(bytes).subspan(static_cast<std::size_t>(s * block), static_cast<std::size_t>(block)),
                     rec.shape[1], rec.shape[2]));
  }
  const json meta = r.metadata();
  guard_json("bundle metadata", [&] {
    const auto& m = r.manifest();
    b.token = m.at("token").get<std::string>();
    b.layer = m.at("layer").get<int>();
    b.model_id = m.at("model_id").get<std::string>();
    b.baseline = m.value("baseline", std::string{});
    b.sample_ids = meta.at("sample_ids").get<std::vector<std::string>>();
    b.captions = meta.at("captions").get<std::vector<std::vector<std::string>>>();
    if (meta.contains("image_paths")) b.image_paths = meta.at("image_paths").get<std::vector<std::string>>();
    if (meta.contains("vocab")) b.vocab = meta.at("vocab").get<std::vector<std::string>>();
    if (meta.contains("labels")) b.labels = meta.at("labels").get<std::vector<std::vector<std::string>>>();
    if (meta.contains("grid")) b.grid = Grid{meta.at("grid").at(0).get<int>(), meta.at("grid").at(1).get<int>()};
    return 0;
  });
  b.id = r.id();
  validate(b);
  return b;
}

// -------------------------------------------------------------- dictionaries

std::string write_dictionary(const ConceptDictionary& d, const fs::path& dir) {
  validate(d, Precision::f64);
  ArtifactWriter w(dir, "dictionary");
  w.add_matrix("U", d.method == Method::semi_nmf ? round_into_unit_ball(d.atoms) : d.atoms);
  if (d.mean) w.add_matrix("mean", *d.mean);

  w.set_metadata({{"objective_trace", d.objective_trace}});
  auto& m = w.manifest();
  m["method"] = to_string(d.method);
  m["K"] = d.atoms.cols();
  m["B"] = d.atoms.rows();
  m["lambda"] = d.lambda;
  m["seed"] = d.seed;
  m["source_bundle_id"] = d.source.bundle_id;
  m["source"] = {{"token", d.source.token}, {"layer", d.source.layer}, {"model_id", d.source.model_id}};
  return w.finish();
}

ConceptDictionary read_dictionary(const fs::path& dir) {
  ArtifactReader r(dir, "dictionary");
  ConceptDictionary d;
  d.atoms = r.matrix("U");
  if (r.has("mean")) d.mean = Vector(r.matrix("mean").col(0));
  const json meta = r.metadata();
  guard_json("dictionary manifest", [&] {
    const auto& m = r.manifest();
    d.method = parse_method(m.at("method").get<std::string>());
    d.lambda = m.at("lambda").get<double>();
    d.seed = m.at("seed").get<std::uint64_t>();
    d.source.bundle_id = m.at("source_bundle_id").get<std::string>();
    d.source.token = m.at("source").at("token").get<std::string>();
    d.source.layer = m.at("source").at("layer").get<int>();
    d.source.model_id = m.at("source").at("model_id").get<std::string>();
    require(m.at("K").get<Eigen::Index>() == d.atoms.cols(), ErrorCode::validation, "K does not match columns of U");
    d.objective_trace = meta.value("objective_trace", std::vector<double>{});
    return 0;
  });
  d.id = r.id();
  validate(d, Precision::f32);
  return d;
}

// --------------------------------------------------------------- activations

std::string write_activations(const ActivationMatrix& a, const fs::path& dir) {
  validate(a);
  ArtifactWriter w(dir, "activations");
  w.add_matrix("V", a.values);
  w.set_metadata({{"sample_ids", a.sample_ids}});
  auto& m = w.manifest();
  m["method"] = to_string(a.method);
  m["dictionary_id"] = a.dictionary_id;
  m["K"] = a.values.rows();
  m["M"] = a.values.cols();
  return w.finish();
}

ActivationMatrix read_activations(const fs::path& dir) {
  ArtifactReader r(dir, "activations");
  ActivationMatrix a;
  a.values = r.matrix("V");
  const json meta = r.metadata();
  guard_json("activations manifest", [&] {
    a.method = parse_method(r.manifest().at("method").get<std::string>());
    a.dictionary_id = r.manifest().at("dictionary_id").get<std::string>();
    a.sample_ids = meta.at("sample_ids").get<std::vector<std::string>>();
    return 0;
  });
  a.id = r.id();
  validate(a);
  return a;
}

// ----------------------------------------------------------------- grounding

json to_json(const GroundingResult& g) {
  json concepts = json::array();
  for (const auto& c : g.concepts) {
    json mas = json::array();
    for (const auto& e : c.mas) mas.push_back({{"sample_id", e.sample_id}, {"activation", e.activation}});
    json words = json::array();
    for (const auto& w : c.words) words.push_back({{"word", w.word}, {"logit", w.logit}});
    concepts.push_back({{"index", c.index}, {"mas", mas}, {"words", words}, {"empty_words", c.empty_words}});
  }
  return {{"version", kFormatVersion},
          {"dictionary_id", g.dictionary_id},
          {"method", to_string(g.method)},
          {"config",
           {{"n_mas", g.config.n_mas},
            {"top_tokens", g.config.top_tokens},
            {"r", g.config.r},
            {"min_word_len", g.config.min_word_len},
            {"apply_final_norm", g.config.apply_final_norm}}},
          {"concepts", concepts}};
}

GroundingResult grounding_from_json(const json& j) {
  return guard_json("grounding.json", [&] {
    GroundingResult g;
    g.dictionary_id = j.at("dictionary_id").get<std::string>();
    g.method = parse_method(j.at("method").get<std::string>());
    const auto& c = j.at("config");
    g.config.n_mas = c.at("n_mas").get<int>();
    g.config.top_tokens = c.at("top_tokens").get<int>();
    g.config.r = c.at("r").get<int>();
    g.config.min_word_len = c.at("min_word_len").get<int>();
    g.config.apply_final_norm = c.value("apply_final_norm", false);
    for (const auto& cj : j.at("concepts")) {
      ConceptGrounding cg;
      cg.index = cj.at("index").get<int>();
      for (const auto& e : cj.at("mas"))
        cg.mas.push_back({e.at("sample_id").get<std::string>(), e.at("activation").get<double>()});
      for (const auto& w : cj.at("words")) cg.words.push_back({w.at("word").get<std::string>(), w.at("logit").get<double>()});
      cg.empty_words = cj.at("empty_words").get<bool>();
      g.concepts.push_back(std::move(cg));
    }
    return g;
  });
}

std::string write_grounding(const GroundingResult& g, const fs::path& dir) {
  for (const auto& c : g.concepts)
    require(std::is_sorted(c.mas.begin(), c.mas.end(),
                           [](const MasEntry& a, const MasEntry& b) { return a.activation > b.activation; }),
            ErrorCode::validation, "mas list not sorted by activation (concept " + std::to_string(c.index) + ")");
  ArtifactWriter w(dir, "grounding");
  w.set_metadata(to_json(g), "grounding.json");
  w.manifest()["dictionary_id"] = g.dictionary_id;
  w.manifest()["K"] = g.concepts.size();
  return w.finish();
}

GroundingResult read_grounding(const fs::path& dir) {
  ArtifactReader r(dir, "grounding");
  GroundingResult g = grounding_from_json(r.metadata());
  g.id = r.id();
  return g;
}

// ---------------------------------------------------------------- embeddings

std::string write_embeddings(const EmbeddingTable& t, const fs::path& dir) {
  validate(t);
  ArtifactWriter w(dir, "embeddings");
  w.add_matrix("E", t.embeddings);
  w.set_metadata({{"ids", t.ids}});
  w.manifest()["space"] = to_string(t.space);
  return w.finish();
}

EmbeddingTable read_embeddings(const fs::path& dir) {
  ArtifactReader r(dir, "embeddings");
  EmbeddingTable t;
  t.embeddings = r.matrix("E");
  const json meta = r.metadata();
  guard_json("embeddings metadata", [&] {
    t.ids = meta.at("ids").get<std::vector<std::string>>();
    t.space = parse_embedding_space(r.manifest().at("space").get<std::string>());
    return 0;
  });
  validate(t);
  return t;
}

// --------------------------------------------------------------- tensor sets

std::string write_tensor_set(std::string_view kind, const std::vector<NamedTensor>& tensors, const json& metadata,
                             const fs::path& dir) {
  ArtifactWriter w(dir, std::string(kind));
  for (const auto& t : tensors) w.add_matrix(t.name, t.value);
  w.set_metadata(metadata);
  return w.finish();
}

std::vector<NamedTensor> read_tensor_set(const fs::path& dir, json* metadata) {
  ArtifactReader r(dir, read_kind(dir));
  std::vector<NamedTensor> out;
  for (const auto& rec : parse_records(r.manifest())) out.push_back({rec.name, r.matrix(rec.name)});
  if (metadata) *metadata = r.metadata();
  return out;
}

}  // namespace conceptlens
