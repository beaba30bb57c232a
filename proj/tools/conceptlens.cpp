// conceptlens: command-line front end. Each verb reads artifacts, runs one
// library operation and writes its outputs plus <verb>_config.json into --out.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>

#include "conceptlens/bundleio.hpp"
#include "conceptlens/error.hpp"
#include "conceptlens/factorize.hpp"
#include "conceptlens/grounding.hpp"
#include "conceptlens/metrics.hpp"
#include "conceptlens/report.hpp"
#include "conceptlens/rng.hpp"

using namespace conceptlens;

namespace {

// Fills options that were not given on the command line from a flat JSON
// object keyed by long option name. Flags beat the file; the file beats defaults.
void apply_config_file(CLI::App* sub, const std::string& file) {
  if (file.empty()) return;
  json cfg;
  try {
    cfg = json::parse(read_text_file(file));
  } catch (const json::exception& e) {
    fail(ErrorCode::parameter, "config file " + file + " is not valid JSON: " + e.what());
  }
  require(cfg.is_object(), ErrorCode::parameter, "config file must hold a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    require(opt != nullptr && key != "out" && key != "config", ErrorCode::parameter,
            "config file: unknown key '" + key + "' for " + sub->get_name());
    if (opt->count() > 0) continue;
    auto as_text = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) opt->add_result(as_text(v));
    } else {
      opt->add_result(as_text(value));
    }
    opt->run_callback();
  }
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

fs::path prepare_out(const std::string& out) {
  require(!out.empty(), ErrorCode::parameter, "--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorCode::io, "cannot create output directory " + out + ": " + ec.message());
  return out;
}

void need(const std::string& value, const char* flag) {
  require(!value.empty(), ErrorCode::parameter, std::string(flag) + " is required");
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

void check_provenance(const ConceptDictionary& dict, const RepresentationBundle& bundle) {
  const auto& s = dict.source;
  if (s.model_id == bundle.model_id && s.token == bundle.token && s.layer == bundle.layer) return;
  warn("provenance mismatch: dictionary was fit on model '" + s.model_id + "', token '" + s.token + "', layer " +
       std::to_string(s.layer) + " but the bundle is model '" + bundle.model_id + "', token '" + bundle.token +
       "', layer " + std::to_string(bundle.layer));
}

struct FilterOptions {
  std::string wordlist;
  std::string stopwords;

  void add_to(CLI::App* sub) {
    sub->add_option("--wordlist", wordlist, "English word list (default: bundled, or $CONCEPTLENS_WORDLIST)");
    sub->add_option("--stopwords", stopwords, "Stopword list (default: bundled, or $CONCEPTLENS_STOPWORDS)");
  }
  WordFilter load(int min_word_len) const {
    auto f = WordFilter::from_files(wordlist.empty() ? default_wordlist_path() : fs::path(wordlist),
                                    stopwords.empty() ? default_stopwords_path() : fs::path(stopwords));
    f.min_word_len = min_word_len;
    return f;
  }
  void to_json(json& j) const {
    if (!wordlist.empty()) j["wordlist"] = wordlist;
    if (!stopwords.empty()) j["stopwords"] = stopwords;
  }
};

struct FitArgs {
  std::string bundle;
  std::string method = "semi_nmf";
  int k = 20;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  int max_iters = 200;
  double tol = 1e-6;
  int restarts = 5;

  void add_to(CLI::App* sub) {
    sub->add_option("--method", method, "semi_nmf | pca | kmeans | simple")->capture_default_str();
    sub->add_option("--k", k, "Number of concepts")->capture_default_str();
    sub->add_option("--lambda", lambda, "Sparsity weight (semi_nmf)")->capture_default_str();
    sub->add_option("--seed", seed, "Random seed")->capture_default_str();
    sub->add_option("--max-iters", max_iters, "Outer iterations")->capture_default_str();
    sub->add_option("--tol", tol, "Relative objective tolerance")->capture_default_str();
    sub->add_option("--restarts", restarts, "Semi-NMF restarts")->capture_default_str();
  }
  FitOptions options() const {
    FitOptions o;
    o.seed = seed;
    o.max_outer_iters = max_iters;
    o.tol = tol;
    o.restarts = restarts;
    return o;
  }
  json to_json() const {
    return {{"method", std::string(to_string(parse_method(method)))},
            {"k", k},
            {"lambda", lambda},
            {"seed", seed},
            {"max-iters", max_iters},
            {"tol", tol},
            {"restarts", restarts}};
  }
};

struct GroundArgs {
  int n_mas = 5;
  int top_tokens = 15;
  int r = 3;
  int min_word_len = 3;
  bool final_norm = false;

  void add_to(CLI::App* sub) {
    sub->add_option("--n-mas", n_mas, "Maximum-activating samples per concept")->capture_default_str();
    sub->add_option("--top-tokens", top_tokens, "Decoded tokens per concept before filtering")->capture_default_str();
    sub->add_option("--r", r, "Concepts per sample in local panels")->capture_default_str();
    sub->add_option("--min-word-len", min_word_len, "Minimum word length")->capture_default_str();
    sub->add_flag("--final-norm", final_norm, "Normalize atoms before decoding");
  }
  GroundingConfig config() const { return {n_mas, top_tokens, r, min_word_len, final_norm}; }
  void to_json(json& j) const {
    j["n-mas"] = n_mas;
    j["top-tokens"] = top_tokens;
    j["r"] = r;
    j["min-word-len"] = min_word_len;
    j["final-norm"] = final_norm;
  }
};

std::vector<std::vector<std::string>> word_sets(const GroundingResult& g) {
  std::vector<std::vector<std::string>> sets;
  for (const auto& c : g.concepts) {
    sets.emplace_back();
    for (const auto& w : c.words) sets.back().push_back(w.word);
  }
  return sets;
}

FitResult fit_bundle(const FitArgs& a, const RepresentationBundle& bundle) {
  const Method method = parse_method(a.method);
  FitResult res = fit(method, bundle.reps, a.k, a.lambda, a.options());
  res.dictionary.lambda = method == Method::semi_nmf ? a.lambda : 0.0;
  res.dictionary.seed = a.seed;
  res.dictionary.source = {bundle.id, bundle.token, bundle.layer, bundle.model_id};
  res.activations.sample_ids = bundle.sample_ids;
  return res;
}

// ---- rnd-words file --------------------------------------------------------

json rnd_words_json(std::uint64_t seed, double scale, const std::vector<std::vector<std::string>>& words) {
  json concepts = json::array();
  for (std::size_t k = 0; k < words.size(); ++k) concepts.push_back({{"index", k}, {"words", words[k]}});
  return {{"seed", seed}, {"scale", scale}, {"concepts", concepts}};
}

std::vector<std::vector<std::string>> read_rnd_words(const std::string& path, std::size_t num_concepts) {
  const json j = [&] {
    try {
      return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
      fail(ErrorCode::validation, "malformed rnd-words file " + path + ": " + e.what());
    }
  }();
  std::vector<std::vector<std::string>> out;
  try {
    for (const auto& c : j.at("concepts")) out.push_back(c.at("words").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, "malformed rnd-words file " + path + ": " + e.what());
  }
  require(out.size() == num_concepts, ErrorCode::validation, "rnd-words file does not match the grounding's K");
  return out;
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, "malformed JSON in " + path + ": " + e.what());
  }
}

// ---- verbs -----------------------------------------------------------------

struct Verbs {
  std::string out, config;

  FitArgs fit;
  GroundArgs ground;
  FilterOptions filter;

  std::string bundle, dictionary, activations, grounding, name = "activations";
  std::uint64_t seed = 0;
  std::string grid;
  std::vector<int> concepts;
  std::vector<std::string> samples;
  std::string rnd_words_file, image_embeddings, text_embeddings, external_scores;
  int r = 3;
  std::vector<int> ks = {10, 20, 30, 50};
  std::vector<std::string> bundles, score_files, sweep_files;
  std::vector<int> layers;
  std::string metric = "overlap";
  std::string image_root, saliency_dir;
  std::vector<std::string> paths;

  int run_fit() {
    need(fit.bundle, "--bundle");
    const auto dir = prepare_out(out);
    const auto b = read_bundle(fit.bundle);
    auto res = fit_bundle(fit, b);
    res.dictionary.id = write_dictionary(res.dictionary, dir / "dictionary");
    res.activations.dictionary_id = res.dictionary.id;
    write_activations(res.activations, dir / "activations");
    write_json(dir / "objective_trace.json", json(res.objective_trace));
    json cfg = fit.to_json();
    cfg["bundle"] = fit.bundle;
    write_json(dir / "fit_config.json", cfg);
    const double final_obj = res.objective_trace.empty() ? 0.0 : res.objective_trace.back();
    std::cout << "final objective: " << json(final_obj).dump() << "\n";
    return 0;
  }

  int run_project() {
    need(dictionary, "--dictionary");
    need(bundle, "--bundle");
    const auto dir = prepare_out(out);
    const auto dict = read_dictionary(dictionary);
    const auto b = read_bundle(bundle);
    check_provenance(dict, b);
    require(dict.dim() == b.dim(), ErrorCode::parameter,
            "dictionary B=" + std::to_string(dict.dim()) + " does not match bundle B=" + std::to_string(b.dim()));
    write_activations(conceptlens::project(dict, b.reps, b.sample_ids), dir / name);
    write_json(dir / "project_config.json", {{"dictionary", dictionary}, {"bundle", bundle}, {"name", name}});
    return 0;
  }

  int run_ground() {
    need(dictionary, "--dictionary");
    need(bundle, "--bundle");
    const auto dir = prepare_out(out);
    const auto dict = read_dictionary(dictionary);
    const auto b = read_bundle(bundle);
    check_provenance(dict, b);
    ActivationMatrix acts;
    if (activations.empty()) {
      acts = conceptlens::project(dict, b.reps, b.sample_ids);
    } else {
      acts = read_activations(activations);
      require(acts.dictionary_id == dict.id, ErrorCode::data, "activations were not produced by this dictionary");
    }
    const auto g = ground_dictionary(dict, b, acts, ground.config(), filter.load(ground.min_word_len));
    write_grounding(g, dir / "grounding");
    int empty = 0;
    for (const auto& c : g.concepts) empty += c.empty_words ? 1 : 0;
    if (empty > 0) warn(std::to_string(empty) + " concept(s) have no grounded words");
    json cfg = {{"dictionary", dictionary}, {"bundle", bundle}};
    if (!activations.empty()) cfg["activations"] = activations;
    ground.to_json(cfg);
    filter.to_json(cfg);
    write_json(dir / "ground_config.json", cfg);
    return 0;
  }

  int run_rnd_words() {
    need(grounding, "--grounding");
    need(bundle, "--bundle");
    const auto dir = prepare_out(out);
    const auto g = read_grounding(grounding);
    const auto b = read_bundle(bundle);
    require(b.unembedding && b.vocab, ErrorCode::missing_dependency, "bundle lacks unembedding data");
    require(b.num_samples() > 0, ErrorCode::data, "rnd-words needs a non-empty bundle to set the norm scale");
    const double scale = b.reps.colwise().norm().mean();
    const auto f = filter.load(g.config.min_word_len);
    RndWordsOptions opts;
    opts.top_tokens = g.config.top_tokens;
    opts.scale = scale;
    std::vector<std::vector<std::string>> words;
    for (const auto& c : g.concepts) {
      const std::uint64_t s = splitmix64(seed + static_cast<std::uint64_t>(c.index));
      words.push_back(rnd_words(*b.unembedding, *b.vocab, static_cast<int>(c.words.size()), f, s, opts));
    }
    write_json(dir / "rnd_words.json", rnd_words_json(seed, scale, words));
    json cfg = {{"grounding", grounding}, {"bundle", bundle}, {"seed", seed}};
    filter.to_json(cfg);
    write_json(dir / "rnd_words_config.json", cfg);
    return 0;
  }

  int run_saliency() {
    need(dictionary, "--dictionary");
    need(bundle, "--bundle");
    const auto dir = prepare_out(out);
    const auto dict = read_dictionary(dictionary);
    const auto b = read_bundle(bundle);
    check_provenance(dict, b);
    require(!b.visual_reps.empty(), ErrorCode::missing_dependency, "bundle lacks visual token representations");
    Grid g;
    if (!grid.empty()) {
      const auto x = grid.find('x');
      require(x != std::string::npos, ErrorCode::parameter, "--grid must look like ROWSxCOLS");
      try {
        g = {std::stoi(grid.substr(0, x)), std::stoi(grid.substr(x + 1))};
      } catch (const std::exception&) {
        fail(ErrorCode::parameter, "--grid must look like ROWSxCOLS");
      }
    } else {
      require(b.grid.has_value(), ErrorCode::parameter, "bundle has no grid; pass --grid ROWSxCOLS");
      g = *b.grid;
    }
    std::vector<int> ks_ = concepts;
    if (ks_.empty()) {
      ks_.resize(static_cast<std::size_t>(dict.num_concepts()));
      std::iota(ks_.begin(), ks_.end(), 0);
    }
    std::vector<std::size_t> cols;
    if (samples.empty()) {
      cols.resize(b.sample_ids.size());
      std::iota(cols.begin(), cols.end(), 0);
    } else {
      for (const auto& s : samples) {
        auto it = std::find(b.sample_ids.begin(), b.sample_ids.end(), s);
        require(it != b.sample_ids.end(), ErrorCode::parameter, "unknown sample id '" + s + "'");
        cols.push_back(static_cast<std::size_t>(it - b.sample_ids.begin()));
      }
    }
    std::vector<NamedTensor> tensors;
    json index = json::array();
    for (int k : ks_) {
      require(k >= 0 && k < dict.num_concepts(), ErrorCode::parameter, "concept " + std::to_string(k) + " out of range");
      for (std::size_t j : cols) {
        const std::string tname = "c" + std::to_string(k) + "_s" + std::to_string(j);
        tensors.push_back({tname, saliency_map(dict.atoms.col(k), b.visual_reps[j], g)});
        index.push_back({{"name", tname}, {"concept", k}, {"sample_id", b.sample_ids[j]}});
      }
    }
    write_tensor_set("saliency", tensors, {{"maps", index}, {"grid", {g.rows, g.cols}}}, dir / "saliency");
    json cfg = {{"dictionary", dictionary}, {"bundle", bundle}, {"grid", std::to_string(g.rows) + "x" + std::to_string(g.cols)}};
    if (!concepts.empty()) cfg["concepts"] = concepts;
    if (!samples.empty()) cfg["samples"] = samples;
    write_json(dir / "saliency_config.json", cfg);
    return 0;
  }

  int run_eval_prepare() {
    need(grounding, "--grounding");
    need(bundle, "--bundle");
    const auto dir = prepare_out(out);
    const auto g = read_grounding(grounding);
    const auto b = read_bundle(bundle);
    if (!activations.empty()) {
      const auto acts = read_activations(activations);
      require(acts.dictionary_id == g.dictionary_id, ErrorCode::data,
              "activations and grounding come from different dictionaries");
    }
    json texts = json::array();
    for (const auto& c : g.concepts) texts.push_back({{"id", concept_text_id(c.index)}, {"text", concept_text(c.words)}});
    if (!rnd_words_file.empty()) {
      const auto rnd = read_rnd_words(rnd_words_file, g.concepts.size());
      for (std::size_t k = 0; k < rnd.size(); ++k) {
        std::vector<WordScore> ws;
        for (const auto& w : rnd[k]) ws.push_back({w, 0.0});
        texts.push_back({{"id", rnd_text_id(static_cast<int>(k))}, {"text", concept_text(ws)}});
      }
    }
    for (std::size_t j = 0; j < b.sample_ids.size(); ++j)
      for (std::size_t i = 0; i < b.captions[j].size(); ++i)
        texts.push_back({{"id", caption_text_id(b.sample_ids[j], i)}, {"text", b.captions[j][i]}});
    json images = json::array();
    for (std::size_t j = 0; j < b.sample_ids.size(); ++j)
      images.push_back({{"id", b.sample_ids[j]}, {"path", b.image_paths ? (*b.image_paths)[j] : std::string()}});
    write_json(dir / "eval_requests.json", {{"texts", texts}, {"images", images}});
    json cfg = {{"grounding", grounding}, {"bundle", bundle}};
    if (!activations.empty()) cfg["activations"] = activations;
    if (!rnd_words_file.empty()) cfg["rnd-words"] = rnd_words_file;
    write_json(dir / "eval_prepare_config.json", cfg);
    return 0;
  }

  int run_eval_score() {
    need(grounding, "--grounding");
    need(bundle, "--bundle");
    need(activations, "--activations");
    if (image_embeddings.empty() || text_embeddings.empty())
      fail(ErrorCode::missing_dependency,
           "eval score needs --image-embeddings and --text-embeddings; embed the texts and images listed in "
           "eval_requests.json (from `eval prepare`) first");
    const auto dir = prepare_out(out);
    const auto g = read_grounding(grounding);
    const auto b = read_bundle(bundle);
    const auto acts = read_activations(activations);
    require(acts.dictionary_id == g.dictionary_id, ErrorCode::data,
            "activations and grounding come from different dictionaries");
    const auto images = read_embeddings(image_embeddings);
    const auto texts = read_embeddings(text_embeddings);
    require(images.space == EmbeddingSpace::clip_image, ErrorCode::validation, "--image-embeddings is not a clip_image table");
    require(texts.space == EmbeddingSpace::clip_text, ErrorCode::validation, "--text-embeddings is not a clip_text table");
    require(r >= 1, ErrorCode::parameter, "--r must be >= 1");
    const int k = static_cast<int>(g.concepts.size());

    std::vector<int> rs = {1};
    if (r > 1) rs.push_back(r);
    std::vector<ScoreReport> reports;
    for (int rr : rs) reports.push_back(eval_topr(acts, k, images, texts, rr, "method"));
    if (!rnd_words_file.empty()) {
      read_rnd_words(rnd_words_file, g.concepts.size());
      for (int rr : rs) reports.push_back(eval_topr(acts, k, images, texts, rr, "rnd_words", &rnd_text_id));
    }
    std::vector<std::size_t> counts;
    for (const auto& c : b.captions) counts.push_back(c.size());
    reports.push_back(eval_gt_captions(b.sample_ids, counts, images, texts));
    if (!external_scores.empty()) {
      const auto pairs = parse_external_scores(read_json_file(external_scores));
      for (int rr : rs) reports.push_back(eval_bertscore(acts, pairs, rr));
    }

    json ttests = json::array();
    for (const auto& a : reports) {
      if (a.baseline != "method") continue;
      for (const auto& o : reports) {
        if (o.baseline == "method" || o.metric != a.metric) continue;
        try {
          const auto t = welch_ttest(a.scores, o.scores);
          ttests.push_back({{"metric", a.metric}, {"a", a.baseline}, {"b", o.baseline}, {"t", t.t}, {"dof", t.dof}, {"p", t.p}});
        } catch (const Error& e) {
          warn(std::string("t-test ") + a.metric + " method vs " + o.baseline + " skipped: " + e.what());
        }
      }
    }
    json rj = json::array();
    for (const auto& rep : reports) {
      rj.push_back(rep.to_json());
      char line[160];
      std::snprintf(line, sizeof line, "%-10s %-12s %.3f \xC2\xB1 %.2f (n=%d)\n", rep.metric.c_str(), rep.baseline.c_str(),
                    rep.mean, rep.std, rep.n);
      std::cout << line;
    }
    write_json(dir / "scores.json", {{"reports", rj}, {"ttests", ttests}});
    json cfg = {{"grounding", grounding},
                {"bundle", bundle},
                {"activations", activations},
                {"image-embeddings", image_embeddings},
                {"text-embeddings", text_embeddings},
                {"r", r}};
    if (!rnd_words_file.empty()) cfg["rnd-words"] = rnd_words_file;
    if (!external_scores.empty()) cfg["external-scores"] = external_scores;
    write_json(dir / "eval_score_config.json", cfg);
    return 0;
  }

  int run_sweep_k() {
    need(fit.bundle, "--bundle");
    require(ks.size() >= 2, ErrorCode::parameter, "a sweep needs at least 2 points");
    const auto dir = prepare_out(out);
    const auto b = read_bundle(fit.bundle);
    const auto sel = select_k(b.reps, ks, fit.lambda, fit.options());
    json pts = json::array();
    for (const auto& [kk, err] : sel.curve) pts.push_back({kk, err});
    if (sel.warning) warn("no candidate K reached half of ||Z||^2; using the largest candidate");
    write_json(dir / "sweep_k.json", {{"title", "Reconstruction error vs K"},
                                      {"x_label", "K"},
                                      {"y_label", "reconstruction error"},
                                      {"points", pts},
                                      {"baseline", sel.baseline},
                                      {"selected_k", sel.k},
                                      {"warning", sel.warning}});
    std::cout << "selected K: " << sel.k << "\n";
    json cfg = {{"bundle", fit.bundle}, {"ks", ks}, {"lambda", fit.lambda}, {"seed", fit.seed},
                {"max-iters", fit.max_iters}, {"tol", fit.tol}, {"restarts", fit.restarts}};
    write_json(dir / "sweep_k_config.json", cfg);
    return 0;
  }

  int run_sweep_layer() {
    const auto dir = prepare_out(out);
    json pts = json::array();
    std::string y_label;
    json cfg;
    if (!score_files.empty()) {
      require(bundles.empty(), ErrorCode::parameter, "use either --bundles or --scores, not both");
      require(score_files.size() == layers.size(), ErrorCode::parameter, "--scores and --layers must pair up");
      require(score_files.size() >= 2, ErrorCode::parameter, "a sweep needs at least 2 points");
      y_label = "CS top-1";
      for (std::size_t i = 0; i < score_files.size(); ++i) {
        const auto j = read_json_file(score_files[i]);
        std::optional<double> mean;
        for (const auto& rep : j.value("reports", json::array())) {
          const auto s = ScoreReport::from_json(rep);
          if (s.metric == "CS top-1" && s.baseline == "method") mean = s.mean;
        }
        require(mean.has_value(), ErrorCode::data, score_files[i] + " has no CS top-1 method report");
        pts.push_back({layers[i], *mean});
      }
      cfg = {{"scores", score_files}, {"layers", layers}};
    } else {
      require(bundles.size() >= 2, ErrorCode::parameter, "a sweep needs at least 2 points");
      require(metric == "overlap" || metric == "reconstruction_error", ErrorCode::parameter,
              "--metric must be overlap or reconstruction_error");
      y_label = metric == "overlap" ? "overlap" : "reconstruction error";
      std::optional<WordFilter> f;
      if (metric == "overlap") f = filter.load(ground.min_word_len);
      for (const auto& path : bundles) {
        const auto b = read_bundle(path);
        auto res = fit_bundle(fit, b);
        double y;
        if (metric == "overlap") {
          require(res.dictionary.num_concepts() >= 2, ErrorCode::parameter, "overlap needs K >= 2");
          y = overlap(word_sets(ground_dictionary(res.dictionary, b, res.activations, ground.config(), *f))).mean;
        } else {
          y = reconstruction_error(b.reps, res.dictionary.atoms, conceptlens::project(res.dictionary, b.reps));
        }
        pts.push_back({b.layer, y});
      }
      cfg = fit.to_json();
      cfg["bundles"] = bundles;
      cfg["metric"] = metric;
      ground.to_json(cfg);
      filter.to_json(cfg);
    }
    write_json(dir / "sweep_layer.json",
               {{"title", y_label + " vs layer"}, {"x_label", "layer"}, {"y_label", y_label}, {"points", pts}});
    write_json(dir / "sweep_layer_config.json", cfg);
    return 0;
  }

  int run_report() {
    need(grounding, "--grounding");
    const auto dir = prepare_out(out);
    ReportInputs in;
    in.grounding = read_grounding(grounding);
    in.r = r > 0 ? r : in.grounding.config.r;
    json cfg = {{"grounding", grounding}, {"r", in.r}};

    if (!bundle.empty()) {
      const auto b = read_bundle(bundle);
      const fs::path root = image_root.empty() ? fs::path(bundle) : fs::path(image_root);
      if (b.image_paths) {
        for (std::size_t j = 0; j < b.sample_ids.size(); ++j) {
          const auto& p = (*b.image_paths)[j];
          if (p.empty()) continue;
          const fs::path file = fs::path(p).is_absolute() ? fs::path(p) : root / p;
          std::error_code ec;
          if (!fs::is_regular_file(file, ec)) continue;
          in.image_paths[b.sample_ids[j]] = fs::relative(file, dir, ec).generic_string();
        }
      }
      cfg["bundle"] = bundle;
      if (!image_root.empty()) cfg["image-root"] = image_root;
    }
    if (!activations.empty()) {
      in.activations = read_activations(activations);
      require(in.activations->dictionary_id == in.grounding.dictionary_id, ErrorCode::data,
              "activations and grounding come from different dictionaries");
      cfg["activations"] = activations;
    }
    if (!rnd_words_file.empty()) {
      in.rnd_words = read_rnd_words(rnd_words_file, in.grounding.concepts.size());
      cfg["rnd-words"] = rnd_words_file;
    }
    for (const auto& path : score_files) {
      const auto j = read_json_file(path);
      for (const auto& rep : j.value("reports", json::array())) in.scores.push_back(ScoreReport::from_json(rep));
      for (const auto& t : j.value("ttests", json::array())) {
        in.ttests.push_back({t.at("t").get<double>(), t.at("dof").get<double>(), t.at("p").get<double>()});
        in.ttest_labels.push_back({t.value("metric", std::string()) + " " + t.at("a").get<std::string>(),
                                   t.at("b").get<std::string>()});
      }
    }
    if (!score_files.empty()) cfg["scores"] = score_files;
    for (const auto& path : sweep_files) {
      const auto j = read_json_file(path);
      Curve c;
      try {
        c.title = j.at("title").get<std::string>();
        c.x_label = j.at("x_label").get<std::string>();
        c.y_label = j.at("y_label").get<std::string>();
        for (const auto& p : j.at("points")) c.points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      } catch (const json::exception& e) {
        fail(ErrorCode::validation, "malformed sweep file " + path + ": " + e.what());
      }
      in.curves.push_back(std::move(c));
    }
    if (!sweep_files.empty()) cfg["sweep"] = sweep_files;
    if (!saliency_dir.empty()) {
      json meta;
      const auto tensors = read_tensor_set(saliency_dir, &meta);
      std::map<std::string, const Matrix*> by_name;
      for (const auto& t : tensors) by_name[t.name] = &t.value;
      for (const auto& m : meta.value("maps", json::array())) {
        auto it = by_name.find(m.at("name").get<std::string>());
        require(it != by_name.end(), ErrorCode::validation, "saliency metadata names a missing tensor");
        in.saliency.push_back({m.at("concept").get<int>(), m.at("sample_id").get<std::string>(), *it->second});
      }
      cfg["saliency"] = saliency_dir;
    }

    const json rj = report_json(in);
    write_json(dir / "report.json", rj);
    write_text_file(dir / "report.html", render_html(rj));
    write_json(dir / "report_config.json", cfg);
    return 0;
  }

  int run_validate() {
    require(!paths.empty(), ErrorCode::parameter, "validate needs at least one artifact directory");
    for (const auto& p : paths) {
      const std::string kind = read_kind(p);
      std::string id;
      if (kind == "bundle") id = read_bundle(p).id;
      else if (kind == "dictionary") id = read_dictionary(p).id;
      else if (kind == "activations") id = read_activations(p).id;
      else if (kind == "grounding") id = read_grounding(p).id;
      else if (kind == "embeddings") read_embeddings(p);
      else read_tensor_set(p);
      std::cout << p << ": ok (" << kind << (id.empty() ? "" : ", id " + id) << ")\n";
    }
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn, ground and evaluate concept dictionaries over multimodal token representations"};
  app.require_subcommand(1);
  Verbs v;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", v.out, "Output directory");
    sub->add_option("--config", v.config, "JSON file of option defaults (flags take precedence)");
  };

  auto* fit = app.add_subcommand("fit", "Learn a concept dictionary from a bundle");
  add_common(fit);
  fit->add_option("--bundle", v.fit.bundle, "Training bundle directory");
  v.fit.add_to(fit);

  auto* project = app.add_subcommand("project", "Project a bundle onto a dictionary");
  add_common(project);
  project->add_option("--dictionary", v.dictionary);
  project->add_option("--bundle", v.bundle);
  project->add_option("--name", v.name, "Name of the activations artifact inside --out")->capture_default_str();

  auto* ground = app.add_subcommand("ground", "Ground each concept in samples and words");
  add_common(ground);
  ground->add_option("--dictionary", v.dictionary);
  ground->add_option("--bundle", v.bundle, "The bundle the dictionary was fit on");
  ground->add_option("--activations", v.activations, "Activations over that bundle (default: recomputed)");
  v.ground.add_to(ground);
  v.filter.add_to(ground);

  auto* rnd = app.add_subcommand("rnd-words", "Random-words baseline matched to each concept's word count");
  add_common(rnd);
  rnd->add_option("--grounding", v.grounding);
  rnd->add_option("--bundle", v.bundle);
  rnd->add_option("--seed", v.seed)->capture_default_str();
  v.filter.add_to(rnd);

  auto* sal = app.add_subcommand("saliency", "Concept saliency over visual tokens");
  add_common(sal);
  sal->add_option("--dictionary", v.dictionary);
  sal->add_option("--bundle", v.bundle);
  sal->add_option("--grid", v.grid, "ROWSxCOLS (default: the bundle's grid)");
  sal->add_option("--concepts", v.concepts, "Concept indices (default: all)")->delimiter(',');
  sal->add_option("--samples", v.samples, "Sample ids (default: all)")->delimiter(',');

  auto* eval = app.add_subcommand("eval", "Evaluation requests and scoring");
  eval->require_subcommand(1);
  auto* prep = eval->add_subcommand("prepare", "Write eval_requests.json for the embedding step");
  add_common(prep);
  prep->add_option("--grounding", v.grounding);
  prep->add_option("--bundle", v.bundle, "Test bundle");
  prep->add_option("--activations", v.activations, "Test activations");
  prep->add_option("--rnd-words", v.rnd_words_file);
  auto* score = eval->add_subcommand("score", "Score test samples from embedding tables");
  add_common(score);
  score->add_option("--grounding", v.grounding);
  score->add_option("--bundle", v.bundle, "Test bundle");
  score->add_option("--activations", v.activations, "Test activations");
  score->add_option("--image-embeddings", v.image_embeddings);
  score->add_option("--text-embeddings", v.text_embeddings);
  score->add_option("--rnd-words", v.rnd_words_file);
  score->add_option("--external-scores", v.external_scores, "external_scores.json with phrase scores");
  score->add_option("--r", v.r)->capture_default_str();

  auto* sweep_k = app.add_subcommand("sweep-k", "Reconstruction error over candidate K");
  add_common(sweep_k);
  sweep_k->add_option("--bundle", v.fit.bundle);
  sweep_k->add_option("--ks", v.ks, "Candidate K values")->delimiter(',')->capture_default_str();
  sweep_k->add_option("--lambda", v.fit.lambda)->capture_default_str();
  sweep_k->add_option("--seed", v.fit.seed)->capture_default_str();
  sweep_k->add_option("--max-iters", v.fit.max_iters)->capture_default_str();
  sweep_k->add_option("--tol", v.fit.tol)->capture_default_str();
  sweep_k->add_option("--restarts", v.fit.restarts)->capture_default_str();

  auto* sweep_layer = app.add_subcommand("sweep-layer", "A metric across per-layer bundles");
  add_common(sweep_layer);
  sweep_layer->add_option("--bundles", v.bundles, "One bundle per layer");
  sweep_layer->add_option("--metric", v.metric, "overlap | reconstruction_error")->capture_default_str();
  sweep_layer->add_option("--scores", v.score_files, "scores.json per layer (instead of --bundles)");
  sweep_layer->add_option("--layers", v.layers, "Layer of each --scores file")->delimiter(',');
  v.fit.add_to(sweep_layer);
  v.ground.add_to(sweep_layer);
  v.filter.add_to(sweep_layer);

  auto* report = app.add_subcommand("report", "Write report.json and a static report.html");
  add_common(report);
  report->add_option("--grounding", v.grounding);
  report->add_option("--bundle", v.bundle, "Bundle whose image_paths feed the image strips");
  report->add_option("--image-root", v.image_root, "Directory image_paths are relative to (default: the bundle)");
  report->add_option("--activations", v.activations, "Activations for per-sample panels");
  report->add_option("--r", v.r, "Concepts per panel (default: the grounding's r)");
  report->add_option("--rnd-words", v.rnd_words_file);
  report->add_option("--scores", v.score_files);
  report->add_option("--sweep", v.sweep_files);
  report->add_option("--saliency", v.saliency_dir);

  auto* validate = app.add_subcommand("validate", "Check artifact directories");
  validate->add_option("paths", v.paths);

  v.r = 0;  // report falls back to the grounding's r; eval score defaults to 3 below
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: parameter: " << e.what() << "\n";
    return exit_code(ErrorCode::parameter);
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (sub == eval) sub = eval->get_subcommands().front();
    if (sub == score && score->get_option("--r")->count() == 0) v.r = 3;
    apply_config_file(sub, v.config);
    if (sub == fit) return v.run_fit();
    if (sub == project) return v.run_project();
    if (sub == ground) return v.run_ground();
    if (sub == rnd) return v.run_rnd_words();
    if (sub == sal) return v.run_saliency();
    if (sub == prep) return v.run_eval_prepare();
    if (sub == score) return v.run_eval_score();
    if (sub == sweep_k) return v.run_sweep_k();
    if (sub == sweep_layer) return v.run_sweep_layer();
    if (sub == report) return v.run_report();
    if (sub == validate) return v.run_validate();
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
