// Acceptance suite: one PASS/FAIL line per criterion of the primary component.
// Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "conceptlens/bundleio.hpp"
#include "conceptlens/error.hpp"
#include "conceptlens/factorize.hpp"
#include "conceptlens/grounding.hpp"
#include "conceptlens/metrics.hpp"
#include "conceptlens/rng.hpp"
#include "support/cli_runner.hpp"
#include "support/stats_oracle.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace conceptlens;
using namespace conceptlens::testing;

namespace {

// Collects the first failure of a criterion; detail strings explain it.
struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Matrix gaussian(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

ErrorCode code_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return static_cast<ErrorCode>(-1);
}

// ---------------------------------------------------------------------------

Check semi_nmf_monotonicity() {
  Check c;
  Rng rng(64256);
  const Matrix z = gaussian(64, 256, rng);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = fit_semi_nmf(z, 20, 1.0, {});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& tr = res.objective_trace;
  c.expect(tr.size() >= 2, "trace too short");
  for (std::size_t i = 1; i < tr.size(); ++i)
    c.expect(tr[i] <= tr[i - 1] + 1e-9, "objective rose at iteration " + std::to_string(i) + ": " + num(tr[i - 1]) +
                                            " -> " + num(tr[i]));
  c.expect(secs < 10.0, "took " + num(secs) + " s");
  if (c.ok) c.detail = std::to_string(tr.size()) + " iterations, " + num(secs) + " s";
  return c;
}

Check planted_recovery() {
  Check c;
  double worst_cos = 1.0, worst_r = 1.0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto p = make_planted(8, 64, 512, 0.01, seed);
    FitOptions opts;
    opts.seed = seed;
    const auto res = fit_semi_nmf(p.reps, 8, 1.0, opts);
    std::vector<double> cos;
    const auto match = greedy_match(res.dictionary.atoms, p.atoms, &cos);
    for (int k = 0; k < 8; ++k) {
      const double r = pearson(res.activations.values.row(k).transpose(),
                               p.codes.row(match[static_cast<std::size_t>(k)]).transpose());
      worst_cos = std::min(worst_cos, cos[static_cast<std::size_t>(k)]);
      worst_r = std::min(worst_r, r);
    }
  }
  c.expect(worst_cos >= 0.95, "min |cos| " + num(worst_cos));
  c.expect(worst_r >= 0.9, "min Pearson " + num(worst_r));
  if (c.ok) c.detail = "5 fixtures, min |cos| " + num(worst_cos) + ", min Pearson " + num(worst_r);
  return c;
}

double lasso_objective(const Matrix& u, const Vector& z, double lambda, const Vector& v) {
  return (z - u * v).squaredNorm() + lambda * v.sum();
}

// Dense grid over the box containing the minimizer, followed by successive zooms around the best cell.
double grid_oracle(const Matrix& u, const Vector& z, double lambda) {
  // Any minimizer has ||U v|| <= 2 ||z||, hence ||v|| <= 2 ||z|| / sigma_min(U).
  const double smin = Eigen::JacobiSVD<Matrix>(u).singularValues().minCoeff();
  const double hi = 2.0 * z.norm() / smin + 1e-3;
  double lo0 = 0, hi0 = hi, lo1 = 0, hi1 = hi, best = lasso_objective(u, z, lambda, Vector::Zero(2));
  Vector arg = Vector::Zero(2);
  for (int level = 0; level < 8; ++level) {
    const int n = 200;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j) {
        Vector v(2);
        v << lo0 + (hi0 - lo0) * i / n, lo1 + (hi1 - lo1) * j / n;
        const double f = lasso_objective(u, z, lambda, v);
        if (f < best) {
          best = f;
          arg = v;
        }
      }
    const double w0 = (hi0 - lo0) / n * 2, w1 = (hi1 - lo1) / n * 2;
    lo0 = std::max(0.0, arg(0) - w0);
    hi0 = arg(0) + w0;
    lo1 = std::max(0.0, arg(1) - w1);
    hi1 = arg(1) + w1;
  }
  return best;
}

Check coding_optimality() {
  Check c;
  Rng rng(777);
  double worst_kkt = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int b = 2 + static_cast<int>(rng.below(15));
    const int k = 1 + static_cast<int>(rng.below(12));
    Matrix u = gaussian(b, k, rng);
    for (Eigen::Index i = 0; i < k; ++i) u.col(i) /= std::max(1.0, u.col(i).norm());
    const Vector z = gaussian(b, 1, rng).col(0) * (0.2 + 3 * rng.uniform());
    const double lambda = 2.0 * rng.uniform();
    const Vector v = code_nnlasso(u, z, lambda);
    worst_kkt = std::max(worst_kkt, nnlasso_kkt_violation(u, z, lambda, v));
    c.expect(v.minCoeff() >= 0.0, "negative code");
  }
  c.expect(worst_kkt <= 1e-6, "KKT violation " + num(worst_kkt));

  double worst_closed = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int b = 3 + static_cast<int>(rng.below(10));
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(b)));
    const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian(b, b, rng)).householderQ();
    const Matrix u = q.leftCols(k);
    const Vector z = gaussian(b, 1, rng).col(0);
    const double lambda = 2.0 * rng.uniform();
    const Vector expect = ((u.transpose() * z).array() - lambda / 2).max(0.0).matrix();
    worst_closed = std::max(worst_closed, (code_nnlasso(u, z, lambda) - expect).cwiseAbs().maxCoeff());
  }
  c.expect(worst_closed <= 1e-8, "orthonormal closed form off by " + num(worst_closed));

  double worst_grid = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix u = gaussian(3, 2, rng);
    const Vector z = gaussian(3, 1, rng).col(0) * 2.0;
    const double lambda = 1.5 * rng.uniform();
    const double got = lasso_objective(u, z, lambda, code_nnlasso(u, z, lambda));
    const double want = grid_oracle(u, z, lambda);
    worst_grid = std::max(worst_grid, std::abs(got - want));
  }
  c.expect(worst_grid <= 1e-3, "grid oracle gap " + num(worst_grid));
  if (c.ok)
    c.detail = "KKT max " + num(worst_kkt) + ", closed form max " + num(worst_closed) + ", grid gap max " +
               num(worst_grid);
  return c;
}

Check pca() {
  Check c;
  Rng rng(4242);
  double worst_ortho = 0.0, worst_rel = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int b = 5 + static_cast<int>(rng.below(40));
    const int m = 5 + static_cast<int>(rng.below(80));
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(b, m) - 1)));
    Matrix z = gaussian(b, m, rng);
    z.row(0) *= 5.0;
    const auto res = fit_pca(z, k);
    const Matrix& u = res.dictionary.atoms;
    worst_ortho = std::max(worst_ortho, (u.transpose() * u - Matrix::Identity(k, k)).cwiseAbs().maxCoeff());

    const Vector mean = z.rowwise().mean();
    const Matrix zc = z.colwise() - mean;
    const Matrix codes = project(res.dictionary, z);
    const double err = (zc - u * codes).squaredNorm();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(zc * zc.transpose());
    const Vector ev = eig.eigenvalues();  // ascending
    double discarded = 0.0;
    for (Eigen::Index i = 0; i < ev.size() - k; ++i) discarded += std::max(ev(i), 0.0);
    worst_rel = std::max(worst_rel, std::abs(err - discarded) / std::max(discarded, 1e-300));
  }
  c.expect(worst_ortho <= 1e-8, "U^T U off identity by " + num(worst_ortho));
  c.expect(worst_rel <= 1e-6, "reconstruction vs discarded spectrum rel. gap " + num(worst_rel));
  if (c.ok) c.detail = "20 fixtures, orthonormality " + num(worst_ortho) + ", spectrum rel. gap " + num(worst_rel);
  return c;
}

Check kmeans() {
  Check c;
  Matrix pts(2, 4);
  pts << 0, 0, 6, 6.5,
         0, 1, 0, 2;
  // Brute-force optimal 2-partition.
  double best = INFINITY;
  Matrix best_c;
  for (int mask = 1; mask < 15; ++mask) {
    Matrix cent = Matrix::Zero(2, 2);
    Vector cnt = Vector::Zero(2);
    for (int j = 0; j < 4; ++j) {
      const int g = (mask >> j) & 1;
      cent.col(g) += pts.col(j);
      cnt(g) += 1;
    }
    for (int g = 0; g < 2; ++g) cent.col(g) /= cnt(g);
    double w = 0;
    for (int j = 0; j < 4; ++j) w += (pts.col(j) - cent.col((mask >> j) & 1)).squaredNorm();
    if (w < best) {
      best = w;
      best_c = cent;
    }
  }
  auto sorted_cols = [](Matrix m) {
    std::vector<std::pair<double, double>> v;
    for (Eigen::Index j = 0; j < m.cols(); ++j) v.emplace_back(m(0, j), m(1, j));
    std::sort(v.begin(), v.end());
    return v;
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    FitOptions o;
    o.seed = seed;
    const auto res = fit_kmeans(pts, 2, o);
    c.expect(sorted_cols(res.dictionary.atoms) == sorted_cols(best_c), "centroids differ from the partition oracle");
  }

  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int b = 1 + static_cast<int>(rng.below(6));
    const int m = 2 + static_cast<int>(rng.below(60));
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
    const Matrix z = gaussian(b, m, rng);
    FitOptions o;
    o.seed = static_cast<std::uint64_t>(trial);
    const auto res = fit_kmeans(z, k, o);
    for (const Matrix& v : {res.activations.values, project(res.dictionary, gaussian(b, 7, rng))})
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const auto ones = (v.col(j).array() == 1.0).count();
        const auto zeros = (v.col(j).array() == 0.0).count();
        c.expect(ones == 1 && zeros == v.rows() - 1, "activation column is not one-hot");
      }
  }
  if (c.ok) c.detail = "oracle WCSS " + num(best) + ", 50 one-hot fixtures";
  return c;
}

GroundingResult ground_with(const ConceptDictionary& dict, const RepresentationBundle& b, const WordFilter& f) {
  return ground_dictionary(dict, b, project(dict, b.reps, b.sample_ids), GroundingConfig{}, f);
}

std::vector<std::vector<std::string>> word_sets(const GroundingResult& g) {
  std::vector<std::vector<std::string>> out;
  for (const auto& c : g.concepts) {
    out.emplace_back();
    for (const auto& w : c.words) out.back().push_back(w.word);
  }
  return out;
}

Check overlap_criterion() {
  Check c;
  const auto ab = overlap({{"a", "b"}, {"b", "c"}});
  c.expect(ab.per_concept == std::vector<double>{0.5, 0.5} && ab.mean == 0.5, "{a,b}/{b,c} fixture");
  c.expect(overlap({{"a", "b"}, {"c"}, {"d", "e"}}).mean == 0.0, "disjoint fixture");
  c.expect(overlap({{"a", "b"}, {"b", "a"}, {"a", "b"}}).mean == 1.0, "identical fixture");

  const auto pb = make_planted_bundle(8, 64, 512, 0.01, 1);
  const auto filter = WordFilter::bundled();
  const auto sn = fit_semi_nmf(pb.bundle.reps, 8, 1.0, {});
  const double ov_sn = overlap(word_sets(ground_with(sn.dictionary, pb.bundle, filter))).mean;
  c.expect(ov_sn <= 0.05, "semi-NMF overlap " + num(ov_sn));

  // Control: one KMeans centroid duplicated K times with tiny jitter.
  const auto km = fit_kmeans(pb.bundle.reps, 8, {});
  ConceptDictionary dup = km.dictionary;
  Rng rng(5);
  for (Eigen::Index k = 0; k < dup.atoms.cols(); ++k) {
    dup.atoms.col(k) = km.dictionary.atoms.col(0);
    for (Eigen::Index i = 0; i < dup.atoms.rows(); ++i) dup.atoms(i, k) += 1e-3 * rng.normal();
  }
  const double ov_dup = overlap(word_sets(ground_with(dup, pb.bundle, filter))).mean;
  c.expect(ov_dup >= 0.5, "duplicated-atom control overlap " + num(ov_dup));
  if (c.ok) c.detail = "semi-NMF " + num(ov_sn) + ", duplicated-atom KMeans control " + num(ov_dup);
  return c;
}

Check grounding_oracles() {
  Check c;
  Rng rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + static_cast<int>(rng.below(50));
    const int n = 1 + static_cast<int>(rng.below(10));
    ActivationMatrix a;
    a.values = Matrix(1, m);
    for (int j = 0; j < m; ++j) {
      a.values(0, j) = std::round(rng.normal() * 4.0) / 4.0;
      a.sample_ids.push_back("x" + std::to_string(j));
    }
    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int p, int q) { return std::abs(a.values(0, p)) > std::abs(a.values(0, q)); });
    const auto mas = select_mas(a, 0, n);
    c.expect(mas.size() == static_cast<std::size_t>(std::min(n, m)), "select_mas length");
    for (std::size_t i = 0; i < mas.size(); ++i)
      c.expect(mas[i].sample_id == a.sample_ids[static_cast<std::size_t>(order[i])], "select_mas order");
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const int vs = 1 + static_cast<int>(rng.below(40));
    const int b = 1 + static_cast<int>(rng.below(8));
    const int top = 1 + static_cast<int>(rng.below(20));
    Matrix wu(vs, b);
    for (Eigen::Index i = 0; i < wu.size(); ++i) wu.data()[i] = std::round(rng.normal() * 2.0) / 2.0;
    Vector u(b);
    for (int i = 0; i < b; ++i) u(i) = std::round(rng.normal() * 2.0) / 2.0;
    std::vector<std::string> vocab;
    for (int i = 0; i < vs; ++i) vocab.push_back("w" + std::to_string(i));
    const Vector logits = wu * u;
    std::vector<int> order(static_cast<std::size_t>(vs));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int p, int q) { return logits(p) > logits(q); });
    const auto got = decode_concept_words(wu, vocab, u, top);
    c.expect(got.size() == static_cast<std::size_t>(std::min(top, vs)), "decode length");
    for (std::size_t i = 0; i < got.size(); ++i)
      c.expect(got[i].word == vocab[static_cast<std::size_t>(order[i])], "decode order");
  }
  const auto filter = WordFilter::bundled();
  const std::vector<std::string> pool = {"dog", "\xC4\xA0" "Dog", "the", "ax", "K\xC3\xB6ln", "running",
                                         "\xE2\x96\x81grass", "zzqx", " Snow ", "of"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<WordScore> raw;
    const int n = static_cast<int>(rng.below(15));
    for (int i = 0; i < n; ++i) raw.push_back({pool[rng.below(pool.size())], std::round(rng.normal() * 3.0)});
    const auto once = filter_words(raw, filter);
    c.expect(filter_words(once, filter) == once, "filter not idempotent");
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(6)), cols = 1 + static_cast<int>(rng.below(6));
    const int b = 1 + static_cast<int>(rng.below(10));
    const Matrix h = gaussian(rows * cols, b, rng);
    const Vector u = gaussian(b, 1, rng).col(0);
    const Matrix s = saliency_map(u, h, {rows, cols});
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        const Vector hv = h.row(i * cols + j).transpose();
        c.expect(s(i, j) == (h.row(i * cols + j) * u)(0, 0), "saliency differs from the direct product");
        (void)hv;
      }
  }
  if (c.ok) c.detail = "1000 fixtures each for select_mas, decode, filter, saliency";
  return c;
}

Check metrics_arithmetic() {
  Check c;
  Vector e1(2), t(2);
  e1 << 1, 0;
  t << 0.3, std::sqrt(1.0 - 0.09);
  c.expect(std::abs(clip_score(e1, t) - 0.75) <= 1e-12, "cos 0.3 -> " + num(clip_score(e1, t)));
  c.expect(clip_score(e1, -t) == 0.0, "clamp");
  c.expect(std::abs(clip_score(t, t) - 2.5) <= 1e-12, "self score " + num(clip_score(t, t)));

  const std::vector<double> acts = {1.0, 0.6, 0.4};
  const auto s = specificity(acts, {true, false, false});
  c.expect(s.tau == 0.5 && s.fraction == 0.5, "specificity fixture tau " + num(s.tau) + " fraction " + num(s.fraction));

  Rng rng(2718);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(2 + rng.below(40)), b(2 + rng.below(40));
    const double sa = 0.05 + 3 * rng.uniform(), sb = 0.05 + 3 * rng.uniform(), shift = 1.5 * rng.normal();
    for (auto& x : a) x = sa * rng.normal();
    for (auto& x : b) x = shift + sb * rng.normal();
    const auto got = welch_ttest(a, b);
    const auto want = welch_oracle(a, b);
    worst = std::max({worst, std::abs(got.t - want.t), std::abs(got.p - want.p)});
  }
  c.expect(worst <= 1e-6, "welch vs oracle " + num(worst));
  if (c.ok) c.detail = "welch max deviation " + num(worst) + " over 100 fixtures";
  return c;
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

Check formats() {
  Check c;
  TempDir tmp;
  auto pb = make_planted_bundle(4, 16, 30, 0.01, 8);
  attach_visual_tokens(pb.bundle, {2, 3}, 3);
  // Pass every value through float32 so the round trip can be exact.
  auto f32 = [](Matrix m) { return Matrix(m.cast<float>().cast<double>()); };
  auto& b = pb.bundle;
  b.reps = f32(b.reps);
  *b.unembedding = f32(*b.unembedding);
  for (auto& v : b.visual_reps) v = f32(v);

  write_bundle(b, tmp / "b");
  const auto rb = read_bundle(tmp / "b");
  c.expect(rb.reps == b.reps && *rb.unembedding == *b.unembedding && rb.visual_reps == b.visual_reps &&
               rb.sample_ids == b.sample_ids && rb.captions == b.captions && *rb.vocab == *b.vocab &&
               *rb.labels == *b.labels && *rb.image_paths == *b.image_paths && rb.grid == b.grid,
           "bundle round trip");
  write_bundle(rb, tmp / "b2");
  c.expect(dir_bytes(tmp / "b") == dir_bytes(tmp / "b2"), "bundle rewrite not byte-identical");

  auto fit = fit_semi_nmf(b.reps, 4, 1.0, {});
  write_dictionary(fit.dictionary, tmp / "d");
  const auto rd = read_dictionary(tmp / "d");
  write_dictionary(rd, tmp / "d2");
  c.expect(dir_bytes(tmp / "d") == dir_bytes(tmp / "d2"), "dictionary rewrite not byte-identical");
  c.expect(rd.atoms == f32(rd.atoms) && (rd.atoms - fit.dictionary.atoms).cwiseAbs().maxCoeff() < 1e-6,
           "dictionary values");
  auto pca = fit_pca(b.reps, 3);
  write_dictionary(pca.dictionary, tmp / "p");
  const auto rp = read_dictionary(tmp / "p");
  c.expect(rp.atoms == f32(pca.dictionary.atoms) && *rp.mean == f32(*pca.dictionary.mean), "pca dictionary round trip");

  ActivationMatrix acts = project(rd, b.reps, b.sample_ids);
  acts.values = f32(acts.values);
  write_activations(acts, tmp / "a");
  const auto ra = read_activations(tmp / "a");
  c.expect(ra.values == acts.values && ra.sample_ids == acts.sample_ids, "activations round trip");

  const auto g = ground_dictionary(rd, rb, ra, GroundingConfig{}, WordFilter::bundled());
  write_grounding(g, tmp / "g");
  const auto rg = read_grounding(tmp / "g");
  c.expect(rg.concepts == g.concepts && rg.config == g.config, "grounding round trip");
  write_grounding(rg, tmp / "g2");
  c.expect(dir_bytes(tmp / "g") == dir_bytes(tmp / "g2"), "grounding rewrite not byte-identical");

  // Named errors.
  struct Case {
    std::string name;
    std::function<void()> fn;
    ErrorCode code;
    std::string message;  // prefix
  };
  auto copy = [&](const std::string& name) {
    fs::copy(tmp / "b", tmp / name, fs::copy_options::recursive);
    return tmp / name;
  };
  const auto trunc = copy("trunc");
  fs::resize_file(trunc / "Z.bin", fs::file_size(trunc / "Z.bin") - 1);
  const auto gone = copy("gone");
  fs::remove(gone / "Z.bin");
  const auto flip = copy("flip");
  {
    std::fstream f(flip / "Z.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('\x11');
  }
  auto no_vocab = b;
  no_vocab.vocab.reset();
  auto short_ids = b;
  short_ids.sample_ids.pop_back();
  auto dup_ids = b;
  dup_ids.sample_ids[1] = dup_ids.sample_ids[0];
  auto long_atom = fit.dictionary;
  long_atom.atoms.col(0) *= 1.5 / long_atom.atoms.col(0).norm();
  auto skew = pca.dictionary;
  skew.atoms(0, 0) += 0.1;
  auto neg = acts;
  neg.values(0, 0) = -1.0;
  ActivationMatrix hot;
  hot.method = Method::kmeans;
  hot.values = Matrix::Ones(2, 2);
  hot.sample_ids = {"a", "b"};
  auto unsorted = g;
  unsorted.concepts[0].mas = {{"a", 0.1}, {"b", 0.9}};

  const std::vector<Case> cases = {
      {"truncated payload", [&] { read_bundle(trunc); }, ErrorCode::size_mismatch, "size mismatch: Z"},
      {"missing payload", [&] { read_bundle(gone); }, ErrorCode::missing_tensor_file, "missing tensor file"},
      {"corrupted payload", [&] { read_bundle(flip); }, ErrorCode::checksum_mismatch, "checksum mismatch: Z"},
      {"missing vocab", [&] { write_bundle(no_vocab, tmp / "x1"); }, ErrorCode::validation, "vocab missing"},
      {"sample count", [&] { write_bundle(short_ids, tmp / "x2"); }, ErrorCode::validation, ""},
      {"duplicate ids", [&] { write_bundle(dup_ids, tmp / "x3"); }, ErrorCode::validation, "duplicate sample id"},
      {"atom norm", [&] { write_dictionary(long_atom, tmp / "x4"); }, ErrorCode::validation, "semi_nmf atom norm"},
      {"pca orthonormality", [&] { write_dictionary(skew, tmp / "x5"); }, ErrorCode::validation, ""},
      {"negative activation", [&] { write_activations(neg, tmp / "x6"); }, ErrorCode::validation, ""},
      {"one-hot", [&] { write_activations(hot, tmp / "x7"); }, ErrorCode::validation, ""},
      {"unsorted MAS", [&] { write_grounding(unsorted, tmp / "x8"); }, ErrorCode::validation, ""},
      {"kind mismatch", [&] { read_dictionary(tmp / "b"); }, ErrorCode::validation, ""},
      {"missing artifact", [&] { read_bundle(tmp / "nothing"); }, ErrorCode::io, ""},
  };
  for (const auto& k : cases) {
    std::string msg;
    const auto code = code_of(k.fn, &msg);
    c.expect(code == k.code && msg.starts_with(k.message),
             k.name + ": got " + (code == static_cast<ErrorCode>(-1) ? std::string("no error") : std::string(to_string(code))) +
                 " '" + msg + "'");
  }
  if (c.ok) c.detail = "4 artifact kinds round-trip, " + std::to_string(cases.size()) + " named errors";
  return c;
}

Check pipeline_determinism() {
  Check c;
  TempDir tmp;
  const auto pb = make_planted_bundle(6, 32, 200, 0.01, 11);
  write_bundle(slice_bundle(pb.bundle, 0, 160), tmp / "train");
  write_bundle(slice_bundle(pb.bundle, 160, 200), tmp / "test");
  const std::string o = (tmp / "run").string(), train = (tmp / "train").string(), test = (tmp / "test").string();
  const std::vector<std::vector<std::string>> steps = {
      {"fit", "--bundle", train, "--k", "6", "--seed", "3", "--out", o},
      {"project", "--dictionary", o + "/dictionary", "--bundle", test, "--out", o, "--name", "test_activations"},
      {"ground", "--dictionary", o + "/dictionary", "--bundle", train, "--activations", o + "/activations", "--out", o},
      {"rnd-words", "--grounding", o + "/grounding", "--bundle", train, "--seed", "3", "--out", o},
      {"report", "--grounding", o + "/grounding", "--bundle", train, "--activations", o + "/test_activations",
       "--rnd-words", o + "/rnd_words.json", "--out", o},
  };
  auto run_all = [&] {
    for (const auto& s : steps) {
      const auto r = run_cli(s, tmp.path());
      c.expect(r.exit_code == 0, s[0] + " exited " + std::to_string(r.exit_code) + ": " + r.err);
    }
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(tmp / "run"))
      if (e.path().extension() == ".json") out[fs::relative(e.path(), tmp / "run").string()] = slurp(e.path());
    return out;
  };
  const auto first = run_all();
  const auto second = run_all();
  c.expect(first.size() >= 10, "expected JSON outputs missing");
  for (const auto& [name, bytes] : first) {
    auto it = second.find(name);
    c.expect(it != second.end() && it->second == bytes, name + " differs between runs");
  }
  if (c.ok) c.detail = std::to_string(first.size()) + " JSON files identical";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
      {"Semi-NMF monotonicity (64x256, slack 1e-9, < 10 s)", semi_nmf_monotonicity},
      {"Planted recovery (K=8, B=64, M=512, sigma=0.01; |cos| >= 0.95, Pearson >= 0.9)", planted_recovery},
      {"Coding optimality (KKT 1e-6 x1000, closed form 1e-8, grid 1e-3)", coding_optimality},
      {"PCA (U^T U = I within 1e-8, discarded spectrum within 1e-6 rel.)", pca},
      {"KMeans (partition oracle centroids, one-hot codes)", kmeans},
      {"Overlap (hand fixtures, semi-NMF <= 0.05, duplicated-atom control >= 0.5)", overlap_criterion},
      {"Grounding oracles (select_mas, decode, filter idempotence, saliency)", grounding_oracles},
      {"Metrics arithmetic (clip_score, specificity, Welch within 1e-6)", metrics_arithmetic},
      {"Formats (bit-exact round trips, named errors)", formats},
      {"Pipeline determinism (fit, project, ground, rnd-words, report twice)", pipeline_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s  %s  [%s]\n", c.ok ? "PASS" : "FAIL", name, c.detail.c_str());
    std::fflush(stdout);
    failed += c.ok ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
