#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "conceptlens/error.hpp"
#include "conceptlens/factorize.hpp"
#include "conceptlens/rng.hpp"
#include "factorize_detail.hpp"

namespace conceptlens {

namespace detail {

void check_fit_args(const Matrix& reps, int num_concepts, int max_k, const char* who, const FitOptions& opts) {
  require(num_concepts >= 1, ErrorCode::parameter, std::string(who) + ": K must be at least 1");
  require(num_concepts <= max_k, ErrorCode::parameter,
          std::string(who) + ": K=" + std::to_string(num_concepts) + " exceeds the allowed maximum " +
              std::to_string(max_k));
  require(opts.max_outer_iters >= 1, ErrorCode::parameter, std::string(who) + ": max_outer_iters must be >= 1");
  require(opts.tol > 0.0, ErrorCode::parameter, std::string(who) + ": tol must be > 0");
  require(reps.allFinite(), ErrorCode::data, std::string(who) + ": representations contain non-finite values");
}

}  // namespace detail

namespace {

// Codes every column, warm-starting from `codes`.
void coding_step(const Matrix& reps, const Matrix& atoms, double lambda, Matrix& codes, int sweeps, double kkt_tol) {
  const Matrix gram = atoms.transpose() * atoms;
  const Matrix corr = atoms.transpose() * reps;
  for (Eigen::Index j = 0; j < reps.cols(); ++j) {
    Vector v = codes.col(j);
    detail::coordinate_descent(gram, corr.col(j), lambda, v, sweeps, kkt_tol * (1.0 + reps.col(j).norm()));
    codes.col(j) = v;
  }
}

Vector unit_column(const Matrix& reps, Eigen::Index j, Eigen::Index fallback_axis) {
  const double n = reps.col(j).norm();
  if (n > 0.0) return reps.col(j) / n;
  Vector e = Vector::Zero(reps.rows());
  e(fallback_axis % reps.rows()) = 1.0;
  return e;
}

// Per-atom least squares with projection onto the unit ball, in place.
// Atoms with no activation are reseeded from the worst-reconstructed sample.
void dictionary_step(const Matrix& reps, Matrix& atoms, const Matrix& codes) {
  const Matrix zvt = reps * codes.transpose();
  const Matrix vvt = codes * codes.transpose();
  std::set<Eigen::Index> used;
  Vector residual_norms;
  for (Eigen::Index k = 0; k < atoms.cols(); ++k) {
    if (vvt(k, k) <= 0.0) {
      if (residual_norms.size() == 0) residual_norms = (reps - atoms * codes).colwise().squaredNorm().transpose();
      Eigen::Index worst = -1;
      for (Eigen::Index j = 0; j < residual_norms.size(); ++j) {
        if (used.count(j)) continue;
        if (worst < 0 || residual_norms(j) > residual_norms(worst)) worst = j;
      }
      if (worst >= 0) {
        used.insert(worst);
        atoms.col(k) = unit_column(reps, worst, k);
      }
      continue;
    }
    Vector u = zvt.col(k) - atoms * vvt.col(k) + atoms.col(k) * vvt(k, k);
    u /= vvt(k, k);
    const double n = u.norm();
    if (n > 1.0) u /= n;
    atoms.col(k) = u;
  }
}

}  // namespace

std::vector<Eigen::Index> kmeanspp_columns(const Matrix& reps, int num_concepts, std::uint64_t seed) {
  const Eigen::Index m = reps.cols();
  require(num_concepts >= 1 && num_concepts <= m, ErrorCode::parameter, "k-means++: K must be in [1, M]");
  Rng rng(seed);
  std::vector<Eigen::Index> chosen;
  std::vector<bool> taken(static_cast<std::size_t>(m), false);
  chosen.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m))));
  taken[static_cast<std::size_t>(chosen.back())] = true;

  Vector d2 = (reps.colwise() - reps.col(chosen.back())).colwise().squaredNorm().transpose();
  while (static_cast<int>(chosen.size()) < num_concepts) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        if (taken[static_cast<std::size_t>(j)] || d2(j) <= 0.0) continue;
        acc += d2(j);
        pick = j;
        if (acc > target) break;
      }
    }
    if (pick < 0) {
      for (Eigen::Index j = 0; j < m && pick < 0; ++j)
        if (!taken[static_cast<std::size_t>(j)]) pick = j;
    }
    chosen.push_back(pick);
    taken[static_cast<std::size_t>(pick)] = true;
    d2 = d2.cwiseMin((reps.colwise() - reps.col(pick)).colwise().squaredNorm().transpose());
  }
  return chosen;
}

double semi_nmf_objective(const Matrix& reps, const Matrix& atoms, const Matrix& codes, double lambda) {
  return reconstruction_error(reps, atoms, codes) + lambda * codes.sum();
}

double reconstruction_error(const Matrix& reps, const Matrix& atoms, const Matrix& codes) {
  require(atoms.rows() == reps.rows() && atoms.cols() == codes.rows() && codes.cols() == reps.cols(),
          ErrorCode::parameter, "reconstruction_error: shape mismatch");
  if (atoms.cols() == 0) return reps.squaredNorm();
  return (reps - atoms * codes).squaredNorm();
}

namespace {

FitResult fit_semi_nmf_once(const Matrix& reps, int num_concepts, double lambda, const FitOptions& opts,
                            std::uint64_t init_seed) {
  constexpr double kStepKkt = 1e-10;
  Matrix atoms(reps.rows(), num_concepts);
  {
    // D^2 sampling over directions so large-norm samples do not dominate.
    Matrix directions = reps;
    for (Eigen::Index j = 0; j < directions.cols(); ++j) directions.col(j) = unit_column(reps, j, j);
    const auto seeds = kmeanspp_columns(directions, num_concepts, init_seed);
    for (int k = 0; k < num_concepts; ++k) atoms.col(k) = directions.col(seeds[static_cast<std::size_t>(k)]);
  }

  Matrix codes = Matrix::Zero(num_concepts, reps.cols());
  coding_step(reps, atoms, lambda, codes, opts.code_sweeps, kStepKkt);
  double previous = semi_nmf_objective(reps, atoms, codes, lambda);

  std::vector<double> trace;
  for (int iter = 0; iter < opts.max_outer_iters; ++iter) {
    dictionary_step(reps, atoms, codes);
    coding_step(reps, atoms, lambda, codes, opts.code_sweeps, kStepKkt);
    const double current = semi_nmf_objective(reps, atoms, codes, lambda);
    trace.push_back(current);
    const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
    if (std::abs(previous - current) / scale < opts.tol) break;
    previous = current;
  }
  // Final codes solved to convergence so they agree with project().
  coding_step(reps, atoms, lambda, codes, CodeOptions{}.max_sweeps, CodeOptions{}.kkt_tol);

  FitResult out;
  out.dictionary.method = Method::semi_nmf;
  out.dictionary.atoms = atoms;
  out.dictionary.lambda = lambda;
  out.dictionary.seed = opts.seed;
  out.dictionary.objective_trace = trace;
  out.activations.method = Method::semi_nmf;
  out.activations.values = codes;
  out.objective_trace = std::move(trace);
  return out;
}

}  // namespace

FitResult fit_semi_nmf(const Matrix& reps, int num_concepts, double lambda, const FitOptions& opts) {
  const auto max_k = static_cast<int>(std::min(reps.rows(), reps.cols())) - 1;
  detail::check_fit_args(reps, num_concepts, max_k, "semi_nmf", opts);
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::parameter, "semi_nmf: lambda must be >= 0");
  require(opts.restarts >= 1, ErrorCode::parameter, "semi_nmf: restarts must be >= 1");

  FitResult best;
  double best_objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opts.restarts; ++r) {
    const std::uint64_t init_seed = r == 0 ? opts.seed : splitmix64(opts.seed + static_cast<std::uint64_t>(r));
    FitResult candidate = fit_semi_nmf_once(reps, num_concepts, lambda, opts, init_seed);
    const double objective =
        semi_nmf_objective(reps, candidate.dictionary.atoms, candidate.activations.values, lambda);
    if (objective < best_objective) {
      best_objective = objective;
      best = std::move(candidate);
    }
  }
  return best;
}

KSelection select_k(const Matrix& reps, const std::vector<int>& candidates, double lambda, const FitOptions& opts) {
  require(!candidates.empty(), ErrorCode::parameter, "select_k: no candidates");
  require(std::is_sorted(candidates.begin(), candidates.end()), ErrorCode::parameter,
          "select_k: candidates must be sorted ascending");
  KSelection sel;
  sel.baseline = reps.squaredNorm();
  for (int k : candidates) {
    const FitResult fit = fit_semi_nmf(reps, k, lambda, opts);
    sel.curve.emplace_back(k, reconstruction_error(reps, fit.dictionary.atoms, fit.activations.values));
  }
  for (const auto& [k, err] : sel.curve) {
    if (err <= 0.5 * sel.baseline) {
      sel.k = k;
      return sel;
    }
  }
  sel.k = candidates.back();
  sel.warning = true;
  return sel;
}

FitResult fit(Method method, const Matrix& reps, int num_concepts, double lambda, const FitOptions& opts) {
  switch (method) {
    case Method::semi_nmf: return fit_semi_nmf(reps, num_concepts, lambda, opts);
    case Method::pca: return fit_pca(reps, num_concepts, opts);
    case Method::kmeans: return fit_kmeans(reps, num_concepts, opts);
    case Method::simple: return fit_simple(reps, num_concepts, opts);
  }
  fail(ErrorCode::parameter, "unknown method");
}

}  // namespace conceptlens
