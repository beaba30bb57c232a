#pragma once

// Concept dictionary learning: Z (B x M, samples as columns) ~= U V with
// U in R^{B x K} and V in R^{K x M}, under one of four constraint sets.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "conceptlens/types.hpp"

namespace conceptlens {

enum class DeadAtomPolicy { reseed_worst_sample };

struct FitOptions {
  int max_outer_iters = 200;
  double tol = 1e-6;  // stop when relative objective change drops below
  std::uint64_t seed = 0;
  DeadAtomPolicy dead_atom_policy = DeadAtomPolicy::reseed_worst_sample;
  // Coordinate-descent sweeps per column in the coding step of each outer
  // iteration (warm-started). Final projections solve to convergence.
  int code_sweeps = 50;
  // Independent semi-NMF initializations; the lowest final objective wins.
  // Restart 0 uses `seed` itself.
  int restarts = 5;
};

struct FitResult {
  ConceptDictionary dictionary;
  ActivationMatrix activations;
  std::vector<double> objective_trace;
};

// Options for the non-negative lasso coder.
struct CodeOptions {
  int max_sweeps = 100000;
  // Stop when the largest KKT violation is below kkt_tol * (1 + ||z||).
  double kkt_tol = 1e-10;
};

// argmin_{v >= 0} ||z - U v||^2 + lambda * sum(v).
Vector code_nnlasso(const Matrix& atoms, const Vector& z, double lambda, const CodeOptions& opts = {});

// Largest KKT violation of v for the problem above, unnormalized.
double nnlasso_kkt_violation(const Matrix& atoms, const Vector& z, double lambda, const Vector& v);

// ||Z - U V||_F^2 + lambda * sum(V).
double semi_nmf_objective(const Matrix& reps, const Matrix& atoms, const Matrix& codes, double lambda);

FitResult fit_semi_nmf(const Matrix& reps, int num_concepts, double lambda, const FitOptions& opts = {});
FitResult fit_pca(const Matrix& reps, int num_concepts, const FitOptions& opts = {});
FitResult fit_kmeans(const Matrix& reps, int num_concepts, const FitOptions& opts = {});
// Lloyd iterations from caller-supplied centroids (B x K). Exposed for
// testing empty-cluster handling.
FitResult fit_kmeans_from(const Matrix& reps, const Matrix& initial_centroids, const FitOptions& opts = {});
FitResult fit_simple(const Matrix& reps, int num_concepts, const FitOptions& opts = {});

FitResult fit(Method method, const Matrix& reps, int num_concepts, double lambda, const FitOptions& opts = {});

// K columns of `reps` chosen by k-means++ D^2 sampling, lowest index on ties.
std::vector<Eigen::Index> kmeanspp_columns(const Matrix& reps, int num_concepts, std::uint64_t seed);

// Codes for new samples under the dictionary's own constraint set.
Matrix project(const ConceptDictionary& dict, const Matrix& reps);
ActivationMatrix project(const ConceptDictionary& dict, const Matrix& reps, std::vector<std::string> sample_ids);

// Index of the atom nearest to z in l2, lowest index on ties.
Eigen::Index nearest_atom(const Matrix& atoms, const Eigen::Ref<const Vector>& z);

double reconstruction_error(const Matrix& reps, const Matrix& atoms, const Matrix& codes);

struct KSelection {
  int k = 0;
  std::vector<std::pair<int, double>> curve;  // (K, reconstruction error)
  double baseline = 0.0;                      // ||Z||_F^2, the K = 0 error
  bool warning = false;                       // no candidate reached 50 %
};

// Smallest candidate K whose semi-NMF reconstruction error is at most half
// of ||Z||_F^2; falls back to the largest candidate with `warning` set.
KSelection select_k(const Matrix& reps, const std::vector<int>& candidates, double lambda, const FitOptions& opts = {});

}  // namespace conceptlens
