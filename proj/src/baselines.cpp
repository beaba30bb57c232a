// PCA, k-means and largest-norm ("simple") dictionaries.

#include <algorithm>
#include <numeric>

#include <Eigen/SVD>

#include "conceptlens/error.hpp"
#include "conceptlens/factorize.hpp"
#include "factorize_detail.hpp"

namespace conceptlens {

namespace detail {

Matrix one_hot_nearest(const Matrix& atoms, const Matrix& reps) {
  Matrix codes = Matrix::Zero(atoms.cols(), reps.cols());
  for (Eigen::Index j = 0; j < reps.cols(); ++j) codes(nearest_atom(atoms, reps.col(j)), j) = 1.0;
  return codes;
}

}  // namespace detail

Eigen::Index nearest_atom(const Matrix& atoms, const Eigen::Ref<const Vector>& z) {
  Eigen::Index best = 0;
  double best_d = (atoms.col(0) - z).squaredNorm();
  for (Eigen::Index k = 1; k < atoms.cols(); ++k) {
    const double d = (atoms.col(k) - z).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

namespace {

FitResult package(Method method, Matrix atoms, Matrix codes, std::uint64_t seed, std::vector<double> trace) {
  FitResult out;
  out.dictionary.method = method;
  out.dictionary.atoms = std::move(atoms);
  out.dictionary.seed = seed;
  out.dictionary.objective_trace = trace;
  out.activations.method = method;
  out.activations.values = std::move(codes);
  out.objective_trace = std::move(trace);
  return out;
}

double within_cluster_ss(const Matrix& reps, const Matrix& centroids, const std::vector<Eigen::Index>& assign) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < reps.cols(); ++j)
    total += (reps.col(j) - centroids.col(assign[static_cast<std::size_t>(j)])).squaredNorm();
  return total;
}

}  // namespace

FitResult fit_pca(const Matrix& reps, int num_concepts, const FitOptions& opts) {
  detail::check_fit_args(reps, num_concepts, static_cast<int>(std::min(reps.rows(), reps.cols())), "pca", opts);
  const Vector mean = reps.rowwise().mean();
  const Matrix centered = reps.colwise() - mean;

  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  Matrix atoms = svd.matrixU().leftCols(num_concepts);
  // Sign convention: the largest-magnitude entry of each component is positive.
  for (Eigen::Index k = 0; k < atoms.cols(); ++k) {
    Eigen::Index arg = 0;
    atoms.col(k).cwiseAbs().maxCoeff(&arg);
    if (atoms(arg, k) < 0.0) atoms.col(k) *= -1.0;
  }
  Matrix codes = atoms.transpose() * centered;
  const double err = (centered - atoms * codes).squaredNorm();

  FitResult out = package(Method::pca, std::move(atoms), std::move(codes), opts.seed, {err});
  out.dictionary.mean = mean;
  return out;
}

FitResult fit_kmeans_from(const Matrix& reps, const Matrix& initial_centroids, const FitOptions& opts) {
  const auto k_count = static_cast<int>(initial_centroids.cols());
  detail::check_fit_args(reps, k_count, static_cast<int>(reps.cols()), "kmeans", opts);
  require(initial_centroids.rows() == reps.rows(), ErrorCode::parameter, "kmeans: centroid dimension mismatch");

  const Eigen::Index m = reps.cols();
  Matrix centroids = initial_centroids;
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(m), -1);
  std::vector<double> trace;

  for (int iter = 0; iter < opts.max_outer_iters; ++iter) {
    bool changed = false;
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index a = nearest_atom(centroids, reps.col(j));
      changed = changed || a != assign[static_cast<std::size_t>(j)];
      assign[static_cast<std::size_t>(j)] = a;
    }

    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k_count), 0);
    for (auto a : assign) ++counts[static_cast<std::size_t>(a)];
    // Empty clusters take the point farthest from its centroid, drawn from
    // clusters that can spare one.
    for (int c = 0; c < k_count; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto a = assign[static_cast<std::size_t>(j)];
        if (counts[static_cast<std::size_t>(a)] < 2) continue;
        const double d = (reps.col(j) - centroids.col(a)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = j;
        }
      }
      if (far < 0) fail(ErrorCode::data, "kmeans: cannot reseed empty cluster");
      --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
      assign[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      changed = true;
    }

    centroids.setZero();
    for (Eigen::Index j = 0; j < m; ++j) centroids.col(assign[static_cast<std::size_t>(j)]) += reps.col(j);
    for (int c = 0; c < k_count; ++c) centroids.col(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    trace.push_back(within_cluster_ss(reps, centroids, assign));
    if (!changed) break;
  }

  Matrix codes = Matrix::Zero(k_count, m);
  for (Eigen::Index j = 0; j < m; ++j) codes(assign[static_cast<std::size_t>(j)], j) = 1.0;
  return package(Method::kmeans, std::move(centroids), std::move(codes), opts.seed, std::move(trace));
}

FitResult fit_kmeans(const Matrix& reps, int num_concepts, const FitOptions& opts) {
  detail::check_fit_args(reps, num_concepts, static_cast<int>(reps.cols()), "kmeans", opts);
  const auto seeds = kmeanspp_columns(reps, num_concepts, opts.seed);
  Matrix init(reps.rows(), num_concepts);
  for (int k = 0; k < num_concepts; ++k) init.col(k) = reps.col(seeds[static_cast<std::size_t>(k)]);
  return fit_kmeans_from(reps, init, opts);
}

FitResult fit_simple(const Matrix& reps, int num_concepts, const FitOptions& opts) {
  detail::check_fit_args(reps, num_concepts, static_cast<int>(reps.cols()), "simple", opts);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(reps.cols()));
  std::iota(order.begin(), order.end(), 0);
  const Vector norms = reps.colwise().norm().transpose();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return norms(a) > norms(b); });

  Matrix atoms(reps.rows(), num_concepts);
  for (int k = 0; k < num_concepts; ++k) atoms.col(k) = reps.col(order[static_cast<std::size_t>(k)]);
  Matrix codes = detail::one_hot_nearest(atoms, reps);
  const double err = reconstruction_error(reps, atoms, codes);
  return package(Method::simple, std::move(atoms), std::move(codes), opts.seed, {err});
}

}  // namespace conceptlens
