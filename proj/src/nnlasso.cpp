#include <algorithm>
#include <cmath>

#include "conceptlens/error.hpp"
#include "conceptlens/factorize.hpp"
#include "factorize_detail.hpp"

namespace conceptlens {

namespace detail {

double kkt_violation(const Matrix& gram, const Vector& corr, double lambda, const Vector& v) {
  const Vector grad = 2.0 * (gram * v - corr).array() + lambda;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double viol = v(k) > 0.0 ? std::abs(grad(k)) : std::max(0.0, -grad(k));
    worst = std::max(worst, viol);
  }
  return worst;
}

int coordinate_descent(const Matrix& gram, const Vector& corr, double lambda, Vector& v, int max_sweeps,
                       double stop_violation) {
  const Eigen::Index k_count = v.size();
  Vector gv = gram * v;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double g_kk = gram(k, k);
      double next = 0.0;
      if (g_kk > 0.0) {
        // u_k^T r_k where r_k excludes atom k: corr_k - (G v)_k + G_kk v_k.
        const double partial = corr(k) - gv(k) + g_kk * v(k);
        next = std::max(0.0, (partial - 0.5 * lambda) / g_kk);
      }
      const double delta = next - v(k);
      if (delta != 0.0) {
        v(k) = next;
        gv += delta * gram.col(k);
      }
    }
    gv.noalias() = gram * v;
    if (kkt_violation(gram, corr, lambda, v) <= stop_violation) return sweep + 1;
  }
  return sweep;
}

// Solves the KKT system on the current support exactly and keeps the result
// if it is feasible and no worse than the iterate.
void polish_support(const Matrix& gram, const Vector& corr, double lambda, Vector& v) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (v(k) > 0.0) support.push_back(k);
  if (support.empty()) return;
  const auto s = static_cast<Eigen::Index>(support.size());
  Matrix g_ss(s, s);
  Vector rhs(s);
  for (Eigen::Index i = 0; i < s; ++i) {
    rhs(i) = corr(support[i]) - 0.5 * lambda;
    for (Eigen::Index j = 0; j < s; ++j) g_ss(i, j) = gram(support[i], support[j]);
  }
  Eigen::LDLT<Matrix> ldlt(g_ss);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return;
  const Vector x = ldlt.solve(rhs);
  if (!x.allFinite() || (x.array() <= 0.0).any()) return;
  Vector candidate = Vector::Zero(v.size());
  for (Eigen::Index i = 0; i < s; ++i) candidate(support[i]) = x(i);
  if (kkt_violation(gram, corr, lambda, candidate) <= kkt_violation(gram, corr, lambda, v)) v = candidate;
}

Vector solve_nnlasso(const Matrix& gram, const Vector& corr, double lambda, double z_norm, const CodeOptions& opts) {
  Vector v = Vector::Zero(corr.size());
  coordinate_descent(gram, corr, lambda, v, opts.max_sweeps, opts.kkt_tol * (1.0 + z_norm));
  polish_support(gram, corr, lambda, v);
  return v;
}

}  // namespace detail

Vector code_nnlasso(const Matrix& atoms, const Vector& z, double lambda, const CodeOptions& opts) {
  require(atoms.rows() == z.size(), ErrorCode::parameter, "code_nnlasso: z length does not match atom dimension");
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::parameter, "code_nnlasso: lambda must be >= 0");
  for (Eigen::Index k = 0; k < atoms.cols(); ++k)
    require(atoms.col(k).squaredNorm() > 0.0, ErrorCode::parameter,
            "code_nnlasso: dictionary column " + std::to_string(k) + " is zero");
  const Matrix gram = atoms.transpose() * atoms;
  const Vector corr = atoms.transpose() * z;
  return detail::solve_nnlasso(gram, corr, lambda, z.norm(), opts);
}

double nnlasso_kkt_violation(const Matrix& atoms, const Vector& z, double lambda, const Vector& v) {
  return detail::kkt_violation(atoms.transpose() * atoms, atoms.transpose() * z, lambda, v);
}

}  // namespace conceptlens
