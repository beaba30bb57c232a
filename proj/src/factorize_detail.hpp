#pragma once

// Internals shared between the factorization translation units.

#include "conceptlens/factorize.hpp"

namespace conceptlens::detail {

// Largest KKT violation of v for min_{v>=0} v^T G v - 2 c^T v + lambda sum(v).
double kkt_violation(const Matrix& gram, const Vector& corr, double lambda, const Vector& v);

// Cyclic coordinate descent from the given v, in place. Returns sweeps run.
int coordinate_descent(const Matrix& gram, const Vector& corr, double lambda, Vector& v, int max_sweeps,
                       double stop_violation);

void polish_support(const Matrix& gram, const Vector& corr, double lambda, Vector& v);

Vector solve_nnlasso(const Matrix& gram, const Vector& corr, double lambda, double z_norm, const CodeOptions& opts);

// One-hot codes at each column's nearest atom.
Matrix one_hot_nearest(const Matrix& atoms, const Matrix& reps);

void check_fit_args(const Matrix& reps, int num_concepts, int max_k, const char* who, const FitOptions& opts);

}  // namespace conceptlens::detail
