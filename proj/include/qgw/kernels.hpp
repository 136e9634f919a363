#pragma once

#include <span>

#include "qgw/alloc.hpp"
#include "qgw/common.hpp"

namespace qgw::kernels {

// Serial variants are the reference implementations; the parallel ones must
// reproduce them bitwise for a fixed worker count. The unsuffixed entry
// points dispatch on qgw::parallel::threads(). The bench tool compares the
// two paths; the unit tests pin down their agreement.

/// C (n x k) += is not supported: C is overwritten. Row-major throughout.
void matmul_serial(const double* a, const double* b, double* c, idx n, idx p, idx k);
void matmul_parallel(const double* a, const double* b, double* c, idx n, idx p, idx k);
void matmul(const double* a, const double* b, double* c, idx n, idx p, idx k);

/// Elementwise inner product of two n-value arrays. The parallel variant
/// reduces per-thread partials in thread order, so results are reproducible
/// for a fixed thread count.
double dot_serial(const double* a, const double* b, idx n);
double dot_parallel(const double* a, const double* b, idx n);
double dot(const double* a, const double* b, idx n);

/// sum_{i,j} m[i*n+j]^2 * w[i] * w[j]
double quad_form_sq_serial(const double* m, const double* w, idx n);
double quad_form_sq_parallel(const double* m, const double* w, idx n);
double quad_form_sq(const double* m, const double* w, idx n);

/// Largest Euclidean distance over all pairs drawn from `members`.
double max_pairwise_distance_serial(const double* coords, idx dim, std::span<const idx> members);
double max_pairwise_distance_parallel(const double* coords, idx dim, std::span<const idx> members);
double max_pairwise_distance(const double* coords, idx dim, std::span<const idx> members);

/// Same scan against a dense n x n distance matrix.
double max_pairwise_from_matrix_serial(const double* matrix, idx n, std::span<const idx> members);
double max_pairwise_from_matrix_parallel(const double* matrix, idx n, std::span<const idx> members);
double max_pairwise_from_matrix(const double* matrix, idx n, std::span<const idx> members);

} // namespace qgw::kernels
