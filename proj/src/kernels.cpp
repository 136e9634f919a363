#include "qgw/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qgw/parallel.hpp"

namespace qgw::kernels {

namespace {

inline double sq_dist(const double* x, const double* y, idx dim) {
    double s = 0.0;
    for (idx d = 0; d < dim; ++d) {
        const double diff = x[d] - y[d];
        s += diff * diff;
    }
    return s;
}

inline void matmul_rows(const double* a, const double* b, double* c, idx p, idx k, idx row_begin,
                        idx row_end) {
    for (idx i = row_begin; i < row_end; ++i) {
        double* ci = c + i * k;
        std::memset(ci, 0, static_cast<std::size_t>(k) * sizeof(double));
        const double* ai = a + i * p;
        for (idx l = 0; l < p; ++l) {
            const double av = ai[l];
            if (av == 0.0) continue;
            const double* bl = b + l * k;
            for (idx j = 0; j < k; ++j) ci[j] += av * bl[j];
        }
    }
}

// Contiguous ranges per thread id; merging partials in id order keeps sums
// reproducible for a fixed thread count.
template <class Body>
void split_range(idx n, int nthreads, const Body& body) {
    const idx chunk = (n + nthreads - 1) / nthreads;
#ifdef _OPENMP
#pragma omp parallel num_threads(nthreads)
    {
        const int t = omp_get_thread_num();
        const idx begin = std::min<idx>(static_cast<idx>(t) * chunk, n);
        const idx end = std::min<idx>(begin + chunk, n);
        body(t, begin, end);
    }
#else
    for (int t = 0; t < nthreads; ++t) {
        const idx begin = std::min<idx>(static_cast<idx>(t) * chunk, n);
        const idx end = std::min<idx>(begin + chunk, n);
        body(t, begin, end);
    }
#endif
}

} // namespace

void matmul_serial(const double* a, const double* b, double* c, idx n, idx p, idx k) {
    matmul_rows(a, b, c, p, k, 0, n);
}

void matmul_parallel(const double* a, const double* b, double* c, idx n, idx p, idx k) {
    const int nt = parallel::threads();
    split_range(n, nt, [&](int, idx begin, idx end) { matmul_rows(a, b, c, p, k, begin, end); });
}

void matmul(const double* a, const double* b, double* c, idx n, idx p, idx k) {
    if (parallel::threads() > 1 && n * p * k > 1u << 18)
        matmul_parallel(a, b, c, n, p, k);
    else
        matmul_serial(a, b, c, n, p, k);
}

double dot_serial(const double* a, const double* b, idx n) {
    double s = 0.0;
    for (idx i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double dot_parallel(const double* a, const double* b, idx n) {
    const int nt = parallel::threads();
    vec<double> partial(static_cast<std::size_t>(nt), 0.0);
    split_range(n, nt, [&](int t, idx begin, idx end) {
        double s = 0.0;
        for (idx i = begin; i < end; ++i) s += a[i] * b[i];
        partial[static_cast<std::size_t>(t)] = s;
    });
    double s = 0.0;
    for (double v : partial) s += v;
    return s;
}

double dot(const double* a, const double* b, idx n) {
    if (parallel::threads() > 1 && n > 1 << 16) return dot_parallel(a, b, n);
    return dot_serial(a, b, n);
}

namespace {
inline double quad_form_rows(const double* m, const double* w, idx n, idx begin, idx end) {
    double s = 0.0;
    for (idx i = begin; i < end; ++i) {
        const double* mi = m + i * n;
        const double wi = w[i];
        if (wi == 0.0) continue;
        double row = 0.0;
        for (idx j = 0; j < n; ++j) row += mi[j] * mi[j] * w[j];
        s += wi * row;
    }
    return s;
}
} // namespace

double quad_form_sq_serial(const double* m, const double* w, idx n) {
    return quad_form_rows(m, w, n, 0, n);
}

double quad_form_sq_parallel(const double* m, const double* w, idx n) {
    const int nt = parallel::threads();
    vec<double> partial(static_cast<std::size_t>(nt), 0.0);
    split_range(n, nt, [&](int t, idx begin, idx end) {
        partial[static_cast<std::size_t>(t)] = quad_form_rows(m, w, n, begin, end);
    });
    double s = 0.0;
    for (double v : partial) s += v;
    return s;
}

double quad_form_sq(const double* m, const double* w, idx n) {
    if (parallel::threads() > 1 && n * n > 1 << 16) return quad_form_sq_parallel(m, w, n);
    return quad_form_sq_serial(m, w, n);
}

namespace {
inline double diameter_rows(const double* coords, idx dim, std::span<const idx> members, idx begin,
                            idx end) {
    double best = 0.0;
    const idx count = static_cast<idx>(members.size());
    for (idx a = begin; a < end; ++a) {
        const double* xa = coords + members[static_cast<std::size_t>(a)] * dim;
        for (idx b = a + 1; b < count; ++b) {
            const double* xb = coords + members[static_cast<std::size_t>(b)] * dim;
            best = std::max(best, sq_dist(xa, xb, dim));
        }
    }
    return best;
}
} // namespace

double max_pairwise_distance_serial(const double* coords, idx dim, std::span<const idx> members) {
    return std::sqrt(diameter_rows(coords, dim, members, 0, static_cast<idx>(members.size())));
}

double max_pairwise_distance_parallel(const double* coords, idx dim, std::span<const idx> members) {
    const int nt = parallel::threads();
    const idx count = static_cast<idx>(members.size());
    vec<double> partial(static_cast<std::size_t>(nt), 0.0);
    split_range(count, nt, [&](int t, idx begin, idx end) {
        partial[static_cast<std::size_t>(t)] = diameter_rows(coords, dim, members, begin, end);
    });
    double best = 0.0;
    for (double v : partial) best = std::max(best, v);
    return std::sqrt(best);
}

double max_pairwise_distance(const double* coords, idx dim, std::span<const idx> members) {
    const idx count = static_cast<idx>(members.size());
    if (parallel::threads() > 1 && count * count > 1 << 16)
        return max_pairwise_distance_parallel(coords, dim, members);
    return max_pairwise_distance_serial(coords, dim, members);
}

namespace {
inline double matrix_diameter_rows(const double* matrix, idx n, std::span<const idx> members,
                                   idx begin, idx end) {
    double best = 0.0;
    const idx count = static_cast<idx>(members.size());
    for (idx a = begin; a < end; ++a) {
        const double* row = matrix + members[static_cast<std::size_t>(a)] * n;
        for (idx b = a + 1; b < count; ++b)
            best = std::max(best, row[members[static_cast<std::size_t>(b)]]);
    }
    return best;
}
} // namespace

double max_pairwise_from_matrix_serial(const double* matrix, idx n, std::span<const idx> members) {
    return matrix_diameter_rows(matrix, n, members, 0, static_cast<idx>(members.size()));
}

double max_pairwise_from_matrix_parallel(const double* matrix, idx n,
                                         std::span<const idx> members) {
    const int nt = parallel::threads();
    const idx count = static_cast<idx>(members.size());
    vec<double> partial(static_cast<std::size_t>(nt), 0.0);
    split_range(count, nt, [&](int t, idx begin, idx end) {
        partial[static_cast<std::size_t>(t)] = matrix_diameter_rows(matrix, n, members, begin, end);
    });
    double best = 0.0;
    for (double v : partial) best = std::max(best, v);
    return best;
}

double max_pairwise_from_matrix(const double* matrix, idx n, std::span<const idx> members) {
    const idx count = static_cast<idx>(members.size());
    if (parallel::threads() > 1 && count * count > 1 << 16)
        return max_pairwise_from_matrix_parallel(matrix, n, members);
    return max_pairwise_from_matrix_serial(matrix, n, members);
}

} // namespace qgw::kernels
