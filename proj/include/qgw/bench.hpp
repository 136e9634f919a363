#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qgw/mm_space.hpp"

namespace qgw::bench {

/// Planar blob cloud: `clusters` isotropic Gaussian clusters of unit spread
/// whose centers are drawn iid uniform in a square of the given side; point
/// counts split as evenly as possible across clusters.
vec<double> make_blobs(idx n, std::uint64_t seed, int clusters = 3, double side = 10.0,
                       double spread = 1.0);

struct BenchRow {
    idx n = 0;
    std::string method;
    double loss = 0.0;
    double relative_error = 0.0;
    bool has_relative_error = false;
    double seconds = 0.0;
    long long peak_values = 0;
};

struct BenchOptions {
    std::vector<idx> sizes;
    std::vector<double> fracs{0.5};
    int trials = 1;
    std::uint64_t seed = 0;
};

/// Relative-error protocol: independent blob pairs per trial, a full
/// reference solve on the dense matrices, and quantized matchings at each
/// sampling fraction. Emits one "gw" row per pair plus one row per fraction.
std::vector<BenchRow> run_relerr_suite(const BenchOptions& options);

/// Wall-time and working-set scan with m = ceil(N^(1/3)); raises if any
/// single tracked allocation reaches N * N values.
std::vector<BenchRow> run_scaling_suite(const BenchOptions& options);

/// Header plus one line per row; the relative_error field stays empty for
/// rows where it is undefined.
std::string to_csv(const std::vector<BenchRow>& rows);

} // namespace qgw::bench
