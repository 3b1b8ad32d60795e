#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <vector>

#include "nbclust/analysis.hpp"
#include "nbclust/dataset.hpp"
#include "nbclust/pipeline.hpp"

namespace nbclust {

struct GridPoint {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t k = 0;
};

struct BenchmarkRow {
    GridPoint point;
    std::vector<double> tensor_ari; ///< ASVTD + EM, one per seed
    std::vector<double> kmeans_ari;
    std::size_t failures = 0;       ///< seeds where the tensor pipeline threw
    double decomposition_seconds = 0.0; ///< mean over successful seeds
    double em_seconds = 0.0;
};

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

/// Sample standard deviation (0 for fewer than two values).
inline double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) {
        s += (x - m) * (x - m);
    }
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/**
 * Synthetic benchmark at one grid point: for each seed, draw an exponential
 * mixture, cluster it with ASVTD + EM and with k-means, and score both
 * against the generating labels. A failed tensor run scores ARI 0.
 */
inline BenchmarkRow run_benchmark_point(const GridPoint& point, std::size_t seeds, std::uint64_t base_seed = 0,
                                        const PipelineOptions& options = {}) {
    BenchmarkRow row{point, {}, {}, 0, 0.0, 0.0};
    std::size_t timed = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
        const std::uint64_t seed = base_seed + s;
        const auto sample = generate_synthetic(point.d, point.k, point.n, seed);
        const auto& labels = sample.truth.labels;
        try {
            const auto result = run_pipeline(sample.dataset, point.k, options);
            row.tensor_ari.push_back(adjusted_rand_index(labels, result.model.assignments));
            row.decomposition_seconds += result.decomposition_seconds;
            row.em_seconds += result.em_seconds;
            ++timed;
        } catch (const Error& e) {
            if (!is_numerical(e.kind())) {
                throw;
            }
            row.tensor_ari.push_back(0.0);
            ++row.failures;
        }
        row.kmeans_ari.push_back(adjusted_rand_index(labels, kmeans_baseline(sample.dataset, point.k, seed)));
    }
    if (timed > 0) {
        row.decomposition_seconds /= static_cast<double>(timed);
        row.em_seconds /= static_cast<double>(timed);
    }
    return row;
}

inline void write_benchmark_header(std::ostream& out) {
    out << "n,d,k,seeds,asvtd_em_ari_mean,asvtd_em_ari_std,kmeans_ari_mean,kmeans_ari_std,"
           "decomposition_seconds,em_seconds,failures\n";
}

inline void write_benchmark_row(std::ostream& out, const BenchmarkRow& row) {
    char buffer[256];
    std::snprintf(buffer, sizeof buffer, "%zu,%zu,%zu,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu\n", row.point.n,
                  row.point.d, row.point.k, row.tensor_ari.size(), mean_of(row.tensor_ari), stddev_of(row.tensor_ari),
                  mean_of(row.kmeans_ari), stddev_of(row.kmeans_ari), row.decomposition_seconds, row.em_seconds,
                  row.failures);
    out << buffer;
}

} // namespace nbclust
