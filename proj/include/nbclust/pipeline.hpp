#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <future>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "nbclust/analysis.hpp"
#include "nbclust/dataset.hpp"
#include "nbclust/decomposition.hpp"
#include "nbclust/em.hpp"

namespace nbclust {

struct PipelineOptions {
    EmConfig em;
};

struct PipelineResult {
    Decomposition decomposition; ///< ASVTD output, before EM
    EmResult em;
    ClusterModel model;
    double decomposition_seconds = 0.0;
    double em_seconds = 0.0;
};

/// Moments and ASVTD, EM refinement, then posterior-argmax clustering.
inline PipelineResult run_pipeline(const BinaryDataset& data, std::size_t k, const PipelineOptions& options = {}) {
    using clock = std::chrono::steady_clock;
    PipelineResult result;
    const auto t0 = clock::now();
    result.decomposition = asvtd_detailed(data, k);
    const auto t1 = clock::now();
    result.em = em_refine(data, result.decomposition.params, options.em);
    const auto t2 = clock::now();
    result.model = assign(result.em.params, data, options.em.prob_floor);
    result.decomposition_seconds = std::chrono::duration<double>(t1 - t0).count();
    result.em_seconds = std::chrono::duration<double>(t2 - t1).count();
    return result;
}

/// Clusters both halves of `split` independently and compares the two
/// labelings on the shared rows with the adjusted Rand index.
inline double stability_check(const BinaryDataset& data, const SplitPair& split, std::size_t k,
                              const PipelineOptions& options = {}) {
    if (split.intersection.size() < 2) {
        throw Error(ErrorKind::parameter, "split intersection needs at least two rows");
    }
    const auto arm = [&](const std::vector<std::size_t>& rows) {
        const BinaryDataset part = data.subset(rows);
        auto labels = run_pipeline(part, k, options).model.assignments;
        std::unordered_map<std::size_t, std::size_t> position;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            position.emplace(rows[i], i);
        }
        std::vector<std::size_t> shared;
        shared.reserve(split.intersection.size());
        for (const auto r : split.intersection) {
            const auto it = position.find(r);
            if (it == position.end()) {
                throw Error(ErrorKind::parameter, "intersection row missing from a subset");
            }
            shared.push_back(labels[it->second]);
        }
        return shared;
    };
    auto first = std::async(std::launch::async, arm, std::cref(split.subset_a));
    const auto second = arm(split.subset_b);
    const auto labels_a = first.get();
    return adjusted_rand_index(labels_a, second);
}

inline double stability_check(const BinaryDataset& data, std::size_t k, double overlap, std::uint64_t seed,
                              const PipelineOptions& options = {}) {
    return stability_check(data, overlapping_split(data, overlap, seed), k, options);
}

/// Split whose subsets are both the full dataset; the deterministic pipeline
/// must then agree with itself exactly.
inline SplitPair duplicate_split(const BinaryDataset& data) {
    SplitPair split;
    split.intersection.resize(data.rows());
    std::iota(split.intersection.begin(), split.intersection.end(), std::size_t{0});
    split.subset_a = split.intersection;
    split.subset_b = split.intersection;
    return split;
}

} // namespace nbclust
