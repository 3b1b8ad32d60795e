#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nbclust/dataset.hpp"
#include "nbclust/em.hpp"
#include "nbclust/error.hpp"
#include "nbclust/mixture.hpp"
#include "nbclust/random.hpp"

namespace nbclust {

/// Hard clustering of a dataset under a fitted mixture.
struct ClusterModel {
    MixtureParams params;
    std::vector<std::size_t> assignments;
    Eigen::MatrixXd posteriors; ///< N x k
    std::vector<std::size_t> cluster_sizes;
};

/// Assigns each row to argmax_j P(Y = j | x), lowest index on exact ties.
inline ClusterModel assign(const MixtureParams& params, const BinaryDataset& data,
                           double floor = default_prob_floor) {
    if (params.features() != data.cols()) {
        throw Error(ErrorKind::input, "model and dataset disagree on the feature count");
    }
    const LogMassTable table(params, floor);
    const auto k = params.components();
    ClusterModel model{params, std::vector<std::size_t>(data.rows(), 0),
                       Eigen::MatrixXd(static_cast<Eigen::Index>(data.rows()), static_cast<Eigen::Index>(k)),
                       std::vector<std::size_t>(k, 0)};
    Eigen::VectorXd joint;
    for (std::size_t n = 0; n < data.rows(); ++n) {
        table.joint(data.row(n), joint);
        LogMassTable::normalize(joint);
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < joint.size(); ++j) {
            if (joint(j) > joint(best)) {
                best = j;
            }
        }
        model.posteriors.row(static_cast<Eigen::Index>(n)) = joint.transpose();
        model.assignments[n] = static_cast<std::size_t>(best);
        ++model.cluster_sizes[static_cast<std::size_t>(best)];
    }
    return model;
}

// ---------------------------------------------------------------------------
// Relevance

/**
 * @brief Relevance r(i, j) = lambda log mu_ij + (1 - lambda) log(mu_ij / sum_h mu_ih w_h).
 *
 * The first term ranks a feature by its frequency inside the cluster, the
 * second by its lift over the mixture marginal.
 */
struct RelevanceTable {
    double lambda = 0.6;
    Eigen::MatrixXd scores; ///< d x k
    /// top_lists[j]: all features ranked by descending score in cluster j
    /// (ties by feature index).
    std::vector<std::vector<std::size_t>> top_lists;
};

inline constexpr double default_lambda = 0.6;

inline RelevanceTable relevance(const MixtureParams& params, double lambda = default_lambda,
                                double floor = default_prob_floor) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw Error(ErrorKind::parameter, "lambda must lie in [0, 1]");
    }
    const Eigen::MatrixXd mu = params.means.cwiseMax(floor).cwiseMin(1.0 - floor);
    const Eigen::VectorXd marginal = mu * params.weights;
    RelevanceTable table;
    table.lambda = lambda;
    table.scores.resize(mu.rows(), mu.cols());
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
        for (Eigen::Index j = 0; j < mu.cols(); ++j) {
            const double log_mu = std::log(mu(i, j));
            table.scores(i, j) = lambda * log_mu + (1.0 - lambda) * (log_mu - std::log(marginal(i)));
        }
    }
    for (Eigen::Index j = 0; j < mu.cols(); ++j) {
        std::vector<std::size_t> order(static_cast<std::size_t>(mu.rows()));
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return table.scores(static_cast<Eigen::Index>(a), j) > table.scores(static_cast<Eigen::Index>(b), j);
        });
        table.top_lists.push_back(std::move(order));
    }
    return table;
}

// ---------------------------------------------------------------------------
// Reports

struct FrequencyRow {
    std::size_t feature = 0;
    double overall = 0.0;
    std::vector<double> per_cluster; ///< share of each cluster's rows having the feature
};

struct HeatmapRow {
    std::size_t row = 0; ///< index into the dataset
    std::size_t cluster = 0;
    std::vector<std::uint8_t> cells; ///< one per heatmap column
};

struct ClusterReport {
    std::vector<std::size_t> sizes;
    std::vector<FrequencyRow> frequency_chart;
    std::vector<std::size_t> heatmap_columns;
    std::vector<HeatmapRow> heatmap; ///< grouped by cluster, then dataset order
};

/// Features ordered by descending count; equal counts keep vocabulary
/// (lexicographic) order.
inline std::vector<std::size_t> most_frequent_features(const BinaryDataset& data, std::size_t top) {
    const auto counts = data.column_counts();
    std::vector<std::size_t> order(counts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    order.resize(std::min(top, order.size()));
    return order;
}

inline constexpr std::size_t default_top_chart = 20;
inline constexpr std::size_t default_top_heatmap = 40;

inline ClusterReport build_report(const ClusterModel& model, const BinaryDataset& data,
                                  std::size_t top_chart = default_top_chart,
                                  std::size_t top_heatmap = default_top_heatmap) {
    if (model.assignments.size() != data.rows()) {
        throw Error(ErrorKind::input, "model assignments do not match the dataset");
    }
    const std::size_t k = model.params.components();
    ClusterReport report;
    report.sizes = model.cluster_sizes;

    // Per-cluster column counts.
    std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(data.cols(), 0));
    for (std::size_t n = 0; n < data.rows(); ++n) {
        auto& c = counts[model.assignments[n]];
        for (const auto col : data.row(n)) {
            ++c[col];
        }
    }
    const auto totals = data.column_counts();
    for (const auto feature : most_frequent_features(data, top_chart)) {
        FrequencyRow row{feature, static_cast<double>(totals[feature]) / static_cast<double>(data.rows()), {}};
        for (std::size_t j = 0; j < k; ++j) {
            row.per_cluster.push_back(report.sizes[j] == 0 ? 0.0
                                                           : static_cast<double>(counts[j][feature]) /
                                                                 static_cast<double>(report.sizes[j]));
        }
        report.frequency_chart.push_back(std::move(row));
    }

    report.heatmap_columns = most_frequent_features(data, top_heatmap);
    report.heatmap.reserve(data.rows());
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t n = 0; n < data.rows(); ++n) {
            if (model.assignments[n] != j) {
                continue;
            }
            HeatmapRow row{n, j, {}};
            row.cells.reserve(report.heatmap_columns.size());
            for (const auto col : report.heatmap_columns) {
                row.cells.push_back(data.contains(n, col) ? 1 : 0);
            }
            report.heatmap.push_back(std::move(row));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Partition agreement

/// Hubert-Arabie adjusted Rand index from the contingency table.
/// Returns 1 when both partitions are trivial in the same way (the index is
/// 0/0 there).
inline double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::input, "partitions have different lengths");
    }
    if (a.size() < 2) {
        throw Error(ErrorKind::input, "adjusted Rand index needs at least two items");
    }
    std::map<std::pair<std::size_t, std::size_t>, double> cells;
    std::map<std::size_t, double> rows;
    std::map<std::size_t, double> cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cells[{a[i], b[i]}] += 1.0;
        rows[a[i]] += 1.0;
        cols[b[i]] += 1.0;
    }
    const auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& [key, count] : cells) {
        index += pairs(count);
    }
    double sum_a = 0.0;
    for (const auto& [key, count] : rows) {
        sum_a += pairs(count);
    }
    double sum_b = 0.0;
    for (const auto& [key, count] : cols) {
        sum_b += pairs(count);
    }
    const double expected = sum_a * sum_b / pairs(static_cast<double>(a.size()));
    const double maximum = 0.5 * (sum_a + sum_b);
    if (maximum == expected) {
        return 1.0;
    }
    return (index - expected) / (maximum - expected);
}

// ---------------------------------------------------------------------------
// k-means baseline

struct KMeansOptions {
    std::size_t max_iters = 100;
};

/**
 * Lloyd's algorithm on the rows as real vectors, seeded k-means++
 * initialization. Randomized by design; used only as a comparison arm.
 * Squared distances use ||x||^2 - 2 x.c + ||c||^2 over the sparse rows.
 */
inline std::vector<std::size_t> kmeans_baseline(const BinaryDataset& data, std::size_t k, std::uint64_t seed,
                                                KMeansOptions options = {}) {
    const std::size_t n = data.rows();
    if (k < 1 || k > n) {
        throw Error(ErrorKind::input, "k-means needs 1 <= k <= N (k=" + std::to_string(k) +
                                          ", N=" + std::to_string(n) + ")");
    }
    const auto d = static_cast<Eigen::Index>(data.cols());
    const auto kk = static_cast<Eigen::Index>(k);
    Rng rng(seed);

    // Centers stored row-major: centers(j, :) is center j.
    Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(kk, d);
    const auto set_center = [&](Eigen::Index j, std::size_t row) {
        centers.row(j).setZero();
        for (const auto c : data.row(row)) {
            centers(j, c) = 1.0;
        }
    };
    const auto distance = [&](std::size_t row, Eigen::Index j, double center_norm) {
        double dot = 0.0;
        for (const auto c : data.row(row)) {
            dot += centers(j, c);
        }
        return std::max(0.0, static_cast<double>(data.row(row).size()) - 2.0 * dot + center_norm);
    };

    // k-means++ seeding.
    std::vector<bool> chosen(n, false);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::size_t first = static_cast<std::size_t>(rng.below(n));
    set_center(0, first);
    chosen[first] = true;
    for (Eigen::Index j = 1; j < kk; ++j) {
        const double norm = centers.row(j - 1).squaredNorm();
        for (std::size_t r = 0; r < n; ++r) {
            nearest[r] = std::min(nearest[r], distance(r, j - 1, norm));
        }
        std::vector<double> weights(n);
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            weights[r] = chosen[r] ? 0.0 : nearest[r];
            total += weights[r];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            pick = rng.categorical(weights);
        } else {
            // Every unchosen row coincides with a center: pick one uniformly.
            std::vector<std::size_t> free;
            for (std::size_t r = 0; r < n; ++r) {
                if (!chosen[r]) {
                    free.push_back(r);
                }
            }
            pick = free[static_cast<std::size_t>(rng.below(free.size()))];
        }
        set_center(j, pick);
        chosen[pick] = true;
    }

    std::vector<std::size_t> labels(n, 0);
    Eigen::VectorXd norms(kk);
    for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
        for (Eigen::Index j = 0; j < kk; ++j) {
            norms(j) = centers.row(j).squaredNorm();
        }
        bool changed = false;
        for (std::size_t r = 0; r < n; ++r) {
            std::size_t best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < kk; ++j) {
                const double dist = distance(r, j, norms(j));
                if (dist < best_dist) {
                    best_dist = dist;
                    best = static_cast<std::size_t>(j);
                }
            }
            if (labels[r] != best) {
                changed = true;
                labels[r] = best;
            }
        }
        if (!changed && iter > 0) {
            break;
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(kk, d);
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t r = 0; r < n; ++r) {
            ++sizes[labels[r]];
            for (const auto c : data.row(r)) {
                sums(static_cast<Eigen::Index>(labels[r]), c) += 1.0;
            }
        }
        for (Eigen::Index j = 0; j < kk; ++j) {
            if (sizes[static_cast<std::size_t>(j)] > 0) {
                centers.row(j) = sums.row(j) / static_cast<double>(sizes[static_cast<std::size_t>(j)]);
            }
        }
    }
    return labels;
}

} // namespace nbclust
