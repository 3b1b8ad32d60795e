#include <gtest/gtest.h>

#include "support.hpp"

using namespace nbclust;

namespace {

MixtureParams two_by_two() {
    MixtureParams p{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
    p.means << 0.9, 0.1, 0.2, 0.8;
    p.weights << 0.5, 0.5;
    return p;
}

/// Two clusters with all-0.9 and all-0.1 profiles.
SyntheticSample separated_pair(std::size_t d, std::size_t n, std::uint64_t seed) {
    MixtureParams p{Eigen::MatrixXd(d, 2), Eigen::VectorXd::Constant(2, 0.5)};
    p.means.col(0).setConstant(0.9);
    p.means.col(1).setConstant(0.1);
    return sample_mixture(p, n, seed);
}

} // namespace

TEST(Assign, SingleComponent) {
    const auto sample = generate_synthetic(5, 1, 20, 1);
    const auto model = assign(sample.truth.params, sample.dataset);
    for (const auto a : model.assignments) {
        EXPECT_EQ(a, 0u);
    }
    EXPECT_EQ(model.cluster_sizes, std::vector<std::size_t>{20});
}

TEST(Assign, SymmetricModelTiesGoToZero) {
    const MixtureParams p{Eigen::MatrixXd::Constant(4, 2, 0.3), Eigen::VectorXd::Constant(2, 0.5)};
    const auto sample = generate_synthetic(4, 2, 50, 2);
    const auto model = assign(p, sample.dataset);
    for (const auto a : model.assignments) {
        EXPECT_EQ(a, 0u);
    }
}

TEST(Assign, SeparatedClustersRecovered) {
    const auto sample = separated_pair(12, 1000, 3);
    const auto model = assign(sample.truth.params, sample.dataset);
    std::size_t agree = 0;
    for (std::size_t n = 0; n < 1000; ++n) {
        agree += model.assignments[n] == sample.truth.labels[n] ? 1 : 0;
    }
    EXPECT_GE(std::max(agree, 1000 - agree), 990u);
}

TEST(Assign, ArgmaxConsistent) {
    const auto sample = generate_synthetic(15, 4, 300, 4);
    const auto init = asvtd(sample.dataset, 4);
    const auto model = assign(init, sample.dataset);
    std::size_t total = 0;
    for (const auto s : model.cluster_sizes) {
        total += s;
    }
    EXPECT_EQ(total, 300u);
    for (std::size_t n = 0; n < 300; ++n) {
        const auto p = posterior(init, sample.dataset.row(n));
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < p.size(); ++j) {
            if (p(j) > p(best)) {
                best = j;
            }
        }
        EXPECT_EQ(model.assignments[n], static_cast<std::size_t>(best));
        EXPECT_LT((model.posteriors.row(static_cast<Eigen::Index>(n)).transpose() - p).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Relevance, FormulaExample) {
    const auto table = relevance(two_by_two(), 0.6);
    EXPECT_NEAR(table.scores(0, 0), 0.6 * std::log(0.9) + 0.4 * std::log(0.9 / 0.5), 1e-12);
    // Marginal of feature 0 is 0.5 * 0.9 + 0.5 * 0.1.
    EXPECT_NEAR(table.scores(0, 1), 0.6 * std::log(0.1) + 0.4 * std::log(0.1 / 0.5), 1e-12);
}

TEST(Relevance, LambdaOneIsFrequencyRanking) {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = oracle::uniform_mixture(25, 4, rng);
        const auto table = relevance(p, 1.0);
        for (Eigen::Index j = 0; j < 4; ++j) {
            for (Eigen::Index i = 0; i < 25; ++i) {
                EXPECT_NEAR(table.scores(i, j), std::log(p.means(i, j)), 1e-12);
            }
            std::vector<std::size_t> by_mean(25);
            std::iota(by_mean.begin(), by_mean.end(), std::size_t{0});
            std::stable_sort(by_mean.begin(), by_mean.end(), [&](std::size_t a, std::size_t b) {
                return p.means(static_cast<Eigen::Index>(a), j) > p.means(static_cast<Eigen::Index>(b), j);
            });
            EXPECT_EQ(table.top_lists[static_cast<std::size_t>(j)], by_mean);
        }
    }
}

TEST(Relevance, FlatFeatureHasZeroLift) {
    MixtureParams p{Eigen::MatrixXd(2, 3), Eigen::VectorXd::Constant(3, 1.0 / 3.0)};
    p.means << 0.4, 0.4, 0.4, 0.1, 0.5, 0.9;
    const auto table = relevance(p, 0.0);
    for (Eigen::Index j = 0; j < 3; ++j) {
        EXPECT_NEAR(table.scores(0, j), 0.0, 1e-15);
    }
    EXPECT_THROW(relevance(p, 1.5), Error);
    EXPECT_THROW(relevance(p, -0.1), Error);
}

TEST(Report, DefaultsAndBruteForceCounts) {
    const auto sample = generate_synthetic(50, 3, 100, 9);
    const auto model = assign(asvtd(sample.dataset, 3), sample.dataset);
    const auto report = build_report(model, sample.dataset);
    ASSERT_EQ(report.frequency_chart.size(), 20u);
    ASSERT_EQ(report.heatmap_columns.size(), 40u);
    EXPECT_EQ(report.heatmap.size(), 100u);

    const Eigen::MatrixXd x = sample.dataset.to_dense();
    for (const auto& row : report.frequency_chart) {
        const auto f = static_cast<Eigen::Index>(row.feature);
        EXPECT_DOUBLE_EQ(row.overall, x.col(f).sum() / 100.0);
        for (std::size_t j = 0; j < 3; ++j) {
            double hits = 0.0;
            double size = 0.0;
            for (std::size_t n = 0; n < 100; ++n) {
                if (model.assignments[n] == j) {
                    size += 1.0;
                    hits += x(static_cast<Eigen::Index>(n), f);
                }
            }
            EXPECT_DOUBLE_EQ(row.per_cluster[j], size == 0.0 ? 0.0 : hits / size);
            EXPECT_GE(row.per_cluster[j], 0.0);
            EXPECT_LE(row.per_cluster[j], 1.0);
        }
    }
    // Chart is ordered by descending frequency, ties by column index.
    for (std::size_t i = 1; i < report.frequency_chart.size(); ++i) {
        const auto& a = report.frequency_chart[i - 1];
        const auto& b = report.frequency_chart[i];
        EXPECT_TRUE(a.overall > b.overall || (a.overall == b.overall && a.feature < b.feature));
    }
    // Heatmap rows partition the dataset, grouped by cluster.
    std::vector<int> seen(100, 0);
    for (std::size_t i = 0; i < report.heatmap.size(); ++i) {
        const auto& h = report.heatmap[i];
        ++seen[h.row];
        EXPECT_EQ(h.cluster, model.assignments[h.row]);
        if (i > 0) {
            EXPECT_GE(h.cluster, report.heatmap[i - 1].cluster);
        }
        for (std::size_t c = 0; c < report.heatmap_columns.size(); ++c) {
            EXPECT_EQ(h.cells[c], x(static_cast<Eigen::Index>(h.row), static_cast<Eigen::Index>(report.heatmap_columns[c])));
        }
    }
    for (const auto s : seen) {
        EXPECT_EQ(s, 1);
    }
}

TEST(Report, SingleClusterMatchesGlobalFrequencies) {
    const auto sample = generate_synthetic(8, 1, 60, 10);
    const auto model = assign(asvtd(sample.dataset, 1), sample.dataset);
    const auto report = build_report(model, sample.dataset, 5, 3);
    ASSERT_EQ(report.frequency_chart.size(), 5u);
    for (const auto& row : report.frequency_chart) {
        EXPECT_DOUBLE_EQ(row.per_cluster[0], row.overall);
    }
    EXPECT_EQ(report.heatmap_columns.size(), 3u);
}

TEST(Report, EmptyClusterColumnIsZero) {
    const auto data = BinaryDataset::from_dense({{1, 1, 0}, {1, 0, 1}, {0, 1, 1}});
    MixtureParams p{Eigen::MatrixXd(3, 2), Eigen::VectorXd(2)};
    p.means.col(0).setConstant(0.6);
    p.means.col(1).setConstant(0.6);
    p.weights << 0.5, 0.5;
    const auto model = assign(p, data); // ties: every row goes to 0
    const auto report = build_report(model, data);
    EXPECT_EQ(report.sizes, (std::vector<std::size_t>{3, 0}));
    EXPECT_EQ(report.frequency_chart.size(), 3u);
    for (const auto& row : report.frequency_chart) {
        EXPECT_EQ(row.per_cluster[1], 0.0);
    }
}

TEST(Report, FrequencyTiesBreakByCode) {
    const auto data = BinaryDataset::from_dense({{0, 1, 1, 1}, {1, 0, 1, 1}});
    EXPECT_EQ(most_frequent_features(data, 4), (std::vector<std::size_t>{2, 3, 0, 1}));
    EXPECT_EQ(most_frequent_features(data, 1), (std::vector<std::size_t>{2}));
    EXPECT_EQ(most_frequent_features(data, 10).size(), 4u);
}

TEST(Ari, Examples) {
    const std::vector<std::size_t> a{0, 0, 1, 1};
    const std::vector<std::size_t> b{1, 1, 0, 0};
    EXPECT_DOUBLE_EQ(adjusted_rand_index(a, b), 1.0);
    EXPECT_DOUBLE_EQ(adjusted_rand_index(a, a), 1.0);
    const std::vector<std::size_t> c{0, 0, 1, 2};
    const std::vector<std::size_t> e{0, 1, 1, 2};
    EXPECT_NEAR(adjusted_rand_index(c, e), oracle::pairwise_ari(c, e), 1e-15);
    // Hand count: no pair is together in both, one together in each; expected 1/6.
    EXPECT_NEAR(adjusted_rand_index(c, e), (0.0 - 1.0 / 6.0) / (1.0 - 1.0 / 6.0), 1e-15);
}

TEST(Ari, Errors) {
    const std::vector<std::size_t> a{0, 1, 0};
    const std::vector<std::size_t> b{0, 1};
    try {
        adjusted_rand_index(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::input);
    }
    const std::vector<std::size_t> one{0};
    EXPECT_THROW(adjusted_rand_index(one, one), Error);
}

TEST(Ari, SymmetricPermutationInvariantAndMatchesPairCounting) {
    Rng rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(40);
        const std::size_t ka = 1 + rng.below(5);
        const std::size_t kb = 1 + rng.below(5);
        std::vector<std::size_t> a(n);
        std::vector<std::size_t> b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.below(ka);
            b[i] = rng.below(kb);
        }
        const double ab = adjusted_rand_index(a, b);
        EXPECT_NEAR(ab, oracle::pairwise_ari(a, b), 1e-12);
        EXPECT_DOUBLE_EQ(ab, adjusted_rand_index(b, a));
        std::vector<std::size_t> relabel{7, 3, 11, 0, 5};
        std::vector<std::size_t> a2(n);
        for (std::size_t i = 0; i < n; ++i) {
            a2[i] = relabel[a[i]];
        }
        EXPECT_NEAR(adjusted_rand_index(a2, b), ab, 1e-12);
        EXPECT_LE(ab, 1.0 + 1e-12);
    }
}

TEST(KMeans, EachRowItsOwnCluster) {
    const auto data = BinaryDataset::from_dense({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}});
    const auto labels = kmeans_baseline(data, 4, 0);
    std::vector<std::size_t> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(KMeans, TwoPointMasses) {
    std::vector<std::vector<int>> rows;
    std::vector<std::size_t> truth;
    for (int i = 0; i < 30; ++i) {
        rows.push_back(i % 3 == 0 ? std::vector<int>{0, 0, 1} : std::vector<int>{1, 1, 0});
        truth.push_back(i % 3 == 0 ? 1 : 0);
    }
    const auto data = BinaryDataset::from_dense(rows);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        EXPECT_DOUBLE_EQ(adjusted_rand_index(kmeans_baseline(data, 2, seed), truth), 1.0);
    }
}

TEST(KMeans, DuplicateRowsStillSeed) {
    const auto data = BinaryDataset::from_dense(std::vector<std::vector<int>>(6, {1, 0}));
    const auto labels = kmeans_baseline(data, 3, 1);
    EXPECT_EQ(labels.size(), 6u);
}

TEST(KMeans, Errors) {
    const auto data = BinaryDataset::from_dense({{1, 0}, {0, 1}});
    try {
        kmeans_baseline(data, 3, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::input);
    }
    EXPECT_THROW(kmeans_baseline(data, 0, 0), Error);
}

TEST(KMeans, SeededReproducible) {
    const auto sample = generate_synthetic(20, 4, 500, 3);
    EXPECT_EQ(kmeans_baseline(sample.dataset, 4, 9), kmeans_baseline(sample.dataset, 4, 9));
}

TEST(Pipeline, DuplicateSplitIsExactlyOne) {
    const auto sample = generate_synthetic(20, 3, 800, 6);
    EXPECT_EQ(stability_check(sample.dataset, duplicate_split(sample.dataset), 3), 1.0);
}

TEST(Pipeline, SeparatedDataIsStable) {
    Rng rng(40);
    MixtureParams p{Eigen::MatrixXd(30, 3), Eigen::VectorXd::Constant(3, 1.0 / 3.0)};
    for (Eigen::Index i = 0; i < 30; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            p.means(i, j) = (i % 3 == j) ? 0.85 : 0.1 + 0.1 * rng.uniform();
        }
    }
    const auto sample = sample_mixture(p, 3000, 41);
    EXPECT_GT(stability_check(sample.dataset, 3, 0.5, 0), 0.9);
}

TEST(Pipeline, PureNoiseAgreesOnlyByChance) {
    double total = 0.0;
    const int seeds = 6;
    for (int s = 0; s < seeds; ++s) {
        const MixtureParams coins{Eigen::MatrixXd::Constant(16, 1, 0.5), Eigen::VectorXd::Ones(1)};
        const auto sample = sample_mixture(coins, 2000, 300 + static_cast<std::uint64_t>(s));
        try {
            total += stability_check(sample.dataset, 4, 0.5, static_cast<std::uint64_t>(s));
        } catch (const Error& e) {
            ASSERT_TRUE(is_numerical(e.kind())) << e.what();
        }
    }
    EXPECT_LT(std::abs(total / seeds), 0.15);
}

TEST(Pipeline, StabilityNeedsIntersection) {
    const auto sample = generate_synthetic(10, 2, 100, 1);
    SplitPair split;
    split.subset_a = {0, 1, 2};
    split.subset_b = {3, 4, 5};
    split.intersection = {};
    EXPECT_THROW(stability_check(sample.dataset, split, 2), Error);
}
