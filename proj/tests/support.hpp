#pragma once

// Independent reference computations used only by the tests. Everything here
// works on dense matrices with straightforward loops so it shares no code path
// with the sparse library routines it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "nbclust.hpp"

namespace oracle {

using nbclust::BinaryDataset;
using nbclust::MixtureParams;
using nbclust::Tensor3;

/// Population moments of a Bernoulli mixture written as the model
/// expressions: sum_j w_j mu_j, sum_j w_j mu_j mu_j^T, sum_j w_j mu_j^(x3).
inline Eigen::VectorXd model_m1(const MixtureParams& p) { return p.means * p.weights; }

inline Eigen::MatrixXd model_m2(const MixtureParams& p) {
    const auto d = p.means.rows();
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index j = 0; j < p.means.cols(); ++j) {
        for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index b = 0; b < d; ++b) {
                m2(a, b) += p.weights(j) * p.means(a, j) * p.means(b, j);
            }
        }
    }
    return m2;
}

inline Tensor3 model_m3(const MixtureParams& p) {
    const auto d = static_cast<std::size_t>(p.means.rows());
    Tensor3 t(d);
    for (Eigen::Index j = 0; j < p.means.cols(); ++j) {
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) {
                for (std::size_t c = 0; c < d; ++c) {
                    t(a, b, c) += p.weights(j) * p.means(static_cast<Eigen::Index>(a), j) *
                                  p.means(static_cast<Eigen::Index>(b), j) * p.means(static_cast<Eigen::Index>(c), j);
                }
            }
        }
    }
    return t;
}

/// Expectations of the biased sample estimators under the model: entries
/// with repeated indices collapse because x^2 = x for binary features.
inline double expected_power_moment(const MixtureParams& p, std::vector<std::size_t> idx) {
    std::sort(idx.begin(), idx.end());
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    double total = 0.0;
    for (Eigen::Index j = 0; j < p.means.cols(); ++j) {
        double prod = p.weights(j);
        for (const auto i : idx) {
            prod *= p.means(static_cast<Eigen::Index>(i), j);
        }
        total += prod;
    }
    return total;
}

/// Dense X^T X / N.
inline Eigen::MatrixXd empirical_m2(const BinaryDataset& data) {
    const Eigen::MatrixXd x = data.to_dense();
    return x.transpose() * x / static_cast<double>(data.rows());
}

inline Eigen::VectorXd empirical_m1(const BinaryDataset& data) {
    const Eigen::MatrixXd x = data.to_dense();
    return x.colwise().sum().transpose() / static_cast<double>(data.rows());
}

/// Brute-force sum_n x_n (x) x_n (x) x_n / N over all d^3 entries.
inline Tensor3 empirical_m3(const BinaryDataset& data) {
    const Eigen::MatrixXd x = data.to_dense();
    const auto d = static_cast<std::size_t>(x.cols());
    Tensor3 t(d);
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = x(n, static_cast<Eigen::Index>(a));
            if (xa == 0.0) {
                continue;
            }
            for (std::size_t b = 0; b < d; ++b) {
                const double xb = x(n, static_cast<Eigen::Index>(b));
                for (std::size_t c = 0; c < d; ++c) {
                    t(a, b, c) += xa * xb * x(n, static_cast<Eigen::Index>(c));
                }
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(x.rows());
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < d; ++b) {
            for (std::size_t c = 0; c < d; ++c) {
                t(a, b, c) *= inv;
            }
        }
    }
    return t;
}

/// Column permutation of `estimate` minimizing the max-abs distance to
/// `truth` over all k! orders. perm[j] is the estimate column matched to truth column j.
struct Matching {
    std::vector<std::size_t> perm;
    double max_abs = std::numeric_limits<double>::infinity();
};

inline Matching match_columns(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
    const auto k = static_cast<std::size_t>(truth.cols());
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Matching best;
    do {
        double err = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            err = std::max(err, (estimate.col(static_cast<Eigen::Index>(perm[j])) - truth.col(static_cast<Eigen::Index>(j)))
                                    .cwiseAbs()
                                    .maxCoeff());
        }
        if (err < best.max_abs) {
            best = {perm, err};
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Max-abs error over means and weights after the best column matching.
inline double parameter_error(const MixtureParams& estimate, const MixtureParams& truth) {
    const auto m = match_columns(estimate.means, truth.means);
    double err = m.max_abs;
    for (std::size_t j = 0; j < m.perm.size(); ++j) {
        err = std::max(err, std::abs(estimate.weights(static_cast<Eigen::Index>(m.perm[j])) -
                                     truth.weights(static_cast<Eigen::Index>(j))));
    }
    return err;
}

/// Rand-family agreement by explicit pair enumeration.
inline double pairwise_ari(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    const std::size_t n = a.size();
    double both = 0.0;
    double in_a = 0.0;
    double in_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool sa = a[i] == a[j];
            const bool sb = b[i] == b[j];
            both += (sa && sb) ? 1.0 : 0.0;
            in_a += sa ? 1.0 : 0.0;
            in_b += sb ? 1.0 : 0.0;
        }
    }
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    const double expected = in_a * in_b / pairs;
    const double maximum = 0.5 * (in_a + in_b);
    if (maximum == expected) {
        return 1.0;
    }
    return (both - expected) / (maximum - expected);
}

/// Posterior by direct products of Bernoulli probabilities.
inline Eigen::VectorXd direct_posterior(const MixtureParams& p, const std::vector<int>& x) {
    Eigen::VectorXd joint(p.means.cols());
    for (Eigen::Index j = 0; j < p.means.cols(); ++j) {
        double prod = p.weights(j);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double mu = p.means(static_cast<Eigen::Index>(i), j);
            prod *= x[i] != 0 ? mu : 1.0 - mu;
        }
        joint(j) = prod;
    }
    return joint / joint.sum();
}

/// One dense EM step with no flooring, for comparison on interior models.
inline MixtureParams dense_em_step(const MixtureParams& p, const BinaryDataset& data) {
    const Eigen::MatrixXd x = data.to_dense();
    const auto n = x.rows();
    const auto k = p.means.cols();
    Eigen::MatrixXd resp(n, k);
    for (Eigen::Index r = 0; r < n; ++r) {
        std::vector<int> row(static_cast<std::size_t>(x.cols()));
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            row[static_cast<std::size_t>(i)] = x(r, i) != 0.0 ? 1 : 0;
        }
        resp.row(r) = direct_posterior(p, row).transpose();
    }
    MixtureParams next;
    const Eigen::VectorXd mass = resp.colwise().sum().transpose();
    next.weights = mass / static_cast<double>(n);
    next.means = x.transpose() * resp;
    for (Eigen::Index j = 0; j < k; ++j) {
        next.means.col(j) /= mass(j);
    }
    return next;
}

inline double dense_log_likelihood(const MixtureParams& p, const BinaryDataset& data) {
    const Eigen::MatrixXd x = data.to_dense();
    double total = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double mix = 0.0;
        for (Eigen::Index j = 0; j < p.means.cols(); ++j) {
            double prod = p.weights(j);
            for (Eigen::Index i = 0; i < x.cols(); ++i) {
                prod *= x(r, i) != 0.0 ? p.means(i, j) : 1.0 - p.means(i, j);
            }
            mix += prod;
        }
        total += std::log(mix);
    }
    return total;
}

/// Random mixture with means uniform on [lo, hi] and weights at least `min_weight`.
inline MixtureParams uniform_mixture(std::size_t d, std::size_t k, nbclust::Rng& rng, double lo = 0.05,
                                     double hi = 0.95, double min_weight = 0.1) {
    MixtureParams p{Eigen::MatrixXd(d, k), Eigen::VectorXd(k)};
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            p.means(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = lo + (hi - lo) * rng.uniform();
        }
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        p.weights(static_cast<Eigen::Index>(j)) = rng.exponential();
        total += p.weights(static_cast<Eigen::Index>(j));
    }
    const double free_mass = 1.0 - min_weight * static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j) {
        p.weights(static_cast<Eigen::Index>(j)) = min_weight + free_mass * p.weights(static_cast<Eigen::Index>(j)) / total;
    }
    return p;
}

/// Labels relabeled by first appearance, for comparing partitions up to renaming.
inline std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& labels) {
    std::vector<std::size_t> out(labels.size());
    std::vector<std::size_t> seen;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = std::find(seen.begin(), seen.end(), labels[i]);
        if (it == seen.end()) {
            seen.push_back(labels[i]);
            out[i] = seen.size() - 1;
        } else {
            out[i] = static_cast<std::size_t>(it - seen.begin());
        }
    }
    return out;
}

} // namespace oracle
