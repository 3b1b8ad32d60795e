#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nbclust/dataset.hpp"
#include "nbclust/error.hpp"
#include "nbclust/mixture.hpp"
#include "nbclust/moments.hpp"

namespace nbclust {

/// Dense symmetric d x d x d tensor, row-major in (i, j, l).
///
/// Only used where the third moment is small enough to hold explicitly; the
/// production path (asvtd) never builds one.
class Tensor3 {
  public:
    explicit Tensor3(std::size_t dim) : dim_(dim), data_(dim * dim * dim, 0.0) {}

    std::size_t dim() const { return dim_; }

    double& operator()(std::size_t i, std::size_t j, std::size_t l) { return data_[(i * dim_ + j) * dim_ + l]; }
    double operator()(std::size_t i, std::size_t j, std::size_t l) const {
        return data_[(i * dim_ + j) * dim_ + l];
    }

    /// The d x d matrix T(r, :, :).
    Eigen::MatrixXd slice(std::size_t r) const {
        const auto d = static_cast<Eigen::Index>(dim_);
        return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            data_.data() + r * dim_ * dim_, d, d);
    }

  private:
    std::size_t dim_;
    std::vector<double> data_;
};

/// Feature whose slice gives the shared diagonalizer.
struct AnchorChoice {
    std::size_t feature = 0;
    /// Minimum distance between the eigenvalues of the anchor slice
    /// (+inf when k = 1). Small values signal an ill-conditioned rotation.
    double gap = std::numeric_limits<double>::infinity();
    /// Orthonormal eigenvectors of the anchor slice, columns ordered by
    /// descending eigenvalue.
    Eigen::MatrixXd rotation;
};

/// Minimum pairwise distance between eigenvalues sorted in descending order.
inline double min_eigen_gap(const Eigen::VectorXd& descending) {
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 1; j < descending.size(); ++j) {
        gap = std::min(gap, descending(j - 1) - descending(j));
    }
    return gap;
}

/**
 * @brief Streaming anchor selection over per-feature slices.
 *
 * Slices are symmetric, so their singular structure is read off a symmetric
 * eigendecomposition. The candidate with the largest minimum eigenvalue gap
 * wins; since only a strictly larger gap replaces the incumbent, ties go to
 * the lowest feature index when slices are offered in feature order.
 */
class AnchorSearch {
  public:
    /// Relative size below which an eigenvalue gap counts as round-off.
    static constexpr double coincidence_tolerance = 1e-12;

    void offer(const SliceMatrix& candidate) {
        const auto eig = detail::sorted_eigen(candidate.h);
        double gap = min_eigen_gap(eig.values);
        // Coincident eigenvalues come back split by round-off; read those gaps as zero.
        const double scale = eig.values.size() > 0 ? eig.values.cwiseAbs().maxCoeff() : 0.0;
        if (gap <= coincidence_tolerance * scale) {
            gap = 0.0;
        }
        if (!seen_ || gap > best_.gap) {
            best_.feature = candidate.feature;
            best_.gap = gap;
            best_.rotation = eig.vectors;
            seen_ = true;
        }
    }

    /// Throws anchor_not_found if nothing was offered or every gap is zero.
    AnchorChoice result() const {
        if (!seen_) {
            throw Error(ErrorKind::anchor_not_found, "no slices offered");
        }
        if (!(best_.gap > 0.0)) {
            throw Error(ErrorKind::anchor_not_found,
                        "no feature has distinct slice eigenvalues; no row of the mean matrix separates all components");
        }
        return best_;
    }

  private:
    AnchorChoice best_{0, -std::numeric_limits<double>::infinity(), {}};
    bool seen_ = false;
};

inline AnchorChoice select_anchor(std::span<const SliceMatrix> slices) {
    AnchorSearch search;
    for (const auto& s : slices) {
        search.offer(s);
    }
    return search.result();
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
inline Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<double> sorted(v.data(), v.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        cumulative += sorted[static_cast<std::size_t>(j)];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (sorted[static_cast<std::size_t>(j)] - candidate > 0.0) {
            theta = candidate;
        }
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

/// Mixing weights from M1 = M w: least squares, then simplex projection.
inline Eigen::VectorXd recover_weights(const Eigen::MatrixXd& means, const Eigen::VectorXd& m1) {
    if (means.rows() != m1.size()) {
        throw Error(ErrorKind::input, "means and m1 disagree on the feature count");
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(means);
    qr.setThreshold(rank_tolerance);
    if (qr.rank() < means.cols()) {
        throw Error(ErrorKind::rank_deficient, "recovered means have rank " + std::to_string(qr.rank()) +
                                                   " < k=" + std::to_string(means.cols()));
    }
    return project_to_simplex(qr.solve(m1));
}

struct Decomposition {
    MixtureParams params;
    AnchorChoice anchor;
};

namespace detail {

inline Decomposition single_component(const Eigen::VectorXd& m1) {
    Decomposition out;
    out.params.means = m1.cwiseMax(0.0).cwiseMin(1.0);
    out.params.weights = Eigen::VectorXd::Ones(1);
    out.anchor.rotation = Eigen::MatrixXd::Identity(1, 1);
    return out;
}

/// Shared tail of SVTD and ASVTD: pick the anchor, read every row of M off
/// the diagonal of O^T H_i O, solve for the weights, clip to [0, 1].
/// `slice_at(i)` must return the whitened slice of feature i.
template <typename SliceFn>
Decomposition diagonalize_slices(std::size_t d, const Eigen::VectorXd& m1, SliceFn&& slice_at) {
    AnchorSearch search;
    for (std::size_t i = 0; i < d; ++i) {
        search.offer(slice_at(i));
    }
    Decomposition out;
    out.anchor = search.result();
    const Eigen::MatrixXd& rotation = out.anchor.rotation;
    const Eigen::Index k = rotation.cols();
    Eigen::MatrixXd means(static_cast<Eigen::Index>(d), k);
    for (std::size_t i = 0; i < d; ++i) {
        const SliceMatrix s = slice_at(i);
        means.row(static_cast<Eigen::Index>(i)) = (rotation.transpose() * s.h * rotation).diagonal().transpose();
    }
    out.params.weights = recover_weights(means, m1);
    out.params.means = means.cwiseMax(0.0).cwiseMin(1.0);
    return out;
}

} // namespace detail

/**
 * Reference decomposition over explicit moments: whitening by the top-k
 * factors of m2, slices H_i = E^+ M3_i E^+^T, shared diagonalizer from the
 * best-separated slice.
 */
inline Decomposition svtd_exact_detailed(const Eigen::VectorXd& m1, const Eigen::MatrixXd& m2, const Tensor3& m3,
                                         std::size_t k) {
    const auto d = static_cast<std::size_t>(m1.size());
    if (static_cast<std::size_t>(m2.rows()) != d || m3.dim() != d) {
        throw Error(ErrorKind::input, "moment dimensions disagree");
    }
    if (k > d) {
        throw Error(ErrorKind::rank_infeasible,
                    "k=" + std::to_string(k) + " exceeds feature count d=" + std::to_string(d));
    }
    if (k == 1) {
        return detail::single_component(m1);
    }
    const auto basis = truncated_psd_basis(m2, k);
    const Eigen::MatrixXd w = basis.u_k * basis.s_k.cwiseSqrt().cwiseInverse().asDiagonal();
    return detail::diagonalize_slices(d, m1, [&](std::size_t i) {
        Eigen::MatrixXd h = w.transpose() * m3.slice(i) * w;
        return SliceMatrix{i, 0.5 * (h + h.transpose())};
    });
}

inline MixtureParams svtd_exact(const Eigen::VectorXd& m1, const Eigen::MatrixXd& m2, const Tensor3& m3,
                                std::size_t k) {
    return svtd_exact_detailed(m1, m2, m3, k).params;
}

/**
 * Approximate decomposition straight from the sample.
 *
 * Uses the biased estimators X^T X / N and sum_n x_n (x) x_n (x) x_n / N but
 * never forms the third-order tensor: each slice is the Gram matrix of the
 * whitened rows that have the feature set, so a slice costs O(count_i k^2).
 */
inline Decomposition asvtd_detailed(const BinaryDataset& data, std::size_t k) {
    detail::require_rows(data);
    if (k == 0) {
        throw Error(ErrorKind::parameter, "k must be at least 1");
    }
    if (k > data.cols()) {
        throw Error(ErrorKind::rank_infeasible,
                    "k=" + std::to_string(k) + " exceeds feature count d=" + std::to_string(data.cols()));
    }
    const MomentSet moments = estimate_m2(data);
    if (k == 1) {
        return detail::single_component(moments.m1);
    }
    const WhiteningBasis basis = whiten(data, moments, k);
    const ColumnIndex columns(data);
    return detail::diagonalize_slices(data.cols(), moments.m1,
                                      [&](std::size_t i) { return slice(basis, columns, i); });
}

inline MixtureParams asvtd(const BinaryDataset& data, std::size_t k) { return asvtd_detailed(data, k).params; }

} // namespace nbclust
