#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nbclust/dataset.hpp"
#include "nbclust/error.hpp"

namespace nbclust {

/// Empirical first and second moments of a binary sample.
///
/// `m1` holds column means and `m2 = X^T X / N`. Both are computed from
/// integer co-occurrence counts, so `m2` is exactly symmetric and its diagonal
/// is bit-identical to `m1`.
struct MomentSet {
    Eigen::VectorXd m1;
    Eigen::MatrixXd m2;
    std::size_t n = 0;
};

namespace detail {

/// Flips each column so its largest-magnitude entry (first on ties) is positive.
inline void fix_signs(Eigen::MatrixXd& vectors) {
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
            const double a = std::abs(vectors(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (vectors(arg, j) < 0.0) {
            vectors.col(j) = -vectors.col(j);
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues in descending order and
/// deterministic eigenvector signs.
struct SortedEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

inline SortedEigen sorted_eigen(const Eigen::MatrixXd& symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric);
    if (solver.info() != Eigen::Success) {
        throw Error(ErrorKind::rank_deficient, "symmetric eigendecomposition did not converge");
    }
    const Eigen::Index n = symmetric.rows();
    SortedEigen out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
    for (Eigen::Index j = 0; j < n; ++j) {
        out.values(j) = solver.eigenvalues()(n - 1 - j);
        out.vectors.col(j) = solver.eigenvectors().col(n - 1 - j);
    }
    fix_signs(out.vectors);
    return out;
}

} // namespace detail

/// Singular values below this fraction of the largest one count as zero.
inline constexpr double rank_tolerance = 1e-8;

/// Top-k singular factors of a symmetric positive semidefinite matrix.
struct TruncatedBasis {
    Eigen::MatrixXd u_k;
    Eigen::VectorXd s_k;
};

/// For a PSD matrix the SVD coincides with the eigendecomposition, which is
/// what is computed here. Throws rank_infeasible for k > d and rank_deficient
/// when the k-th singular value falls under the tolerance.
inline TruncatedBasis truncated_psd_basis(const Eigen::MatrixXd& m2, std::size_t k) {
    const auto d = static_cast<std::size_t>(m2.rows());
    if (k == 0) {
        throw Error(ErrorKind::parameter, "k must be at least 1");
    }
    if (k > d) {
        throw Error(ErrorKind::rank_infeasible,
                    "k=" + std::to_string(k) + " exceeds feature count d=" + std::to_string(d));
    }
    const auto eig = detail::sorted_eigen(m2);
    const double top = eig.values(0);
    const double cutoff = rank_tolerance * top;
    std::size_t rank = 0;
    while (rank < d && top > 0.0 && eig.values(static_cast<Eigen::Index>(rank)) > cutoff) {
        ++rank;
    }
    if (rank < k) {
        throw Error(ErrorKind::rank_deficient, "second moment has numerical rank " + std::to_string(rank) +
                                                   " < k=" + std::to_string(k) +
                                                   "; achievable rank is " + std::to_string(rank));
    }
    const auto kk = static_cast<Eigen::Index>(k);
    return {eig.vectors.leftCols(kk), eig.values.head(kk)};
}

inline Eigen::VectorXd estimate_m1(const BinaryDataset& data) {
    detail::require_rows(data);
    const auto counts = data.column_counts();
    Eigen::VectorXd m1(static_cast<Eigen::Index>(data.cols()));
    const double n = static_cast<double>(data.rows());
    for (std::size_t j = 0; j < counts.size(); ++j) {
        m1(static_cast<Eigen::Index>(j)) = static_cast<double>(counts[j]) / n;
    }
    return m1;
}

inline MomentSet estimate_m2(const BinaryDataset& data) {
    detail::require_rows(data);
    const auto d = data.cols();
    // Sparse outer products: each row touches nnz(row)^2 / 2 counters.
    std::vector<std::uint64_t> counts(d * d, 0);
    for (std::size_t n = 0; n < data.rows(); ++n) {
        const auto r = data.row(n);
        for (std::size_t a = 0; a < r.size(); ++a) {
            const std::size_t base = static_cast<std::size_t>(r[a]) * d;
            for (std::size_t b = 0; b <= a; ++b) {
                ++counts[base + r[b]];
            }
        }
    }
    MomentSet out;
    out.n = data.rows();
    const double n = static_cast<double>(out.n);
    const auto dd = static_cast<Eigen::Index>(d);
    out.m2.resize(dd, dd);
    out.m1.resize(dd);
    for (Eigen::Index i = 0; i < dd; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = static_cast<double>(counts[static_cast<std::size_t>(i) * d +
                                                        static_cast<std::size_t>(j)]) / n;
            out.m2(i, j) = v;
            out.m2(j, i) = v;
        }
        out.m1(i) = out.m2(i, i);
    }
    return out;
}

/**
 * @brief Whitening of the sample through the top-k factors of M2.
 *
 * `projected` is X * u_k * diag(s_k)^{-1/2}, an N x k matrix. Its weighted
 * Gram matrices are the whitened third-moment slices.
 */
struct WhiteningBasis {
    Eigen::MatrixXd u_k;
    Eigen::VectorXd s_k;
    Eigen::MatrixXd projected;

    /// u_k * diag(s_k)^{-1/2}, the d x k map applied to each row.
    Eigen::MatrixXd whitener() const { return u_k * s_k.cwiseSqrt().cwiseInverse().asDiagonal(); }
};

inline WhiteningBasis whiten(const BinaryDataset& data, const MomentSet& moments, std::size_t k) {
    detail::require_rows(data);
    auto basis = truncated_psd_basis(moments.m2, k);
    WhiteningBasis out{std::move(basis.u_k), std::move(basis.s_k), {}};
    const Eigen::MatrixXd w = out.whitener();
    out.projected = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.rows()), w.cols());
    for (std::size_t n = 0; n < data.rows(); ++n) {
        auto p = out.projected.row(static_cast<Eigen::Index>(n));
        for (const auto c : data.row(n)) {
            p += w.row(c);
        }
    }
    return out;
}

/// Whitened slice H_i of the third moment for one feature.
struct SliceMatrix {
    std::size_t feature = 0;
    Eigen::MatrixXd h;
};

/// H_i = sum over rows with x_i = 1 of p_n p_n^T, divided by N, where p_n are
/// the projected rows. `rows` lists those rows.
inline SliceMatrix slice_from_rows(const WhiteningBasis& basis, std::span<const std::uint32_t> rows,
                                   std::size_t feature) {
    const Eigen::Index k = basis.projected.cols();
    Eigen::MatrixXd gathered(static_cast<Eigen::Index>(rows.size()), k);
    for (std::size_t m = 0; m < rows.size(); ++m) {
        gathered.row(static_cast<Eigen::Index>(m)) = basis.projected.row(rows[m]);
    }
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
    h.selfadjointView<Eigen::Lower>().rankUpdate(gathered.transpose());
    h = h.selfadjointView<Eigen::Lower>();
    h /= static_cast<double>(basis.projected.rows());
    return {feature, std::move(h)};
}

inline SliceMatrix slice(const WhiteningBasis& basis, const ColumnIndex& columns, std::size_t feature) {
    if (feature >= columns.cols()) {
        throw Error(ErrorKind::input, "feature " + std::to_string(feature) + " out of range");
    }
    return slice_from_rows(basis, columns.rows_of(feature), feature);
}

/// Single-feature form; scans the rows. Use ColumnIndex when slicing many features.
inline SliceMatrix slice(const WhiteningBasis& basis, const BinaryDataset& data, std::size_t feature) {
    if (feature >= data.cols()) {
        throw Error(ErrorKind::input, "feature " + std::to_string(feature) + " out of range");
    }
    std::vector<std::uint32_t> rows;
    for (std::size_t n = 0; n < data.rows(); ++n) {
        if (data.contains(n, feature)) {
            rows.push_back(static_cast<std::uint32_t>(n));
        }
    }
    return slice_from_rows(basis, rows, feature);
}

/// Bernoulli bounds on the diagonal bias of the biased moment estimators.
struct BiasBound {
    std::size_t feature = 0;
    double second_order = 0.0;     ///< bound on |(M2)_ii - (M2~)_ii|: m1 - m1^2
    double third_order_diag = 0.0; ///< bound on |(M3)_iii - (M3~)_iii|: m1 - m1^3
};

inline std::vector<BiasBound> bias_bounds(const MomentSet& moments) {
    std::vector<BiasBound> bounds;
    bounds.reserve(static_cast<std::size_t>(moments.m1.size()));
    for (Eigen::Index i = 0; i < moments.m1.size(); ++i) {
        const double m = moments.m1(i);
        bounds.push_back({static_cast<std::size_t>(i), std::max(0.0, m - m * m), std::max(0.0, m - m * m * m)});
    }
    return bounds;
}

/// Bound on |(M3)_iil - (M3~)_iil| for i != l. For Bernoulli features
/// E(x_i^2 x_l) = (M2)_il, giving (M2)_il - (M2)_il^2 / (M1)_l.
inline double mixed_third_order_bound(const MomentSet& moments, std::size_t i, std::size_t l) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto ll = static_cast<Eigen::Index>(l);
    const double m1 = moments.m1(ll);
    if (m1 <= 0.0) {
        return 0.0;
    }
    const double m2 = moments.m2(ii, ll);
    return std::max(0.0, m2 - m2 * m2 / m1);
}

} // namespace nbclust
