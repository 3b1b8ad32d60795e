#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nbclust/dataset.hpp"
#include "nbclust/error.hpp"
#include "nbclust/mixture.hpp"

namespace nbclust {

struct EmConfig {
    /// Stop when the Euclidean change of the weights drops below this.
    double omega_tol = 0.01;
    std::size_t max_iters = 500;
    /// Means are kept in [prob_floor, 1 - prob_floor].
    double prob_floor = 1e-6;
};

inline void validate(const EmConfig& config) {
    if (!(config.omega_tol >= 0.0)) {
        throw Error(ErrorKind::parameter, "omega_tol must be nonnegative");
    }
    if (config.max_iters < 1) {
        throw Error(ErrorKind::parameter, "max_iters must be at least 1");
    }
    if (!(config.prob_floor > 0.0 && config.prob_floor < 0.5)) {
        throw Error(ErrorKind::parameter, "prob_floor must lie in (0, 0.5)");
    }
}

struct EmTrace {
    std::size_t iterations = 0;
    /// loglik[0] is the (floored) initial model; loglik[t] follows the t-th M-step.
    std::vector<double> loglik;
    /// ||w_t - w_{t-1}||_2 for each iteration t.
    std::vector<double> omega_delta;
    bool converged = false;
};

/// Default floor applied to means when evaluating the likelihood.
inline constexpr double default_prob_floor = 1e-6;

/**
 * @brief Per-component log tables for sparse evaluation of the Bernoulli
 * likelihood.
 *
 * log P(x, Y=j) = log w_j + sum_i log(1 - mu_ij) + sum_{i: x_i = 1} [log mu_ij - log(1 - mu_ij)],
 * so a row costs O(nnz(row) * k) once the first two terms are tabulated.
 */
class LogMassTable {
  public:
    LogMassTable(const MixtureParams& params, double floor) {
        const Eigen::ArrayXXd mu = params.means.array().cwiseMax(floor).cwiseMin(1.0 - floor);
        const Eigen::ArrayXXd log_off = (1.0 - mu).log();
        // Row-major so a feature's k deltas are contiguous.
        delta_ = (mu.log() - log_off).matrix();
        base_ = log_off.colwise().sum().transpose().matrix();
        for (Eigen::Index j = 0; j < base_.size(); ++j) {
            const double w = params.weights(j);
            base_(j) += w > 0.0 ? std::log(w) : -std::numeric_limits<double>::infinity();
        }
    }

    std::size_t components() const { return static_cast<std::size_t>(base_.size()); }

    /// Joint log masses log P(x, Y=j) for a row given by its active columns.
    void joint(std::span<const std::uint32_t> active, Eigen::VectorXd& out) const {
        out = base_;
        for (const auto c : active) {
            out += delta_.row(c).transpose();
        }
    }

    /// Normalizes `joint` in place into posteriors; returns log P(x).
    static double normalize(Eigen::VectorXd& joint) {
        const double top = joint.maxCoeff();
        joint = (joint.array() - top).exp().matrix();
        const double total = joint.sum();
        joint /= total;
        return top + std::log(total);
    }

  private:
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> delta_;
    Eigen::VectorXd base_;
};

/// P(Y = j | x) for one row given by its active columns, computed in the log
/// domain with max-subtraction.
inline Eigen::VectorXd posterior(const MixtureParams& params, std::span<const std::uint32_t> active,
                                 double floor = default_prob_floor) {
    for (const auto c : active) {
        if (c >= params.features()) {
            throw Error(ErrorKind::input, "active column out of range");
        }
    }
    const LogMassTable table(params, floor);
    Eigen::VectorXd out;
    table.joint(active, out);
    LogMassTable::normalize(out);
    return out;
}

/// Dense-row form: entry i nonzero means x_i = 1.
inline Eigen::VectorXd posterior_dense(const MixtureParams& params, std::span<const int> row,
                                       double floor = default_prob_floor) {
    if (row.size() != params.features()) {
        throw Error(ErrorKind::input, "row length does not match the feature count");
    }
    std::vector<std::uint32_t> active;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i] != 0) {
            active.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return posterior(params, active, floor);
}

inline double log_likelihood(const MixtureParams& params, const BinaryDataset& data,
                             double floor = default_prob_floor) {
    if (params.features() != data.cols()) {
        throw Error(ErrorKind::input, "model and dataset disagree on the feature count");
    }
    const LogMassTable table(params, floor);
    Eigen::VectorXd joint;
    double total = 0.0;
    for (std::size_t n = 0; n < data.rows(); ++n) {
        table.joint(data.row(n), joint);
        total += LogMassTable::normalize(joint);
    }
    return total;
}

struct EmResult {
    MixtureParams params;
    EmTrace trace;
};

/**
 * Expectation-Maximization for the Bernoulli mixture, started from `init`.
 *
 * Each iteration runs an E-step over all rows and an M-step
 * (means = posterior-weighted column averages, weights = mean posteriors),
 * then stops once ||w_new - w_old||_2 < omega_tol or after max_iters.
 * A component with no posterior mass keeps its previous profile and gets
 * weight prob_floor before renormalization.
 */
inline EmResult em_refine(const BinaryDataset& data, const MixtureParams& init, const EmConfig& config = {}) {
    detail::require_rows(data);
    validate(config);
    validate(init, 1e-6);
    if (init.features() != data.cols()) {
        throw Error(ErrorKind::input, "initial model and dataset disagree on the feature count");
    }
    const double eps = config.prob_floor;
    const auto d = static_cast<Eigen::Index>(data.cols());
    const auto k = static_cast<Eigen::Index>(init.components());
    const double n = static_cast<double>(data.rows());

    EmResult result;
    MixtureParams& current = result.params;
    current.means = init.means.cwiseMax(eps).cwiseMin(1.0 - eps);
    current.weights = init.weights.cwiseMax(eps);
    current.weights /= current.weights.sum();

    EmTrace& trace = result.trace;
    Eigen::VectorXd joint;
    Eigen::MatrixXd weighted(d, k);
    Eigen::VectorXd mass(k);

    for (std::size_t t = 0; t < config.max_iters; ++t) {
        // E-step, accumulating the sufficient statistics in row order.
        const LogMassTable table(current, eps);
        weighted.setZero();
        mass.setZero();
        double loglik = 0.0;
        for (std::size_t r = 0; r < data.rows(); ++r) {
            const auto active = data.row(r);
            table.joint(active, joint);
            loglik += LogMassTable::normalize(joint);
            mass += joint;
            for (const auto c : active) {
                weighted.row(c) += joint.transpose();
            }
        }
        trace.loglik.push_back(loglik);

        // M-step.
        MixtureParams next = current;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (mass(j) < 1e-12) {
                next.weights(j) = eps;
                continue;
            }
            next.means.col(j) = (weighted.col(j) / mass(j)).cwiseMax(eps).cwiseMin(1.0 - eps);
            next.weights(j) = mass(j) / n;
        }
        next.weights /= next.weights.sum();

        const double delta = (next.weights - current.weights).norm();
        current = std::move(next);
        ++trace.iterations;
        trace.omega_delta.push_back(delta);
        if (delta < config.omega_tol) {
            trace.converged = true;
            break;
        }
    }
    trace.loglik.push_back(log_likelihood(current, data, eps));
    return result;
}

} // namespace nbclust
