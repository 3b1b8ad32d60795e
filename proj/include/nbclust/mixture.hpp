#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "nbclust/error.hpp"

namespace nbclust {

/// Parameters of a mixture of independent Bernoulli variables.
///
/// `means(i, j)` is P(x_i = 1 | Y = j), a d x k matrix whose columns are the
/// component profiles. `weights(j)` is P(Y = j).
struct MixtureParams {
    Eigen::MatrixXd means;
    Eigen::VectorXd weights;

    std::size_t features() const { return static_cast<std::size_t>(means.rows()); }
    std::size_t components() const { return static_cast<std::size_t>(means.cols()); }

    bool operator==(const MixtureParams& other) const {
        return means.rows() == other.means.rows() && means.cols() == other.means.cols() &&
               weights.size() == other.weights.size() && means == other.means &&
               weights == other.weights;
    }
};

/// Throws a parameter error unless `params` is a well-formed mixture:
/// means in [0,1], weights nonnegative and summing to one within `tol`.
inline void validate(const MixtureParams& params, double tol = 1e-9) {
    if (params.means.cols() == 0 || params.means.rows() == 0) {
        throw Error(ErrorKind::parameter, "mixture has no features or no components");
    }
    if (params.weights.size() != params.means.cols()) {
        throw Error(ErrorKind::parameter, "weights length " + std::to_string(params.weights.size()) +
                                              " does not match component count " +
                                              std::to_string(params.means.cols()));
    }
    if (!params.means.allFinite() || params.means.minCoeff() < 0.0 || params.means.maxCoeff() > 1.0) {
        throw Error(ErrorKind::parameter, "means must lie in [0, 1]");
    }
    if (!params.weights.allFinite() || params.weights.minCoeff() < 0.0 ||
        std::abs(params.weights.sum() - 1.0) > tol) {
        throw Error(ErrorKind::parameter, "weights must be nonnegative and sum to 1");
    }
}

} // namespace nbclust
