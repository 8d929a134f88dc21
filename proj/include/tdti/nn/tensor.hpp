#pragma once

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "tdti/error.hpp"

namespace tdti::nn {

/// Dense 2-D tensor. Vectors are column tensors; batches are stacked as
/// columns (features x batch).
template <typename Scalar>
using Tensor2 = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Tensor = Tensor2<double>;

template <typename Derived>
std::string shape_string(const Eigen::EigenBase<Derived>& m) {
    return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.derived().array().isFinite().all();
}

/// A named learnable tensor. Gradients are keyed by parameter address, so a
/// Parameter must not move while a tape references it.
template <typename Scalar>
struct BasicParameter {
    std::string name;
    Tensor2<Scalar> value;
};

using Parameter = BasicParameter<double>;

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
template <typename Scalar, typename Rng>
Tensor2<Scalar> scaled_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor2<Scalar> out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = static_cast<Scalar>(dist(rng));
    }
    return out;
}

template <typename Scalar>
void require_shape(const Tensor2<Scalar>& m, Eigen::Index rows, Eigen::Index cols,
                   const std::string& what) {
    if (m.rows() != rows || m.cols() != cols) {
        fail(ErrorKind::Shape, what + ": expected (" + std::to_string(rows) + "x" +
                                   std::to_string(cols) + "), got " + shape_string(m));
    }
}

}  // namespace tdti::nn
