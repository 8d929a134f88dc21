#pragma once

#include <string>
#include <string_view>

#include "tdti/nn/tape.hpp"

namespace tdti::nn {

enum class Activation { Identity, Relu, Sigmoid, Tanh };

constexpr std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "?";
}

template <typename Scalar>
struct BasicDenseLayer {
    BasicParameter<Scalar> weight;  // out x in
    BasicParameter<Scalar> bias;    // out x 1
    Activation activation = Activation::Identity;

    BasicDenseLayer() = default;

    BasicDenseLayer(const std::string& name, Eigen::Index in, Eigen::Index out, Activation act)
        : weight{name + ".weight", Tensor2<Scalar>::Zero(out, in)},
          bias{name + ".bias", Tensor2<Scalar>::Zero(out, 1)},
          activation(act) {}

    Eigen::Index in_dim() const { return weight.value.cols(); }
    Eigen::Index out_dim() const { return weight.value.rows(); }

    template <typename Rng>
    void init_scaled_uniform(Rng& rng) {
        weight.value = scaled_uniform<Scalar>(out_dim(), in_dim(), rng);
        bias.value.setZero();
    }
};

using DenseLayer = BasicDenseLayer<double>;

template <typename Scalar>
BasicVar<Scalar> activate(BasicVar<Scalar> x, Activation a) {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Relu: return relu(x);
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Tanh: return tanh(x);
    }
    return x;
}

/// activation(W x + b) with x laid out as (in x batch).
template <typename Scalar>
BasicVar<Scalar> dense_forward(BasicDenseLayer<Scalar>& layer, BasicVar<Scalar> x) {
    if (x.rows() != layer.in_dim()) {
        fail(ErrorKind::Shape, "dense_forward '" + layer.weight.name + "': weight " +
                                   shape_string(layer.weight.value) + " cannot take input " +
                                   shape_string(x.value()));
    }
    BasicTape<Scalar>& tape = *x.tape;
    auto out = activate(add_bias(matmul(tape.param(layer.weight), x), tape.param(layer.bias)),
                        layer.activation);
    if (!all_finite(out.value())) {
        fail(ErrorKind::Numeric, "dense_forward '" + layer.weight.name + "' produced a non-finite value");
    }
    return out;
}

}  // namespace tdti::nn
