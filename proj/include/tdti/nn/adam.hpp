#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "tdti/nn/tape.hpp"

namespace tdti::nn {

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-5;  // decoupled
};

/// Moments for a fixed, ordered parameter list.
template <typename Scalar>
struct BasicAdamState {
    AdamConfig config;
    std::vector<std::reference_wrapper<BasicParameter<Scalar>>> params;
    std::vector<Tensor2<Scalar>> m;
    std::vector<Tensor2<Scalar>> v;
    std::uint64_t t = 0;

    BasicAdamState(AdamConfig cfg, std::vector<std::reference_wrapper<BasicParameter<Scalar>>> ps)
        : config(cfg), params(std::move(ps)) {
        m.reserve(params.size());
        v.reserve(params.size());
        for (const auto& p : params) {
            m.push_back(Tensor2<Scalar>::Zero(p.get().value.rows(), p.get().value.cols()));
            v.push_back(Tensor2<Scalar>::Zero(p.get().value.rows(), p.get().value.cols()));
        }
    }
};

using AdamState = BasicAdamState<double>;

/// One bias-corrected Adam update over every parameter in `state`. Parameters
/// absent from `grads` get a zero gradient. Gradients are validated before any
/// parameter changes, so a rejected step leaves the model untouched.
template <typename Scalar>
void adam_step(BasicAdamState<Scalar>& state, const BasicGradients<Scalar>& grads) {
    std::vector<Tensor2<Scalar>> g;
    g.reserve(state.params.size());
    for (const auto& ref : state.params) {
        const BasicParameter<Scalar>& p = ref.get();
        g.push_back(grads.get_or_zero(p));
        require_shape(g.back(), p.value.rows(), p.value.cols(), "gradient of '" + p.name + "'");
        if (!all_finite(g.back())) {
            fail(ErrorKind::Numeric, "non-finite gradient for parameter '" + p.name + "'");
        }
    }

    const AdamConfig& c = state.config;
    state.t += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < state.params.size(); ++i) {
        auto& theta = state.params[i].get().value;
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g[i].cwiseProduct(g[i]);
        if (c.lr == 0.0) continue;
        const auto m_hat = (state.m[i].array() / bc1).eval();
        const auto v_hat = (state.v[i].array() / bc2).eval();
        if (c.weight_decay > 0.0) theta *= (1.0 - c.lr * c.weight_decay);
        theta.array() -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    }
}

}  // namespace tdti::nn
