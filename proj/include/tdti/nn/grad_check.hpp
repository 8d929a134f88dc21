#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tdti/nn/tape.hpp"

namespace tdti::nn {

struct GradCheckOptions {
    double step = 1e-6;
    std::size_t min_coordinates = 100;  // all coordinates when fewer exist
    std::uint64_t seed = 0;
    // Relative error uses max(|analytic|, |numeric|, floor) as denominator so
    // vanishing gradients are compared absolutely at tolerance * floor.
    double floor = 1e-4;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
    std::string worst_parameter;
    Eigen::Index worst_index = -1;
    double tolerance = 0.0;
    bool passed = false;
};

template <typename Scalar>
using LossClosure = std::function<BasicVar<Scalar>(BasicTape<Scalar>&)>;

template <typename Scalar>
using ParamList = std::vector<std::reference_wrapper<BasicParameter<Scalar>>>;

namespace detail {

template <typename Scalar>
Scalar eval_loss(const LossClosure<Scalar>& closure) {
    BasicTape<Scalar> tape(false);
    const auto out = closure(tape);
    if (out.value().size() != 1) fail(ErrorKind::Shape, "grad_check closure must return a scalar");
    return out.value()(0, 0);
}

}  // namespace detail

/// Compares `analytic` gradients against central finite differences on a
/// seeded subsample of coordinates.
template <typename Scalar>
GradCheckReport compare_gradients(const LossClosure<Scalar>& closure, const ParamList<Scalar>& params,
                                  const BasicGradients<Scalar>& analytic, double tolerance,
                                  const GradCheckOptions& opts = {}) {
    if (!(tolerance > 0.0)) fail(ErrorKind::Usage, "grad_check tolerance must be positive");

    const Scalar base_a = detail::eval_loss(closure);
    const Scalar base_b = detail::eval_loss(closure);
    if (base_a != base_b) fail(ErrorKind::Usage, "grad_check closure is not deterministic");

    struct Coord {
        std::size_t param;
        Eigen::Index index;
    };
    std::vector<Coord> coords;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (Eigen::Index i = 0; i < params[p].get().value.size(); ++i) coords.push_back({p, i});
    }
    if (coords.size() > opts.min_coordinates) {
        std::mt19937_64 rng(opts.seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(opts.min_coordinates);
    }

    GradCheckReport report;
    report.tolerance = tolerance;
    report.coordinates = coords.size();
    for (const Coord& c : coords) {
        BasicParameter<Scalar>& p = params[c.param].get();
        Scalar& x = p.value(c.index);
        const Scalar saved = x;
        x = saved + static_cast<Scalar>(opts.step);
        const Scalar plus = detail::eval_loss(closure);
        x = saved - static_cast<Scalar>(opts.step);
        const Scalar minus = detail::eval_loss(closure);
        x = saved;

        const double numeric = static_cast<double>(plus - minus) / (2.0 * opts.step);
        const double exact = static_cast<double>(analytic.get_or_zero(p)(c.index));
        const double denom = std::max({std::abs(numeric), std::abs(exact), opts.floor});
        const double rel = std::abs(numeric - exact) / denom;
        if (rel > report.max_rel_error || report.worst_index < 0) {
            report.max_rel_error = std::max(rel, report.max_rel_error);
            report.worst_parameter = p.name;
            report.worst_index = c.index;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    return report;
}

/// Tape gradients vs central finite differences.
template <typename Scalar>
GradCheckReport grad_check(const LossClosure<Scalar>& closure, const ParamList<Scalar>& params,
                           double tolerance, const GradCheckOptions& opts = {}) {
    BasicTape<Scalar> tape;
    const auto out = closure(tape);
    const auto grads = tape.backward(out);
    return compare_gradients(closure, params, grads, tolerance, opts);
}

}  // namespace tdti::nn
