#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tdti/nn/tensor.hpp"

namespace tdti::nn {

template <typename Scalar>
class BasicTape;

/// Handle to a value recorded on a tape. Cheap to copy; only valid while the
/// owning tape is alive and not cleared.
template <typename Scalar>
struct BasicVar {
    BasicTape<Scalar>* tape = nullptr;
    std::size_t id = 0;

    const Tensor2<Scalar>& value() const { return tape->value(*this); }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
};

/// Gradients of one backward pass, keyed by parameter.
template <typename Scalar>
class BasicGradients {
public:
    using Matrix = Tensor2<Scalar>;

    bool contains(const BasicParameter<Scalar>& p) const { return grads_.count(&p) != 0; }

    const Matrix& at(const BasicParameter<Scalar>& p) const {
        auto it = grads_.find(&p);
        if (it == grads_.end()) fail(ErrorKind::Usage, "no gradient recorded for '" + p.name + "'");
        return it->second;
    }

    /// Zero tensor of the parameter's shape when the parameter was not touched.
    Matrix get_or_zero(const BasicParameter<Scalar>& p) const {
        auto it = grads_.find(&p);
        if (it == grads_.end()) return Matrix::Zero(p.value.rows(), p.value.cols());
        return it->second;
    }

    Matrix& operator[](const BasicParameter<Scalar>& p) { return grads_[&p]; }

    std::size_t size() const { return grads_.size(); }

    void accumulate(const BasicParameter<Scalar>& p, const Matrix& g) {
        auto [it, inserted] = grads_.try_emplace(&p, g);
        if (!inserted) it->second += g;
    }

private:
    std::unordered_map<const BasicParameter<Scalar>*, Matrix> grads_;
};

/// Reverse-mode recording of a fixed set of dense primitives. Nodes are
/// appended in evaluation order, so replaying them backwards is a valid
/// topological order.
template <typename Scalar>
class BasicTape {
public:
    using Matrix = Tensor2<Scalar>;
    using Var = BasicVar<Scalar>;
    using Param = BasicParameter<Scalar>;
    using Gradients = BasicGradients<Scalar>;
    using BackwardFn = std::function<void(BasicTape&, const Matrix& out_grad)>;

    /// A non-recording tape keeps values only (inference).
    explicit BasicTape(bool recording = true) : recording_(recording) {}

    BasicTape(const BasicTape&) = delete;
    BasicTape& operator=(const BasicTape&) = delete;

    bool recording() const { return recording_; }
    bool empty() const { return nodes_.empty(); }
    std::size_t size() const { return nodes_.size(); }

    Var constant(Matrix v) {
        nodes_.push_back(Node{std::move(v), {}, {}, nullptr, false});
        return Var{this, nodes_.size() - 1};
    }

    Var param(Param& p) {
        nodes_.push_back(Node{p.value, {}, {}, &p, recording_});
        return Var{this, nodes_.size() - 1};
    }

    /// Appends an op result. `backward` receives the output gradient and must
    /// route it to inputs through accumulate().
    Var record(Matrix v, std::initializer_list<Var> inputs, BackwardFn backward) {
        bool needs = false;
        if (recording_) {
            for (const Var& in : inputs) needs = needs || nodes_[in.id].requires_grad;
        }
        nodes_.push_back(Node{std::move(v), {}, needs ? std::move(backward) : BackwardFn{},
                              nullptr, needs});
        return Var{this, nodes_.size() - 1};
    }

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    void accumulate(Var v, const Matrix& g) {
        Node& n = nodes_[v.id];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

    /// Propagates `seed` from `out` to every parameter leaf, then clears the tape.
    Gradients backward(Var out, const Matrix& seed) {
        if (nodes_.empty()) fail(ErrorKind::Usage, "backward called without a recorded forward pass");
        if (!recording_) fail(ErrorKind::Usage, "backward called on a non-recording tape");
        require_shape(seed, value(out).rows(), value(out).cols(), "backward seed");
        accumulate(out, seed);
        Gradients grads;
        for (std::size_t i = out.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.requires_grad || n.grad.size() == 0) continue;
            if (n.param != nullptr) {
                grads.accumulate(*n.param, n.grad);
            } else if (n.backward) {
                n.backward(*this, n.grad);
            }
        }
        clear();
        return grads;
    }

    Gradients backward(Var scalar_out) {
        if (value(scalar_out).size() != 1) {
            fail(ErrorKind::Shape, "backward without seed requires a scalar output, got " +
                                       shape_string(value(scalar_out)));
        }
        return backward(scalar_out, Matrix::Ones(1, 1));
    }

    void clear() { nodes_.clear(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        BackwardFn backward;
        Param* param;
        bool requires_grad;
    };

    std::vector<Node> nodes_;
    bool recording_;
};

using Tape = BasicTape<double>;
using Var = BasicVar<double>;
using Gradients = BasicGradients<double>;

// ---------------------------------------------------------------------------
// Primitive ops
// ---------------------------------------------------------------------------

namespace detail {

template <typename Scalar>
void same_tape(BasicVar<Scalar> a, BasicVar<Scalar> b) {
    if (a.tape != b.tape) fail(ErrorKind::Usage, "operands recorded on different tapes");
}

template <typename Scalar>
void same_shape(BasicVar<Scalar> a, BasicVar<Scalar> b, const char* op) {
    same_tape(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        fail(ErrorKind::Shape, std::string(op) + ": shape mismatch " + shape_string(a.value()) +
                                   " vs " + shape_string(b.value()));
    }
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

}  // namespace detail

template <typename Scalar>
BasicVar<Scalar> matmul(BasicVar<Scalar> a, BasicVar<Scalar> b) {
    detail::same_tape(a, b);
    if (a.cols() != b.rows()) {
        fail(ErrorKind::Shape, "matmul: " + shape_string(a.value()) + " * " + shape_string(b.value()));
    }
    Tensor2<Scalar> out = a.value() * b.value();
    return a.tape->record(std::move(out), {a, b}, [a, b](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
        if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
    });
}

/// x (n x batch) + bias (n x 1) broadcast across columns.
template <typename Scalar>
BasicVar<Scalar> add_bias(BasicVar<Scalar> x, BasicVar<Scalar> bias) {
    detail::same_tape(x, bias);
    if (bias.cols() != 1 || bias.rows() != x.rows()) {
        fail(ErrorKind::Shape, "add_bias: " + shape_string(x.value()) + " + " + shape_string(bias.value()));
    }
    Tensor2<Scalar> out = x.value().colwise() + bias.value().col(0);
    return x.tape->record(std::move(out), {x, bias}, [x, bias](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        t.accumulate(x, g);
        t.accumulate(bias, g.rowwise().sum());
    });
}

template <typename Scalar>
BasicVar<Scalar> add(BasicVar<Scalar> a, BasicVar<Scalar> b) {
    detail::same_shape(a, b, "add");
    Tensor2<Scalar> out = a.value() + b.value();
    return a.tape->record(std::move(out), {a, b}, [a, b](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

template <typename Scalar>
BasicVar<Scalar> sub(BasicVar<Scalar> a, BasicVar<Scalar> b) {
    detail::same_shape(a, b, "sub");
    Tensor2<Scalar> out = a.value() - b.value();
    return a.tape->record(std::move(out), {a, b}, [a, b](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        t.accumulate(a, g);
        t.accumulate(b, -g);
    });
}

/// Elementwise product.
template <typename Scalar>
BasicVar<Scalar> hadamard(BasicVar<Scalar> a, BasicVar<Scalar> b) {
    detail::same_shape(a, b, "hadamard");
    Tensor2<Scalar> out = a.value().cwiseProduct(b.value());
    return a.tape->record(std::move(out), {a, b}, [a, b](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
        if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
    });
}

/// scale * x + shift, elementwise.
template <typename Scalar>
BasicVar<Scalar> affine(BasicVar<Scalar> x, Scalar scale, Scalar shift = Scalar(0)) {
    Tensor2<Scalar> out = (x.value().array() * scale + shift).matrix();
    return x.tape->record(std::move(out), {x}, [x, scale](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        t.accumulate(x, g * scale);
    });
}

template <typename Scalar>
BasicVar<Scalar> square(BasicVar<Scalar> x) {
    Tensor2<Scalar> out = x.value().array().square().matrix();
    return x.tape->record(std::move(out), {x}, [x](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        t.accumulate(x, (g.array() * Scalar(2) * t.value(x).array()).matrix());
    });
}

template <typename Scalar>
BasicVar<Scalar> relu(BasicVar<Scalar> x) {
    Tensor2<Scalar> out = x.value().cwiseMax(Scalar(0));
    return x.tape->record(std::move(out), {x}, [x](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        t.accumulate(x, (t.value(x).array() > Scalar(0)).select(g.array(), Scalar(0)).matrix());
    });
}

template <typename Scalar>
BasicVar<Scalar> sigmoid(BasicVar<Scalar> x) {
    Tensor2<Scalar> out = x.value().unaryExpr([](Scalar v) { return detail::sigmoid(v); });
    const BasicVar<Scalar> self{x.tape, x.tape->size()};
    return x.tape->record(std::move(out), {x}, [x, self](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        const auto& s = t.value(self).array();
        t.accumulate(x, (g.array() * s * (Scalar(1) - s)).matrix());
    });
}

template <typename Scalar>
BasicVar<Scalar> tanh(BasicVar<Scalar> x) {
    Tensor2<Scalar> out = x.value().array().tanh().matrix();
    const BasicVar<Scalar> self{x.tape, x.tape->size()};
    return x.tape->record(std::move(out), {x}, [x, self](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        const auto& y = t.value(self).array();
        t.accumulate(x, (g.array() * (Scalar(1) - y.square())).matrix());
    });
}

/// Stacks a over b along rows; column counts must agree.
template <typename Scalar>
BasicVar<Scalar> concat_rows(BasicVar<Scalar> a, BasicVar<Scalar> b) {
    detail::same_tape(a, b);
    if (a.cols() != b.cols()) {
        fail(ErrorKind::Shape, "concat_rows: " + shape_string(a.value()) + " over " + shape_string(b.value()));
    }
    Tensor2<Scalar> out(a.rows() + b.rows(), a.cols());
    out << a.value(), b.value();
    const Eigen::Index ra = a.rows();
    const Eigen::Index rb = b.rows();
    return a.tape->record(std::move(out), {a, b}, [a, b, ra, rb](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        t.accumulate(a, g.topRows(ra));
        t.accumulate(b, g.bottomRows(rb));
    });
}

/// Value passes through; gradient does not.
template <typename Scalar>
BasicVar<Scalar> detach(BasicVar<Scalar> x) {
    return x.tape->constant(x.value());
}

/// out[:, j] = x[:, index[j]].
template <typename Scalar>
BasicVar<Scalar> gather_columns(BasicVar<Scalar> x, std::vector<Eigen::Index> index) {
    Tensor2<Scalar> out(x.rows(), static_cast<Eigen::Index>(index.size()));
    for (std::size_t j = 0; j < index.size(); ++j) {
        if (index[j] < 0 || index[j] >= x.cols()) fail(ErrorKind::Shape, "gather_columns: index out of range");
        out.col(static_cast<Eigen::Index>(j)) = x.value().col(index[j]);
    }
    return x.tape->record(std::move(out), {x}, [x, index = std::move(index)](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        Tensor2<Scalar> gx = Tensor2<Scalar>::Zero(t.value(x).rows(), t.value(x).cols());
        for (std::size_t j = 0; j < index.size(); ++j) gx.col(index[j]) += g.col(static_cast<Eigen::Index>(j));
        t.accumulate(x, gx);
    });
}

template <typename Scalar>
BasicVar<Scalar> sum(BasicVar<Scalar> x) {
    Tensor2<Scalar> out(1, 1);
    out(0, 0) = x.value().sum();
    const Eigen::Index r = x.rows(), c = x.cols();
    return x.tape->record(std::move(out), {x}, [x, r, c](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        t.accumulate(x, Tensor2<Scalar>::Constant(r, c, g(0, 0)));
    });
}

template <typename Scalar>
BasicVar<Scalar> mean(BasicVar<Scalar> x) {
    if (x.value().size() == 0) fail(ErrorKind::Shape, "mean of an empty tensor");
    return affine(sum(x), Scalar(1) / static_cast<Scalar>(x.value().size()));
}

/// Per-column cosine similarity of a and b (result 1 x batch). A zero-norm
/// column is rejected.
template <typename Scalar>
BasicVar<Scalar> column_cosine(BasicVar<Scalar> a, BasicVar<Scalar> b) {
    detail::same_shape(a, b, "column_cosine");
    const auto na = a.value().colwise().norm().eval();
    const auto nb = b.value().colwise().norm().eval();
    if ((na.array() == Scalar(0)).any() || (nb.array() == Scalar(0)).any()) {
        fail(ErrorKind::Numeric, "cosine undefined for a zero-norm embedding");
    }
    Tensor2<Scalar> out = (a.value().cwiseProduct(b.value()).colwise().sum().array() /
                           (na.array() * nb.array()))
                              .matrix();
    const BasicVar<Scalar> self{a.tape, a.tape->size()};
    return a.tape->record(std::move(out), {a, b}, [a, b, self, na, nb](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        const auto& av = t.value(a);
        const auto& bv = t.value(b);
        const auto& cosv = t.value(self);
        Tensor2<Scalar> ga(av.rows(), av.cols());
        Tensor2<Scalar> gb(bv.rows(), bv.cols());
        for (Eigen::Index j = 0; j < av.cols(); ++j) {
            const Scalar inv = Scalar(1) / (na(0, j) * nb(0, j));
            ga.col(j) = g(0, j) * (bv.col(j) * inv - cosv(0, j) * av.col(j) / (na(0, j) * na(0, j)));
            gb.col(j) = g(0, j) * (av.col(j) * inv - cosv(0, j) * bv.col(j) / (nb(0, j) * nb(0, j)));
        }
        t.accumulate(a, ga);
        t.accumulate(b, gb);
    });
}

/// Per-column Euclidean norm (1 x batch). Subgradient 0 at the origin.
template <typename Scalar>
BasicVar<Scalar> column_norm(BasicVar<Scalar> x) {
    Tensor2<Scalar> out = x.value().colwise().norm();
    const BasicVar<Scalar> self{x.tape, x.tape->size()};
    return x.tape->record(std::move(out), {x}, [x, self](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        const auto& xv = t.value(x);
        const auto& n = t.value(self);
        Tensor2<Scalar> gx = Tensor2<Scalar>::Zero(xv.rows(), xv.cols());
        for (Eigen::Index j = 0; j < xv.cols(); ++j) {
            if (n(0, j) > Scalar(0)) gx.col(j) = xv.col(j) * (g(0, j) / n(0, j));
        }
        t.accumulate(x, gx);
    });
}

/// Stable per-element binary cross-entropy on logits:
/// max(x,0) - x*y + log(1 + exp(-|x|)). Targets are constants in [0,1].
template <typename Scalar>
BasicVar<Scalar> bce_with_logits(BasicVar<Scalar> logits, const Tensor2<std::type_identity_t<Scalar>>& targets) {
    require_shape(targets, logits.rows(), logits.cols(), "bce_with_logits targets");
    const auto& x = logits.value();
    Tensor2<Scalar> out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const Scalar v = x(i);
        out(i) = std::max(v, Scalar(0)) - v * targets(i) + std::log1p(std::exp(-std::abs(v)));
    }
    return logits.tape->record(std::move(out), {logits}, [logits, targets](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
        const auto& xv = t.value(logits);
        Tensor2<Scalar> gx(xv.rows(), xv.cols());
        for (Eigen::Index i = 0; i < xv.size(); ++i) gx(i) = g(i) * (detail::sigmoid(xv(i)) - targets(i));
        t.accumulate(logits, gx);
    });
}

/// Token-level softmax cross-entropy. `logits` is (positions*vocab x batch),
/// position-major; `tokens` is (positions x batch). Positions holding `pad`
/// are ignored. Returns the per-sample mean NLL over scorable positions
/// (1 x batch).
template <typename Scalar>
BasicVar<Scalar> masked_token_xent(BasicVar<Scalar> logits, const Eigen::MatrixXi& tokens,
                                   Eigen::Index vocab, int pad) {
    const Eigen::Index positions = tokens.rows();
    const Eigen::Index batch = tokens.cols();
    if (logits.rows() != positions * vocab || logits.cols() != batch) {
        fail(ErrorKind::Shape, "masked_token_xent: logits " + shape_string(logits.value()) +
                                   " vs tokens " + shape_string(tokens) + " with vocab " +
                                   std::to_string(vocab));
    }
    const auto& lv = logits.value();
    Tensor2<Scalar> out(1, batch);
    Tensor2<Scalar> probs(lv.rows(), lv.cols());
    Eigen::VectorXi counts(batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        Scalar total = 0;
        int count = 0;
        for (Eigen::Index p = 0; p < positions; ++p) {
            const auto block = lv.col(b).segment(p * vocab, vocab);
            const Scalar mx = block.maxCoeff();
            const auto shifted = (block.array() - mx).eval();
            const Scalar lse = std::log(shifted.exp().sum());
            probs.col(b).segment(p * vocab, vocab) = (shifted - lse).exp().matrix();
            const int tok = tokens(p, b);
            if (tok == pad) continue;
            if (tok < 0 || tok >= vocab) fail(ErrorKind::Shape, "masked_token_xent: token id out of range");
            total += lse - shifted(tok);
            ++count;
        }
        if (count == 0) fail(ErrorKind::Data, "no scorable tokens");
        counts(b) = count;
        out(0, b) = total / static_cast<Scalar>(count);
    }
    return logits.tape->record(
        std::move(out), {logits},
        [logits, tokens, vocab, pad, probs = std::move(probs), counts](BasicTape<Scalar>& t, const Tensor2<Scalar>& g) {
            Tensor2<Scalar> gl = Tensor2<Scalar>::Zero(probs.rows(), probs.cols());
            for (Eigen::Index b = 0; b < tokens.cols(); ++b) {
                const Scalar w = g(0, b) / static_cast<Scalar>(counts(b));
                for (Eigen::Index p = 0; p < tokens.rows(); ++p) {
                    const int tok = tokens(p, b);
                    if (tok == pad) continue;
                    auto seg = gl.col(b).segment(p * vocab, vocab);
                    seg = probs.col(b).segment(p * vocab, vocab) * w;
                    seg(tok) -= w;
                }
            }
            t.accumulate(logits, gl);
        });
}

}  // namespace tdti::nn
