// Shared fixtures and brute-force oracles for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tdti/losses.hpp"
#include "tdti/model/model.hpp"
#include "tdti/nn/grad_check.hpp"
#include "tdti/screening.hpp"

namespace tdti::testing {

inline model::ModelConfig tiny_config(bool pockets = true) {
    model::ModelConfig c;
    c.drug_dim = 6;
    c.protein_dim = 5;
    c.pocket_dim = pockets ? 4 : 0;
    c.hidden_dim = 6;
    c.output_dim = 4;
    c.max_len = 8;
    c.latent_dim = 3;
    return c;
}

inline model::Batch random_batch(const model::ModelConfig& c, Eigen::Index b, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    auto fill = [&](Eigen::Index rows) {
        nn::Tensor t(rows, b);
        for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = g(rng);
        return t;
    };
    model::Batch batch;
    batch.drugs = fill(c.drug_dim);
    batch.proteins = fill(c.protein_dim);
    if (c.has_pockets()) batch.pockets = fill(c.pocket_dim);
    batch.targets = nn::Tensor(1, b);
    std::vector<model::TokenSeq> seqs;
    const std::string alphabet = "CNOc1()=";
    for (Eigen::Index j = 0; j < b; ++j) {
        batch.targets(0, j) = c.mode == io::TaskMode::Classification ? double(j % 2) : g(rng);
        std::string s;
        const int len = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(c.max_len - 2));
        for (int k = 0; k < len; ++k) s += alphabet[rng() % alphabet.size()];
        seqs.push_back(model::tokenize(s, c.vocab, c.max_len));
    }
    batch.tokens = model::token_matrix(seqs);
    return batch;
}

/// Composite gradients against central differences. The confidence term
/// reads its inputs and target through a stop-gradient, so the numeric side
/// freezes those at the unperturbed forward pass; everything else is
/// re-evaluated. `value_gap` is |composite - frozen objective| at the base point.
struct CompositeCheck {
    nn::GradCheckReport report;
    double value_gap = 0.0;
};

inline CompositeCheck composite_fd(model::Model& m, const model::Batch& batch, std::uint64_t neg_seed,
                                   double tol = 1e-4, std::size_t coords = 300) {
    const model::ModelConfig& c = m.config();
    nn::Tape base(false);
    const model::ForwardResult f0 = m.forward(base, batch);
    const nn::Tensor ed0 = f0.drug_embedding.value(), ep0 = f0.protein_embedding.value(), lg0 = f0.logit.value();
    nn::Tensor target0;
    if (c.mode == io::TaskMode::Classification) {
        target0 = (batch.targets.array() - (1.0 / (1.0 + (-lg0.array()).exp()))).abs().matrix();
    } else {
        target0 = ((batch.targets - lg0).array().abs() / c.regression_error_scale).min(1.0).matrix();
    }

    nn::LossClosure<double> frozen = [&](nn::Tape& t) {
        const model::ForwardResult f = m.forward(t, batch);
        const auto& w = c.weights;
        const nn::Var conf = m.confidence(t.constant(ed0), t.constant(ep0), t.constant(lg0));
        nn::Var total = nn::affine(losses::confidence_loss(conf, target0), w.conf);
        if (c.mode == io::TaskMode::Classification) {
            total = nn::add(total, nn::affine(losses::bce_loss(f.logit, batch.targets), w.cls));
            nn::Var con;
            if (c.contrastive == model::ContrastiveVariant::CosineMargin) {
                con = losses::cosine_contrastive_loss(f.drug_embedding, f.protein_embedding, batch.targets, c.margin);
            } else {
                const nn::Var neg = nn::gather_columns(f.protein_embedding,
                                                       losses::negative_permutation(batch.size(), neg_seed));
                con = losses::triplet_loss(f.drug_embedding, f.protein_embedding, neg, batch.targets, c.triplet_margin);
            }
            total = nn::add(total, nn::affine(con, w.con));
        } else {
            total = nn::add(total, nn::affine(losses::mse_loss(f.logit, batch.targets), w.cls));
        }
        if (f.recon_logits) {
            total = nn::add(total, nn::affine(losses::reconstruction_loss(*f.recon_logits, batch.tokens, c.vocab.size()),
                                              w.recon));
        }
        return total;
    };

    nn::Tape tape;
    const model::ForwardResult f = m.forward(tape, batch);
    const losses::CompositeLoss L = losses::composite_loss(f, batch, c, neg_seed);
    const double value = L.total.value()(0, 0);
    const nn::Gradients grads = tape.backward(L.total);

    CompositeCheck out;
    nn::Tape probe(false);
    out.value_gap = std::abs(value - frozen(probe).value()(0, 0));
    nn::ParamList<double> params;
    for (auto& p : m.parameters()) params.emplace_back(p.get());
    out.report = nn::compare_gradients<double>(frozen, params, grads, tol, {.min_coordinates = coords});
    return out;
}

// ---------------------------------------------------------------------------
// Metric oracles, written from the definitions
// ---------------------------------------------------------------------------

/// Average precision: mean over positives of precision at that positive's
/// rank, ranking by score descending and equal scores by index ascending.
inline double brute_aupr(const std::vector<double>& s, const std::vector<int>& y) {
    const std::size_t n = s.size();
    double ap = 0.0;
    int positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] != 1) continue;
        ++positives;
        int above = 0, above_pos = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const bool before = s[j] > s[i] || (s[j] == s[i] && j <= i);
            if (!before) continue;
            ++above;
            above_pos += y[j];
        }
        ap += double(above_pos) / above;
    }
    return ap / positives;
}

inline double brute_f1(const std::vector<double>& p, const std::vector<int>& y, double thr = 0.5) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const int pred = p[i] >= thr ? 1 : 0;
        tp += pred == 1 && y[i] == 1;
        fp += pred == 1 && y[i] == 0;
        fn += pred == 0 && y[i] == 1;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

inline double brute_pcc(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = double(a.size());
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sa += a[i];
        sb += b[i];
    }
    const double ma = sa / n, mb = sb / n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

inline double brute_rmse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / double(a.size()));
}

// ---------------------------------------------------------------------------
// Screening oracles: linear scans over the ranking
// ---------------------------------------------------------------------------

inline double brute_recall(const std::vector<std::string>& order, const std::set<std::string>& act, std::size_t k) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < k; ++i) hit += act.count(order[i]);
    return double(hit) / double(act.size());
}

/// Smallest L with at least `need` of `wanted` in the first L positions.
inline std::size_t brute_prefix(const std::vector<std::string>& order, const std::set<std::string>& wanted,
                                std::size_t need) {
    for (std::size_t L = 1; L <= order.size(); ++L) {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < L; ++i) hit += wanted.count(order[i]);
        if (hit >= need) return L;
    }
    return order.size() + 1;
}

inline std::size_t brute_target(double kpct, std::size_t a) {
    // Smallest integer t with t >= kpct * a / 100, at least 1.
    std::size_t t = 0;
    while (double(t) * 100.0 < kpct * double(a)) ++t;
    return std::max<std::size_t>(1, t);
}

inline double brute_ar_budget(const std::vector<std::string>& order, const std::set<std::string>& act, double kpct) {
    return 100.0 * double(brute_prefix(order, act, brute_target(kpct, act.size()))) / double(order.size());
}

inline double brute_topk_budget(const std::vector<std::string>& order, const std::map<std::string, double>& potency,
                                double kpct) {
    std::vector<std::pair<double, std::string>> by;
    for (const auto& [id, p] : potency) by.emplace_back(-p, id);
    std::sort(by.begin(), by.end());
    const std::size_t t = brute_target(kpct, potency.size());
    std::set<std::string> top;
    for (std::size_t i = 0; i < t; ++i) top.insert(by[i].second);
    return 100.0 * double(brute_prefix(order, top, t)) / double(order.size());
}

inline std::size_t brute_cut(double kpct, std::size_t n) {
    std::size_t t = 0;
    while (double(t) * 100.0 < kpct * double(n)) ++t;
    return std::max<std::size_t>(1, t);
}

}  // namespace tdti::testing
