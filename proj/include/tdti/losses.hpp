#pragma once

#include <cstdint>
#include <span>

#include "tdti/model/model.hpp"

namespace tdti::losses {

using model::Batch;
using model::ForwardResult;
using model::LossWeights;
using model::ModelConfig;
using nn::Tensor;
using nn::Var;

/// Per-term values of one composite evaluation. In regression mode `mse`
/// carries the supervised term and `bce`/`con` are zero.
struct LossBreakdown {
    double bce = 0.0;
    double con = 0.0;
    double conf = 0.0;
    double recon = 0.0;
    double mse = 0.0;
    double total = 0.0;
};

// ---------------------------------------------------------------------------
// Closed forms on single examples
// ---------------------------------------------------------------------------

/// -[y log s(x) + (1-y) log(1 - s(x))] in log-sum-exp form.
double bce_with_logits(double logit, int label);

/// y d^2 + (1-y) max(0, m - d)^2 with d = 1 - cos(e_d, e_p).
double contrastive_cosine(const Eigen::VectorXd& drug, const Eigen::VectorXd& protein, int label, double margin);

/// max(0, alpha + |f_d - f_p| - |f_d - f_neg|).
double contrastive_triplet(const Eigen::VectorXd& drug, const Eigen::VectorXd& positive,
                           const Eigen::VectorXd& negative, double alpha);

/// (c - |y - p|)^2.
double confidence_loss(double confidence, double label, double probability);

/// Softmax cross-entropy over non-PAD positions of a (max_len x |vocab|)
/// logit matrix, averaged over those positions.
double reconstruction_loss(const Eigen::MatrixXd& logits, const model::TokenSeq& tokens);

double mse_loss(std::span<const double> pred, std::span<const double> target);

/// Weighted total from already computed terms.
LossBreakdown combine(LossBreakdown terms, const LossWeights& weights, io::TaskMode mode);

// ---------------------------------------------------------------------------
// Batched, differentiable forms (mean over the batch)
// ---------------------------------------------------------------------------

Var bce_loss(Var logits, const Tensor& labels);
Var cosine_contrastive_loss(Var drug_emb, Var protein_emb, const Tensor& labels, double margin);
/// Hinge averaged over anchors with mask 1; zero when the mask is empty.
Var triplet_loss(Var drug_emb, Var positive, Var negative, const Tensor& anchor_mask, double alpha);
/// Target is a constant: no gradient reaches whatever produced it.
Var confidence_loss(Var confidence, const Tensor& target);
Var reconstruction_loss(Var recon_logits, const Eigen::MatrixXi& tokens, int vocab_size);
Var mse_loss(Var pred, const Tensor& target);

struct CompositeLoss {
    Var total;
    LossBreakdown breakdown;
};

/// Full training objective over one forward pass. `negative_seed` drives the
/// in-batch shuffle that supplies triplet negatives.
CompositeLoss composite_loss(const ForwardResult& fwd, const Batch& batch, const ModelConfig& config,
                             std::uint64_t negative_seed = 0);

/// Cyclic shift by a seeded offset in [1, n-1]: no column maps to itself
/// when n > 1.
std::vector<Eigen::Index> negative_permutation(Eigen::Index n, std::uint64_t seed);

}  // namespace tdti::losses
