#include "tdti/losses.hpp"

#include <algorithm>
#include <cmath>

#include "tdti/error.hpp"
#include "tdti/util/rng.hpp"

namespace tdti::losses {

namespace {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_weights(const LossWeights& w) {
    if (w.cls < 0 || w.con < 0 || w.conf < 0 || w.recon < 0) fail(ErrorKind::Config, "loss weights must be non-negative");
}

}  // namespace

double bce_with_logits(double logit, int label) {
    if (label != 0 && label != 1) fail(ErrorKind::Usage, "bce_with_logits: label must be 0 or 1");
    return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double contrastive_cosine(const Eigen::VectorXd& drug, const Eigen::VectorXd& protein, int label, double margin) {
    if (drug.size() != protein.size()) fail(ErrorKind::Shape, "contrastive_cosine: width mismatch");
    if (!(margin > 0)) fail(ErrorKind::Config, "contrastive margin must be positive");
    const double nd = drug.norm();
    const double np = protein.norm();
    if (nd == 0.0 || np == 0.0) fail(ErrorKind::Numeric, "cosine undefined for a zero-norm embedding");
    const double d = 1.0 - drug.dot(protein) / (nd * np);
    const double hinge = std::max(0.0, margin - d);
    return label * d * d + (1 - label) * hinge * hinge;
}

double contrastive_triplet(const Eigen::VectorXd& drug, const Eigen::VectorXd& positive,
                           const Eigen::VectorXd& negative, double alpha) {
    if (drug.size() != positive.size() || drug.size() != negative.size()) {
        fail(ErrorKind::Shape, "contrastive_triplet: width mismatch");
    }
    if (!(alpha > 0)) fail(ErrorKind::Config, "triplet margin must be positive");
    return std::max(0.0, alpha + (drug - positive).norm() - (drug - negative).norm());
}

double confidence_loss(double confidence, double label, double probability) {
    const double r = confidence - std::abs(label - probability);
    return r * r;
}

double reconstruction_loss(const Eigen::MatrixXd& logits, const model::TokenSeq& tokens) {
    if (static_cast<std::size_t>(logits.rows()) != tokens.ids.size()) {
        fail(ErrorKind::Shape, "reconstruction_loss: " + std::to_string(logits.rows()) + " positions vs " +
                                   std::to_string(tokens.ids.size()) + " tokens");
    }
    double total = 0.0;
    int count = 0;
    for (Eigen::Index p = 0; p < logits.rows(); ++p) {
        const int tok = tokens.ids[static_cast<std::size_t>(p)];
        if (tok == model::kPad) continue;
        if (tok < 0 || tok >= logits.cols()) fail(ErrorKind::Shape, "reconstruction_loss: token id out of range");
        const double mx = logits.row(p).maxCoeff();
        const double lse = mx + std::log((logits.row(p).array() - mx).exp().sum());
        total += lse - logits(p, tok);
        ++count;
    }
    if (count == 0) fail(ErrorKind::Data, "no scorable tokens");
    return total / count;
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) fail(ErrorKind::Shape, "mse_loss: length mismatch");
    if (pred.empty()) fail(ErrorKind::Shape, "mse_loss: empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

LossBreakdown combine(LossBreakdown t, const LossWeights& w, io::TaskMode mode) {
    check_weights(w);
    if (mode == io::TaskMode::Classification) {
        t.total = w.cls * t.bce + w.con * t.con + w.conf * t.conf + w.recon * t.recon;
    } else {
        t.total = w.cls * t.mse + w.con * t.con + w.conf * t.conf + w.recon * t.recon;
    }
    return t;
}

Var bce_loss(Var logits, const Tensor& labels) { return nn::mean(nn::bce_with_logits(logits, labels)); }

Var cosine_contrastive_loss(Var drug_emb, Var protein_emb, const Tensor& labels, double margin) {
    if (!(margin > 0)) fail(ErrorKind::Config, "contrastive margin must be positive");
    nn::Tape& t = *drug_emb.tape;
    nn::require_shape(labels, 1, drug_emb.cols(), "contrastive labels");
    const Var d = nn::affine(nn::column_cosine(drug_emb, protein_emb), -1.0, 1.0);
    const Var pos = nn::hadamard(nn::square(d), t.constant(labels));
    const Var hinge = nn::relu(nn::affine(d, -1.0, margin));
    const Tensor neg_mask = (1.0 - labels.array()).matrix();
    const Var neg = nn::hadamard(nn::square(hinge), t.constant(neg_mask));
    return nn::mean(nn::add(pos, neg));
}

Var triplet_loss(Var drug_emb, Var positive, Var negative, const Tensor& anchor_mask, double alpha) {
    if (!(alpha > 0)) fail(ErrorKind::Config, "triplet margin must be positive");
    nn::Tape& t = *drug_emb.tape;
    nn::require_shape(anchor_mask, 1, drug_emb.cols(), "triplet anchor mask");
    const double anchors = anchor_mask.sum();
    const Var dpos = nn::column_norm(nn::sub(drug_emb, positive));
    const Var dneg = nn::column_norm(nn::sub(drug_emb, negative));
    const Var hinge = nn::relu(nn::affine(nn::sub(dpos, dneg), 1.0, alpha));
    const Var masked = nn::hadamard(hinge, t.constant(anchor_mask));
    return nn::affine(nn::sum(masked), anchors > 0 ? 1.0 / anchors : 0.0);
}

Var confidence_loss(Var confidence, const Tensor& target) {
    nn::require_shape(target, confidence.rows(), confidence.cols(), "confidence target");
    return nn::mean(nn::square(nn::sub(confidence, confidence.tape->constant(target))));
}

Var reconstruction_loss(Var recon_logits, const Eigen::MatrixXi& tokens, int vocab_size) {
    return nn::mean(nn::masked_token_xent(recon_logits, tokens, vocab_size, model::kPad));
}

Var mse_loss(Var pred, const Tensor& target) {
    nn::require_shape(target, pred.rows(), pred.cols(), "mse target");
    return nn::mean(nn::square(nn::sub(pred, pred.tape->constant(target))));
}

std::vector<Eigen::Index> negative_permutation(Eigen::Index n, std::uint64_t seed) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    const Eigen::Index shift = n > 1 ? 1 + static_cast<Eigen::Index>(splitmix64(seed) % static_cast<std::uint64_t>(n - 1)) : 0;
    for (Eigen::Index j = 0; j < n; ++j) perm[static_cast<std::size_t>(j)] = (j + shift) % n;
    return perm;
}

CompositeLoss composite_loss(const ForwardResult& fwd, const Batch& batch, const ModelConfig& config,
                             std::uint64_t negative_seed) {
    const LossWeights& w = config.weights;
    check_weights(w);
    nn::Tape& tape = *fwd.logit.tape;
    const Tensor& y = batch.targets;
    nn::require_shape(y, 1, batch.size(), "batch targets");

    LossBreakdown br;
    std::vector<std::pair<double, Var>> terms;
    const Tensor pred = fwd.logit.value();

    if (config.mode == io::TaskMode::Classification) {
        const Var bce = bce_loss(fwd.logit, y);
        br.bce = bce.value()(0, 0);
        terms.emplace_back(w.cls, bce);

        Var con;
        if (config.contrastive == model::ContrastiveVariant::CosineMargin) {
            con = cosine_contrastive_loss(fwd.drug_embedding, fwd.protein_embedding, y, config.margin);
        } else {
            const Var neg = nn::gather_columns(fwd.protein_embedding, negative_permutation(batch.size(), negative_seed));
            con = triplet_loss(fwd.drug_embedding, fwd.protein_embedding, neg, y, config.triplet_margin);
        }
        br.con = con.value()(0, 0);
        terms.emplace_back(w.con, con);

        const Tensor target = (y.array() - pred.unaryExpr([](double v) { return sigmoid(v); }).array()).abs().matrix();
        const Var conf = confidence_loss(fwd.confidence, target);
        br.conf = conf.value()(0, 0);
        terms.emplace_back(w.conf, conf);
    } else {
        const Var mse = mse_loss(fwd.logit, y);
        br.mse = mse.value()(0, 0);
        terms.emplace_back(w.cls, mse);

        const Tensor target = ((y - pred).array().abs() / config.regression_error_scale).min(1.0).matrix();
        const Var conf = confidence_loss(fwd.confidence, target);
        br.conf = conf.value()(0, 0);
        terms.emplace_back(w.conf, conf);
    }

    if (fwd.recon_logits) {
        const Var recon = reconstruction_loss(*fwd.recon_logits, batch.tokens, config.vocab.size());
        br.recon = recon.value()(0, 0);
        terms.emplace_back(w.recon, recon);
    }

    Var total = nn::affine(terms.front().second, terms.front().first);
    for (std::size_t i = 1; i < terms.size(); ++i) total = nn::add(total, nn::affine(terms[i].second, terms[i].first));
    br = combine(br, w, config.mode);
    if (!std::isfinite(total.value()(0, 0))) fail(ErrorKind::Numeric, "composite loss is not finite");
    (void)tape;
    return {total, br};
}

}  // namespace tdti::losses
