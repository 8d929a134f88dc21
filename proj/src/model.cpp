#include "tdti/model/model.hpp"

#include <cmath>

#include "tdti/error.hpp"
#include "tdti/util/rng.hpp"

namespace tdti::model {

using nn::Activation;

std::string_view to_string(ContrastiveVariant v) {
    return v == ContrastiveVariant::CosineMargin ? "cosine_margin" : "triplet_l2";
}

ContrastiveVariant parse_contrastive(std::string_view text) {
    if (text == "cosine_margin") return ContrastiveVariant::CosineMargin;
    if (text == "triplet_l2") return ContrastiveVariant::TripletL2;
    fail(ErrorKind::Config, "unknown contrastive variant '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
    if (drug_dim <= 0 || protein_dim <= 0 || pocket_dim < 0 || hidden_dim <= 0 || output_dim <= 0 ||
        latent_dim <= 0) {
        fail(ErrorKind::Config, "model dimensions must be positive");
    }
    if (max_len < 3) fail(ErrorKind::Config, "max_len must be at least 3");
    if (weights.cls < 0 || weights.con < 0 || weights.conf < 0 || weights.recon < 0) {
        fail(ErrorKind::Config, "loss weights must be non-negative");
    }
    if (!(margin > 0) || !(triplet_margin > 0)) fail(ErrorKind::Config, "margins must be positive");
    if (!(unfamiliarity_eps > 0)) fail(ErrorKind::Config, "unfamiliarity epsilon must be positive");
    if (!(regression_error_scale > 0)) fail(ErrorKind::Config, "regression error scale must be positive");
    if (!std::isfinite(lambda_protein) || !std::isfinite(lambda_pocket)) {
        fail(ErrorKind::Config, "pocket aggregation weights must be finite");
    }
}

Encoder::Encoder(const std::string& name, int in, int hidden, int out, Activation final_act)
    : first(name + ".0", in, hidden, Activation::Relu), second(name + ".1", hidden, out, final_act) {}

Var Encoder::forward(Var x) { return nn::dense_forward(second, nn::dense_forward(first, x)); }

void identity_init(Encoder& enc) {
    if (enc.first.in_dim() != enc.first.out_dim() || enc.second.in_dim() != enc.second.out_dim()) {
        fail(ErrorKind::Shape, "identity_init requires square encoder layers");
    }
    enc.first.weight.value.setIdentity();
    enc.first.bias.value.setZero();
    enc.second.weight.value.setIdentity();
    enc.second.bias.value.setZero();
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    const auto& c = config_;
    drug_encoder_ = Encoder("drug_encoder", c.drug_dim, c.hidden_dim, c.output_dim);
    protein_encoder_ = Encoder("protein_encoder", c.protein_dim, c.hidden_dim, c.output_dim);
    if (c.has_pockets()) pocket_encoder_ = Encoder("pocket_encoder", c.pocket_dim, c.hidden_dim, c.output_dim);
    classifier_ = Encoder("classifier", 2 * c.output_dim, c.hidden_dim, 1);
    confidence_head_ = Encoder("confidence_head", 2 * c.output_dim + 1, c.hidden_dim, 1, Activation::Sigmoid);
    ae_encoder_ = nn::DenseLayer("ae_encoder", c.drug_dim, c.latent_dim, Activation::Tanh);
    ae_decoder_ = nn::DenseLayer("ae_decoder", c.latent_dim, static_cast<Eigen::Index>(c.max_len) * c.vocab.size(),
                                 Activation::Identity);

    Rng rng(seed);
    auto init = [&rng](Encoder& e) {
        e.first.init_scaled_uniform(rng);
        e.second.init_scaled_uniform(rng);
    };
    init(drug_encoder_);
    init(protein_encoder_);
    if (pocket_encoder_) init(*pocket_encoder_);
    init(classifier_);
    init(confidence_head_);
    ae_encoder_.init_scaled_uniform(rng);
    ae_decoder_.init_scaled_uniform(rng);
}

Encoder& Model::pocket_encoder() {
    if (!pocket_encoder_) fail(ErrorKind::Config, "model has no pocket branch");
    return *pocket_encoder_;
}

std::vector<std::reference_wrapper<Parameter>> Model::parameters() {
    std::vector<std::reference_wrapper<Parameter>> out;
    auto push = [&out](nn::DenseLayer& l) {
        out.emplace_back(l.weight);
        out.emplace_back(l.bias);
    };
    for (Encoder* e : {&drug_encoder_, &protein_encoder_}) {
        push(e->first);
        push(e->second);
    }
    if (pocket_encoder_) {
        push(pocket_encoder_->first);
        push(pocket_encoder_->second);
    }
    for (Encoder* e : {&classifier_, &confidence_head_}) {
        push(e->first);
        push(e->second);
    }
    push(ae_encoder_);
    push(ae_decoder_);
    return out;
}

std::vector<std::reference_wrapper<const Parameter>> Model::parameters() const {
    auto mut = const_cast<Model*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::vector<std::reference_wrapper<Parameter>> Model::classifier_parameters() {
    return {classifier_.first.weight, classifier_.first.bias, classifier_.second.weight, classifier_.second.bias};
}

std::vector<std::reference_wrapper<Parameter>> Model::confidence_parameters() {
    return {confidence_head_.first.weight, confidence_head_.first.bias, confidence_head_.second.weight,
            confidence_head_.second.bias};
}

void Model::check_width(const Var& v, int expected, const char* what) const {
    if (v.rows() != expected) {
        fail(ErrorKind::Shape, std::string(what) + " width " + std::to_string(v.rows()) + " does not match configured " +
                                   std::to_string(expected));
    }
}

Var Model::encode_drug(Var drugs) {
    check_width(drugs, config_.drug_dim, "drug embedding");
    return drug_encoder_.forward(drugs);
}

Var Model::encode_protein_with_pocket(Var proteins, std::optional<Var> pockets) {
    check_width(proteins, config_.protein_dim, "protein embedding");
    Var encoded = protein_encoder_.forward(proteins);
    if (!pockets) {
        if (config_.has_pockets()) fail(ErrorKind::Config, "pocket-enabled model requires a pocket embedding");
        return encoded;
    }
    if (!pocket_encoder_) fail(ErrorKind::Config, "pocket embedding supplied to a pocketless model");
    check_width(*pockets, config_.pocket_dim, "pocket embedding");
    Var pocket = pocket_encoder_->forward(*pockets);
    return nn::add(nn::affine(encoded, config_.lambda_protein), nn::affine(pocket, config_.lambda_pocket));
}

Var Model::interaction_logit(Var drug_emb, Var protein_emb) {
    check_width(drug_emb, config_.output_dim, "drug projection");
    check_width(protein_emb, config_.output_dim, "protein projection");
    return classifier_.forward(nn::concat_rows(drug_emb, protein_emb));
}

Var Model::confidence(Var drug_emb, Var protein_emb, Var logit) {
    check_width(drug_emb, config_.output_dim, "drug projection");
    check_width(protein_emb, config_.output_dim, "protein projection");
    check_width(logit, 1, "logit");
    Var features = nn::concat_rows(nn::concat_rows(nn::detach(drug_emb), nn::detach(protein_emb)), nn::detach(logit));
    return confidence_head_.forward(features);
}

Var Model::reconstruct(Var drugs) {
    check_width(drugs, config_.drug_dim, "drug embedding");
    return nn::dense_forward(ae_decoder_, nn::dense_forward(ae_encoder_, drugs));
}

ForwardResult Model::forward(Tape& tape, const Batch& batch) {
    const auto n = batch.size();
    if (batch.proteins.cols() != n || (batch.pockets && batch.pockets->cols() != n)) {
        fail(ErrorKind::Shape, "batch columns disagree");
    }
    ForwardResult r;
    r.drug_embedding = encode_drug(tape.constant(batch.drugs));
    std::optional<Var> pockets;
    if (batch.pockets) pockets = tape.constant(*batch.pockets);
    r.protein_embedding = encode_protein_with_pocket(tape.constant(batch.proteins), pockets);
    r.logit = interaction_logit(r.drug_embedding, r.protein_embedding);
    r.confidence = confidence(r.drug_embedding, r.protein_embedding, r.logit);
    if (batch.tokens.size() > 0) r.recon_logits = reconstruct(tape.constant(batch.drugs));
    return r;
}

Eigen::VectorXd Model::encode_drug(const Eigen::VectorXd& drug) {
    Tape tape(false);
    return encode_drug(tape.constant(drug)).value();
}

Eigen::VectorXd Model::encode_protein_with_pocket(const Eigen::VectorXd& protein,
                                                  const std::optional<Eigen::VectorXd>& pocket) {
    Tape tape(false);
    std::optional<Var> pk;
    if (pocket) pk = tape.constant(*pocket);
    return encode_protein_with_pocket(tape.constant(protein), pk).value();
}

Eigen::MatrixXd Model::reconstruct(const Eigen::VectorXd& drug) {
    Tape tape(false);
    const Tensor flat = reconstruct(tape.constant(drug)).value();
    // Position-major flat vector -> rows are positions.
    Eigen::MatrixXd out(config_.max_len, config_.vocab.size());
    for (int p = 0; p < config_.max_len; ++p) {
        out.row(p) = flat.col(0).segment(static_cast<Eigen::Index>(p) * config_.vocab.size(), config_.vocab.size()).transpose();
    }
    return out;
}

Tensor Model::reconstruction_nll(const Tensor& drugs, const Eigen::MatrixXi& tokens) {
    Tape tape(false);
    if (tokens.rows() != config_.max_len) fail(ErrorKind::Shape, "token matrix length differs from max_len");
    return nn::masked_token_xent(reconstruct(tape.constant(drugs)), tokens, config_.vocab.size(), kPad).value();
}

double Model::unfamiliarity(const Eigen::VectorXd& drug, const TokenSeq& tokens) {
    const Tensor nll = reconstruction_nll(drug, token_matrix({tokens}));
    return unfamiliarity_from_nll(nll(0, 0), config_.unfamiliarity_eps);
}

double unfamiliarity_from_nll(double nll, double eps) {
    if (!(eps > 0)) fail(ErrorKind::Config, "unfamiliarity epsilon must be positive");
    if (!(nll >= 0)) fail(ErrorKind::Numeric, "negative reconstruction NLL");
    return std::log(nll + eps);
}

}  // namespace tdti::model
