#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "tdti/io/interactions.hpp"
#include "tdti/model/tokenizer.hpp"
#include "tdti/nn/dense.hpp"

namespace tdti::model {

using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

enum class ContrastiveVariant { CosineMargin, TripletL2 };

std::string_view to_string(ContrastiveVariant v);
ContrastiveVariant parse_contrastive(std::string_view text);

struct LossWeights {
    double cls = 0.4;
    double con = 0.2;
    double conf = 0.2;
    double recon = 0.2;

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct ModelConfig {
    int drug_dim = 64;
    int protein_dim = 1280;
    int pocket_dim = 0;  // 0: no pocket branch
    int hidden_dim = 512;
    int output_dim = 256;
    double lambda_protein = 1.0;
    double lambda_pocket = 2.0;
    io::TaskMode mode = io::TaskMode::Classification;
    int max_len = 128;
    Vocabulary vocab;
    int latent_dim = 64;
    LossWeights weights;
    ContrastiveVariant contrastive = ContrastiveVariant::CosineMargin;
    double margin = 1.0;          // cosine-distance margin m
    double triplet_margin = 1.0;  // L2 triplet margin
    double unfamiliarity_eps = 1e-8;
    // Regression confidence target is min(1, |target - pred| / scale).
    double regression_error_scale = 1.0;

    bool has_pockets() const { return pocket_dim > 0; }
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Two dense layers: in -> hidden (relu) -> out (identity).
struct Encoder {
    nn::DenseLayer first;
    nn::DenseLayer second;

    Encoder() = default;
    Encoder(const std::string& name, int in, int hidden, int out, nn::Activation final_act = nn::Activation::Identity);

    Var forward(Var x);
};

/// Identity weights and zero biases on a square encoder (in == hidden == out).
void identity_init(Encoder& enc);

/// One mini-batch laid out column-wise.
struct Batch {
    Tensor drugs;                   // drug_dim x B
    Tensor proteins;                // protein_dim x B
    std::optional<Tensor> pockets;  // pocket_dim x B
    Tensor targets;                 // 1 x B: labels (DTI) or affinities (DTA)
    Eigen::MatrixXi tokens;         // max_len x B; empty when SMILES unavailable

    Eigen::Index size() const { return drugs.cols(); }
};

struct ForwardResult {
    Var drug_embedding;     // output_dim x B
    Var protein_embedding;  // output_dim x B (after pocket aggregation)
    Var logit;              // 1 x B; affinity in regression mode
    Var confidence;         // 1 x B in (0,1)
    std::optional<Var> recon_logits;  // (max_len * |vocab|) x B
};

/// All learnable state of the interaction network. Parameters are members,
/// so a Model must stay in place while tapes or optimizer state reference it.
class Model {
public:
    explicit Model(ModelConfig config, std::uint64_t seed = 0);

    Model(const Model&) = default;
    Model& operator=(const Model&) = default;

    const ModelConfig& config() const { return config_; }

    /// Declaration order: drug encoder, protein encoder, pocket encoder (if
    /// any), classifier, confidence head, autoencoder encoder, decoder.
    std::vector<std::reference_wrapper<Parameter>> parameters();
    std::vector<std::reference_wrapper<const Parameter>> parameters() const;
    /// Subsets used by the stop-gradient contract.
    std::vector<std::reference_wrapper<Parameter>> classifier_parameters();
    std::vector<std::reference_wrapper<Parameter>> confidence_parameters();

    Encoder& drug_encoder() { return drug_encoder_; }
    Encoder& protein_encoder() { return protein_encoder_; }
    Encoder& pocket_encoder();
    Encoder& classifier() { return classifier_; }
    Encoder& confidence_head() { return confidence_head_; }
    nn::DenseLayer& ae_encoder() { return ae_encoder_; }
    nn::DenseLayer& ae_decoder() { return ae_decoder_; }

    Var encode_drug(Var drugs);
    /// lambda_protein * E(protein) + lambda_pocket * K(pocket), or E(protein)
    /// when no pocket is given.
    Var encode_protein_with_pocket(Var proteins, std::optional<Var> pockets);
    Var interaction_logit(Var drug_emb, Var protein_emb);
    /// Inputs are detached: confidence training never reaches the encoders
    /// or the classifier.
    Var confidence(Var drug_emb, Var protein_emb, Var logit);
    Var reconstruct(Var drugs);

    ForwardResult forward(Tape& tape, const Batch& batch);

    // Single-vector conveniences (non-recording tape).
    Eigen::VectorXd encode_drug(const Eigen::VectorXd& drug);
    Eigen::VectorXd encode_protein_with_pocket(const Eigen::VectorXd& protein,
                                               const std::optional<Eigen::VectorXd>& pocket);
    /// (max_len x |vocab|) per-position logits.
    Eigen::MatrixXd reconstruct(const Eigen::VectorXd& drug);
    /// Mean per-token NLL of `tokens` under the reconstruction (1 x B).
    Tensor reconstruction_nll(const Tensor& drugs, const Eigen::MatrixXi& tokens);
    double unfamiliarity(const Eigen::VectorXd& drug, const TokenSeq& tokens);

private:
    void check_width(const Var& v, int expected, const char* what) const;

    ModelConfig config_;
    Encoder drug_encoder_;
    Encoder protein_encoder_;
    std::optional<Encoder> pocket_encoder_;
    Encoder classifier_;
    Encoder confidence_head_;
    nn::DenseLayer ae_encoder_;
    nn::DenseLayer ae_decoder_;
};

/// U = ln(NLL + eps).
double unfamiliarity_from_nll(double nll, double eps);

}  // namespace tdti::model
