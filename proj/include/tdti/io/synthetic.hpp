#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tdti/io/embeddings.hpp"
#include "tdti/io/interactions.hpp"

namespace tdti::io {

/// Planted bilinear ground truth: every drug and target owns a latent factor
/// vector, a pair interacts iff the factor dot product is positive, and
/// embeddings are fixed random linear images of the factors plus Gaussian
/// noise.
struct SyntheticConfig {
    int n_drugs = 200;
    int n_targets = 50;
    int drug_dim = 32;
    int protein_dim = 48;
    int pocket_dim = 0;  // 0 disables pockets
    int n_latent_factors = 4;
    double noise = 0.0;
    std::uint64_t seed = 0;
    TaskMode mode = TaskMode::Classification;
    // Regression targets: base + linear terms + bilinear_weight * (u.v) / sqrt(k).
    double affinity_base = 6.0;
    double affinity_bilinear = 1.0;
};

struct SyntheticDataset {
    EmbeddingStore drugs{Modality::Drug};
    EmbeddingStore proteins{Modality::Protein};
    std::optional<EmbeddingStore> pockets;
    std::vector<InteractionRecord> interactions;  // every drug x target pair
    std::vector<SmilesRecord> smiles;
    Eigen::MatrixXd drug_factors;    // k x n_drugs
    Eigen::MatrixXd target_factors;  // k x n_targets
};

/// Pure function of the config. Retries with derived seeds (at most 10) when
/// every label lands in one class.
SyntheticDataset gen_synthetic(const SyntheticConfig& config);

std::string synthetic_drug_id(int i);
std::string synthetic_target_id(int i);

}  // namespace tdti::io
