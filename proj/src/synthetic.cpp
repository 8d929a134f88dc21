#include "tdti/io/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "tdti/error.hpp"
#include "tdti/util/log.hpp"
#include "tdti/util/rng.hpp"

namespace tdti::io {

namespace {

constexpr int kMaxAttempts = 11;  // first draw + 10 retries

// SMILES-like fragments selected by the quartile of each drug factor.
constexpr std::array<std::array<const char*, 4>, 4> kFragments{{
    {"N", "C", "O", "S"},
    {"c1ccccc1", "C(=O)", "CN", "OC"},
    {"F", "Cl", "Br", "I"},
    {"C#N", "C=C", "[nH]", "CO"},
}};

int quartile(double z) {
    // Standard normal quartile boundaries.
    if (z < -0.6744897501960817) return 0;
    if (z < 0.0) return 1;
    if (z < 0.6744897501960817) return 2;
    return 3;
}

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double sd, Rng& rng) {
    std::normal_distribution<double> dist(0.0, sd);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    }
    return m;
}

EmbeddingStore embed(Modality modality, const Eigen::MatrixXd& factors, int dim, double noise,
                     const std::vector<std::string>& ids, Rng& rng) {
    const auto k = factors.rows();
    const Eigen::MatrixXd proj = gaussian(dim, k, 1.0 / std::sqrt(static_cast<double>(k)), rng);
    Eigen::MatrixXd vecs = proj * factors;
    if (noise > 0.0) vecs += gaussian(vecs.rows(), vecs.cols(), noise, rng);
    EmbeddingStore store(modality);
    for (Eigen::Index j = 0; j < factors.cols(); ++j) store.add(ids[j], to_f32_precision(vecs.col(j)));
    return store;
}

std::string make_smiles(const Eigen::VectorXd& factors, Rng& rng) {
    std::string s;
    for (Eigen::Index i = 0; i < factors.size(); ++i) {
        s += kFragments[static_cast<std::size_t>(i) % kFragments.size()][quartile(factors(i))];
    }
    std::uniform_int_distribution<int> tail(0, 2);
    s.append(static_cast<std::size_t>(tail(rng)), 'C');
    return s;
}

}  // namespace

std::string synthetic_drug_id(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "D%05d", i);
    return buf;
}

std::string synthetic_target_id(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "T%04d", i);
    return buf;
}

SyntheticDataset gen_synthetic(const SyntheticConfig& c) {
    if (c.n_drugs < 2 || c.n_targets < 2) fail(ErrorKind::Config, "gen_synthetic: need at least 2 drugs and 2 targets");
    if (c.drug_dim < 1 || c.protein_dim < 1 || c.pocket_dim < 0 || c.n_latent_factors < 1) {
        fail(ErrorKind::Config, "gen_synthetic: dimensions must be positive");
    }
    if (!(c.noise >= 0.0)) fail(ErrorKind::Config, "gen_synthetic: noise must be >= 0");

    std::vector<std::string> drug_ids, target_ids, pocket_ids;
    for (int i = 0; i < c.n_drugs; ++i) drug_ids.push_back(synthetic_drug_id(i));
    for (int i = 0; i < c.n_targets; ++i) {
        target_ids.push_back(synthetic_target_id(i));
        pocket_ids.push_back("P" + target_ids.back().substr(1));
    }

    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(derive_seed(c.seed, static_cast<std::uint64_t>(attempt)));
        SyntheticDataset ds;
        ds.drug_factors = gaussian(c.n_latent_factors, c.n_drugs, 1.0, rng);
        ds.target_factors = gaussian(c.n_latent_factors, c.n_targets, 1.0, rng);

        const Eigen::MatrixXd scores = ds.drug_factors.transpose() * ds.target_factors;
        const auto positives = (scores.array() > 0.0).count();
        if (c.mode == TaskMode::Classification && (positives == 0 || positives == scores.size())) {
            spdlog::warn("gen_synthetic: all labels in one class (attempt {}), regenerating", attempt + 1);
            continue;
        }

        ds.drugs = embed(Modality::Drug, ds.drug_factors, c.drug_dim, c.noise, drug_ids, rng);
        ds.proteins = embed(Modality::Protein, ds.target_factors, c.protein_dim, c.noise, target_ids, rng);
        if (c.pocket_dim > 0) {
            ds.pockets = embed(Modality::Pocket, ds.target_factors, c.pocket_dim, c.noise, pocket_ids, rng);
        }

        const double k = static_cast<double>(c.n_latent_factors);
        const Eigen::VectorXd w_drug = gaussian(c.n_latent_factors, 1, 1.0, rng);
        const Eigen::VectorXd w_target = gaussian(c.n_latent_factors, 1, 1.0, rng);
        ds.interactions.reserve(static_cast<std::size_t>(c.n_drugs) * c.n_targets);
        for (int d = 0; d < c.n_drugs; ++d) {
            for (int t = 0; t < c.n_targets; ++t) {
                InteractionRecord r;
                r.drug_id = drug_ids[d];
                r.target_id = target_ids[t];
                if (c.pocket_dim > 0) r.pocket_id = pocket_ids[t];
                if (c.mode == TaskMode::Classification) {
                    r.label = scores(d, t) > 0.0 ? 1 : 0;
                } else {
                    const double linear = w_drug.dot(ds.drug_factors.col(d)) + w_target.dot(ds.target_factors.col(t));
                    r.affinity = c.affinity_base + 0.5 * linear / std::sqrt(k) +
                                 c.affinity_bilinear * scores(d, t) / std::sqrt(k);
                }
                ds.interactions.push_back(std::move(r));
            }
        }
        for (int d = 0; d < c.n_drugs; ++d) {
            ds.smiles.push_back({drug_ids[d], make_smiles(ds.drug_factors.col(d), rng)});
        }
        return ds;
    }
    fail(ErrorKind::Data, "gen_synthetic: degenerate labels after 10 retries");
}

}  // namespace tdti::io
