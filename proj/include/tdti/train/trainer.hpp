#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdti/io/embeddings.hpp"
#include "tdti/io/interactions.hpp"
#include "tdti/io/synthetic.hpp"
#include "tdti/losses.hpp"
#include "tdti/metrics.hpp"
#include "tdti/model/model.hpp"

namespace tdti::train {

using io::InteractionRecord;
using model::Model;
using model::ModelConfig;

/// Everything a run reads. Records carry their split tags.
struct Dataset {
    io::EmbeddingStore drugs{io::Modality::Drug};
    io::EmbeddingStore proteins{io::Modality::Protein};
    std::optional<io::EmbeddingStore> pockets;
    std::vector<InteractionRecord> records;
    std::map<std::string, std::string> smiles;  // drug id -> SMILES
};

Dataset from_synthetic(const io::SyntheticDataset& syn);

enum class EvalMetric { Aupr, Pcc, Rmse };

std::string_view to_string(EvalMetric m);
EvalMetric parse_eval_metric(std::string_view text);

struct TrainConfig {
    double lr = 5e-5;
    double weight_decay = 1e-5;
    int max_epochs = 1000;
    int patience = 20;
    int batch_size = 256;
    std::vector<std::uint64_t> seeds{0};
    EvalMetric eval_metric = EvalMetric::Aupr;
    io::TaskMode mode = io::TaskMode::Classification;

    /// lr 5e-5 with AUPR for DTI, 1e-4 with PCC for DTA.
    static TrainConfig defaults(io::TaskMode mode);
    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    losses::LossBreakdown loss;  // mean over training examples
    double valid_metric = 0.0;   // NaN when undefined
};

struct TrainReport {
    std::uint64_t seed = 0;
    std::vector<EpochLog> epochs;
    int best_epoch = 0;
    double best_valid_metric = 0.0;
    std::optional<metrics::MetricBundle> test;
};

nlohmann::json to_json(const TrainReport& r);

struct TrainResult {
    Model model;
    TrainReport report;
};

/// One run: seeded init, per-epoch seeded shuffle, composite loss with Adam,
/// early stopping on the validation metric. Returns the parameters of the
/// best validation epoch.
TrainResult train(const ModelConfig& model_config, const Dataset& data, const TrainConfig& config, std::uint64_t seed);

struct PredictionRecord {
    std::string drug_id;
    std::string target_id;
    double logit = 0.0;
    std::optional<double> prob;
    std::optional<int> pred_label;
    std::optional<double> affinity_pred;
    double confidence = 0.0;
    std::optional<double> unfamiliarity;
    // Ground truth carried along for metrics; not written to TSV.
    std::optional<int> label;
    std::optional<double> affinity;
};

struct Evaluation {
    metrics::MetricBundle metrics;
    std::vector<PredictionRecord> predictions;
};

/// Predictions for every record (in order) and the mode's metric bundle.
/// Unfamiliarity is filled for drugs with SMILES unless disabled.
Evaluation evaluate(Model& model, const Dataset& data, const std::vector<InteractionRecord>& records,
                    bool with_unfamiliarity = true);

/// `drug_id target_id logit prob pred_label affinity_pred confidence unfamiliarity`.
void save_predictions(const std::vector<PredictionRecord>& preds, const std::string& path);
std::vector<PredictionRecord> load_predictions(const std::string& path);

struct MultiSeedReport {
    std::vector<TrainReport> runs;
    std::map<std::string, double> mean;
    std::map<std::string, double> sd;  // sample sd; 0 for a single run
};

nlohmann::json to_json(const MultiSeedReport& r);

/// One independent run per seed in `config.seeds`, `threads` at a time.
/// Returns the model of the first seed alongside the aggregate.
std::pair<Model, MultiSeedReport> train_seeds(const ModelConfig& model_config, const Dataset& data,
                                              const TrainConfig& config, int threads = 1);

}  // namespace tdti::train
