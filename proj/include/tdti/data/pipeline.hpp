#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tdti/io/interactions.hpp"

namespace tdti::data {

using io::InteractionRecord;

/// label = 1 iff Kd < threshold (strict). Affinity holds raw Kd in the
/// threshold's units.
std::vector<InteractionRecord> label_by_kd(std::vector<InteractionRecord> records, double threshold = 30.0);

/// Symmetric pocket similarity in [0,1] read from TSV `pocket_a pocket_b score`.
/// A pocket is fully similar to itself; unlisted pairs are unknown.
class PocketSimilarity {
public:
    void set(const std::string& a, const std::string& b, double score);
    std::optional<double> similarity(const std::string& a, const std::string& b) const;
    std::size_t size() const { return table_.size(); }

private:
    std::map<std::pair<std::string, std::string>, double> table_;
};

PocketSimilarity load_pocket_similarity(const std::string& path);

enum class NegativeStrategy { RandomPair, PocketDissimilar };

struct NegSampleSpec {
    NegativeStrategy strategy = NegativeStrategy::RandomPair;
    double ratio = 1.0;
    const PocketSimilarity* similarity = nullptr;
    // Minimum dissimilarity (1 - similarity) between the positive's pocket and
    // the negative's pocket. Pairs missing from the table never qualify.
    double threshold = 0.7;
};

/// Entities negatives may be drawn from; all from one split.
struct SamplingPool {
    std::vector<std::string> drugs;
    std::vector<std::string> targets;
    std::map<std::string, std::string> target_pocket;  // pocket per target
    io::Split split = io::Split::Unassigned;
};

/// Pool built from the distinct drugs and targets of `records` in `split`.
SamplingPool pool_from(const std::vector<InteractionRecord>& records, io::Split split);

/// round(ratio * |positives|) distinct negatives with label 0. No negative
/// equals a pair in `known_positives` (defaults to `positives`). Random pairs
/// draw drug and target uniformly from the pool; pocket-dissimilar negatives
/// keep a positive's drug and swap in a target whose pocket is dissimilar to
/// the positive's. Fails after 100x count draws without completing.
std::vector<InteractionRecord> sample_negatives(const std::vector<InteractionRecord>& positives,
                                                const NegSampleSpec& spec, const SamplingPool& pool,
                                                std::uint64_t seed,
                                                const std::vector<InteractionRecord>* known_positives = nullptr);

enum class SplitStrategy { Random, UnseenDrug, UnseenTarget, ExternalTag };

std::string_view to_string(SplitStrategy s);
SplitStrategy parse_split_strategy(std::string_view text);

struct SplitSpec {
    SplitStrategy strategy = SplitStrategy::Random;
    double train = 0.7;
    double valid = 0.1;
    double test = 0.2;
    std::uint64_t seed = 0;
    bool balance_train = false;

    void validate() const;
};

/// Tags every record. Random partitions distinct (drug, target) pairs;
/// unseen_drug and unseen_target partition the drug or target ids.
/// Partition sizes are round(f_train * n), round(f_valid * n) and the rest.
std::vector<InteractionRecord> split(std::vector<InteractionRecord> records, const SplitSpec& spec);

/// Majority class of the train partition subsampled to the minority size;
/// other partitions and record order are kept.
std::vector<InteractionRecord> balance_train(const std::vector<InteractionRecord>& records, std::uint64_t seed);

}  // namespace tdti::data
