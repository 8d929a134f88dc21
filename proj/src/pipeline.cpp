#include "tdti/data/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tdti/error.hpp"
#include "tdti/util/rng.hpp"
#include "tdti/util/tsv.hpp"

namespace tdti::data {

namespace {

using PairKey = std::pair<std::string, std::string>;

PairKey key(const InteractionRecord& r) { return {r.drug_id, r.target_id}; }

template <typename T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    Rng rng(seed);
    // Fisher-Yates with explicit draws; std::shuffle's draw pattern is
    // implementation-defined.
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

std::vector<io::Split> assign_partitions(std::size_t n, const SplitSpec& spec) {
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
    const auto n_valid = static_cast<std::size_t>(std::llround(spec.valid * static_cast<double>(n)));
    if (n_train + n_valid >= n || n_train == 0 || n_valid == 0) {
        fail(ErrorKind::Data, "split of " + std::to_string(n) + " units leaves a partition empty");
    }
    std::vector<io::Split> out(n, io::Split::Test);
    for (std::size_t i = 0; i < n_train; ++i) out[i] = io::Split::Train;
    for (std::size_t i = n_train; i < n_train + n_valid; ++i) out[i] = io::Split::Valid;
    return out;
}

template <typename KeyFn>
void split_by_unit(std::vector<InteractionRecord>& records, const SplitSpec& spec, KeyFn unit_of) {
    using Unit = decltype(unit_of(records.front()));
    std::vector<Unit> units;
    {
        std::set<Unit> seen;
        for (const auto& r : records) seen.insert(unit_of(r));
        units.assign(seen.begin(), seen.end());
    }
    seeded_shuffle(units, spec.seed);
    const auto parts = assign_partitions(units.size(), spec);
    std::map<Unit, io::Split> tag;
    for (std::size_t i = 0; i < units.size(); ++i) tag[units[i]] = parts[i];
    for (auto& r : records) r.split = tag.at(unit_of(r));
}

}  // namespace

std::vector<InteractionRecord> label_by_kd(std::vector<InteractionRecord> records, double threshold) {
    if (!std::isfinite(threshold)) fail(ErrorKind::Config, "Kd threshold must be finite");
    std::vector<std::string> missing;
    for (auto& r : records) {
        if (!r.affinity) {
            if (missing.size() < 20) missing.push_back(r.drug_id + "/" + r.target_id);
            continue;
        }
        r.label = *r.affinity < threshold ? 1 : 0;
    }
    if (!missing.empty()) {
        std::string msg = "records without affinity:";
        for (const auto& m : missing) msg += " " + m;
        fail(ErrorKind::Data, msg);
    }
    return records;
}

void PocketSimilarity::set(const std::string& a, const std::string& b, double score) {
    if (!(score >= 0.0 && score <= 1.0)) fail(ErrorKind::Format, "pocket similarity must lie in [0,1]");
    table_[std::minmax(a, b)] = score;
}

std::optional<double> PocketSimilarity::similarity(const std::string& a, const std::string& b) const {
    if (a == b) return 1.0;
    const auto it = table_.find(std::minmax(a, b));
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

PocketSimilarity load_pocket_similarity(const std::string& path) {
    const TsvTable t = read_tsv(path);
    const auto ca = t.column("pocket_a", path);
    const auto cb = t.column("pocket_b", path);
    const auto cs = t.column("score", path);
    PocketSimilarity sim;
    for (const auto& row : t.rows) sim.set(row[ca], row[cb], parse_real(row[cs], path));
    return sim;
}

SamplingPool pool_from(const std::vector<InteractionRecord>& records, io::Split split) {
    std::set<std::string> drugs, targets;
    SamplingPool pool;
    pool.split = split;
    for (const auto& r : records) {
        if (r.split != split) continue;
        drugs.insert(r.drug_id);
        targets.insert(r.target_id);
        if (r.pocket_id) pool.target_pocket.emplace(r.target_id, *r.pocket_id);
    }
    pool.drugs.assign(drugs.begin(), drugs.end());
    pool.targets.assign(targets.begin(), targets.end());
    return pool;
}

std::vector<InteractionRecord> sample_negatives(const std::vector<InteractionRecord>& positives,
                                                const NegSampleSpec& spec, const SamplingPool& pool,
                                                std::uint64_t seed,
                                                const std::vector<InteractionRecord>* known_positives) {
    if (!(spec.ratio > 0)) fail(ErrorKind::Config, "negative ratio must be positive");
    if (pool.drugs.empty() || pool.targets.empty()) fail(ErrorKind::Data, "empty sampling pool");
    const bool dissimilar = spec.strategy == NegativeStrategy::PocketDissimilar;
    if (dissimilar && !spec.similarity) fail(ErrorKind::Config, "pocket_dissimilar sampling needs a similarity table");

    std::set<PairKey> forbidden;
    for (const auto& r : known_positives ? *known_positives : positives) forbidden.insert(key(r));

    const auto count = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(positives.size())));
    const std::size_t max_draws = 100 * std::max<std::size_t>(count, 1);
    Rng rng(seed);
    auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    std::vector<InteractionRecord> out;
    std::set<PairKey> emitted;
    std::size_t draws = 0;
    while (out.size() < count) {
        if (++draws > max_draws) {
            fail(ErrorKind::Data, "negative sampling: only " + std::to_string(out.size()) + " of " +
                                      std::to_string(count) + " negatives found in " + std::to_string(max_draws) +
                                      " draws");
        }
        InteractionRecord neg;
        neg.label = 0;
        neg.split = pool.split;
        if (dissimilar) {
            if (positives.empty()) break;
            const auto& pos = positives[pick(positives.size())];
            if (!pos.pocket_id) fail(ErrorKind::Data, "positive " + pos.drug_id + "/" + pos.target_id + " has no pocket");
            neg.drug_id = pos.drug_id;
            neg.target_id = pool.targets[pick(pool.targets.size())];
            const auto pk = pool.target_pocket.find(neg.target_id);
            if (pk == pool.target_pocket.end()) continue;
            const auto sim = spec.similarity->similarity(*pos.pocket_id, pk->second);
            if (!sim || 1.0 - *sim < spec.threshold) continue;
            neg.pocket_id = pk->second;
        } else {
            neg.drug_id = pool.drugs[pick(pool.drugs.size())];
            neg.target_id = pool.targets[pick(pool.targets.size())];
            if (const auto pk = pool.target_pocket.find(neg.target_id); pk != pool.target_pocket.end()) {
                neg.pocket_id = pk->second;
            }
        }
        const PairKey k = key(neg);
        if (forbidden.count(k) || !emitted.insert(k).second) continue;
        out.push_back(std::move(neg));
    }
    return out;
}

std::string_view to_string(SplitStrategy s) {
    switch (s) {
        case SplitStrategy::Random: return "random";
        case SplitStrategy::UnseenDrug: return "unseen_drug";
        case SplitStrategy::UnseenTarget: return "unseen_target";
        case SplitStrategy::ExternalTag: return "external_tag";
    }
    return "random";
}

SplitStrategy parse_split_strategy(std::string_view text) {
    for (auto s : {SplitStrategy::Random, SplitStrategy::UnseenDrug, SplitStrategy::UnseenTarget, SplitStrategy::ExternalTag}) {
        if (text == to_string(s)) return s;
    }
    fail(ErrorKind::Config, "unknown split strategy '" + std::string(text) + "'");
}

void SplitSpec::validate() const {
    if (!(train > 0) || !(valid > 0) || !(test > 0)) fail(ErrorKind::Config, "split fractions must be positive");
    if (std::abs(train + valid + test - 1.0) > 1e-9) fail(ErrorKind::Config, "split fractions must sum to 1");
}

std::vector<InteractionRecord> split(std::vector<InteractionRecord> records, const SplitSpec& spec) {
    if (records.empty()) fail(ErrorKind::Data, "split: no records");
    switch (spec.strategy) {
        case SplitStrategy::ExternalTag: {
            bool seen[3] = {false, false, false};
            for (const auto& r : records) {
                if (r.split == io::Split::Unassigned) {
                    fail(ErrorKind::Data, "external_tag split: record " + r.drug_id + "/" + r.target_id + " is untagged");
                }
                seen[static_cast<int>(r.split)] = true;
            }
            if (!seen[0] || !seen[1] || !seen[2]) fail(ErrorKind::Data, "external_tag split leaves a partition empty");
            break;
        }
        case SplitStrategy::Random:
            spec.validate();
            split_by_unit(records, spec, [](const InteractionRecord& r) { return key(r); });
            break;
        case SplitStrategy::UnseenDrug:
            spec.validate();
            split_by_unit(records, spec, [](const InteractionRecord& r) { return r.drug_id; });
            break;
        case SplitStrategy::UnseenTarget:
            spec.validate();
            split_by_unit(records, spec, [](const InteractionRecord& r) { return r.target_id; });
            break;
    }
    if (spec.balance_train) return balance_train(records, derive_seed(spec.seed, 1));
    return records;
}

std::vector<InteractionRecord> balance_train(const std::vector<InteractionRecord>& records, std::uint64_t seed) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.split != io::Split::Train) continue;
        if (!r.label || (*r.label != 0 && *r.label != 1)) {
            fail(ErrorKind::Data, "balance_train: train record " + r.drug_id + "/" + r.target_id + " lacks a 0/1 label");
        }
        by_class[*r.label].push_back(i);
    }
    if (by_class[0].empty() || by_class[1].empty()) fail(ErrorKind::Data, "balance_train: a class is absent from train");
    auto& major = by_class[0].size() > by_class[1].size() ? by_class[0] : by_class[1];
    const std::size_t keep = std::min(by_class[0].size(), by_class[1].size());
    std::vector<bool> drop(records.size(), false);
    if (major.size() > keep) {
        seeded_shuffle(major, seed);
        for (std::size_t i = keep; i < major.size(); ++i) drop[major[i]] = true;
    }
    std::vector<InteractionRecord> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!drop[i]) out.push_back(records[i]);
    }
    return out;
}

}  // namespace tdti::data
