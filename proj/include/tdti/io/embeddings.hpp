#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "tdti/nn/tensor.hpp"

namespace tdti::io {

enum class Modality { Drug, Protein, Pocket, Peptide, Rna };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view text);

struct EmbeddingRecord {
    std::string id;
    Modality modality = Modality::Drug;
    Eigen::VectorXd vec;
};

/// Immutable-after-load collection of same-width vectors of one modality.
/// Insertion order is preserved and defines serialization order.
class EmbeddingStore {
public:
    explicit EmbeddingStore(Modality modality = Modality::Drug) : modality_(modality) {}

    /// Rejects duplicate ids, width changes and non-finite entries.
    void add(std::string id, Eigen::VectorXd vec);

    Modality modality() const { return modality_; }
    Eigen::Index width() const { return width_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    const Eigen::VectorXd& at(const std::string& id) const;
    const std::vector<EmbeddingRecord>& records() const { return records_; }

    /// Columns in the order of `ids` (width x ids.size()).
    nn::Tensor gather(std::span<const std::string> ids) const;

    friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b);

private:
    Modality modality_;
    Eigen::Index width_ = 0;
    std::vector<EmbeddingRecord> records_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Binary layout: "TDTIEMB1", u32 LE width, then per record u16 LE id length,
/// UTF-8 id bytes, width x f32 LE. Values are narrowed to f32, so the
/// round-trip is exact only for f32-representable stores.
inline constexpr std::string_view kEmbeddingMagic = "TDTIEMB1";

/// Reads JSONL or binary (detected by magic). JSONL `kind` must match
/// `modality`.
EmbeddingStore load_embeddings(const std::string& path, Modality modality);
/// Modality taken from the first JSONL record (binary files default to drug).
EmbeddingStore load_embeddings(const std::string& path);

void save_embeddings_jsonl(const EmbeddingStore& store, const std::string& path);
void save_embeddings_binary(const EmbeddingStore& store, const std::string& path);

/// Rounds every entry to the nearest f32 so text and binary forms agree.
Eigen::VectorXd to_f32_precision(const Eigen::VectorXd& v);

}  // namespace tdti::io
