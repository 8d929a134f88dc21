#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tdti/io/embeddings.hpp"

namespace tdti::io {

enum class Split { Train, Valid, Test, Unassigned };

std::string_view to_string(Split s);
Split parse_split(std::string_view text);

enum class TaskMode { Classification, Regression };

std::string_view to_string(TaskMode m);
/// Accepts "dti"/"classification" and "dta"/"regression".
TaskMode parse_task_mode(std::string_view text);

struct InteractionRecord {
    std::string drug_id;
    std::string target_id;
    std::optional<std::string> pocket_id;
    std::optional<int> label;        // DTI
    std::optional<double> affinity;  // DTA, p-scale
    Split split = Split::Unassigned;

    friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

struct SmilesRecord {
    std::string drug_id;
    std::string smiles;

    friend bool operator==(const SmilesRecord&, const SmilesRecord&) = default;
};

/// TSV with header `drug_id target_id pocket_id label affinity split`; an
/// empty field means absent.
std::vector<InteractionRecord> load_interactions(const std::string& path);
void save_interactions(const std::vector<InteractionRecord>& records, const std::string& path);

/// TSV with header `drug_id smiles`.
std::vector<SmilesRecord> load_smiles(const std::string& path);
void save_smiles(const std::vector<SmilesRecord>& records, const std::string& path);

/// Every record carries the field its mode needs (label or affinity).
void check_mode(const std::vector<InteractionRecord>& records, TaskMode mode);

/// Fails with every unresolvable id listed; pockets are checked only when a
/// pocket store is supplied.
void validate_ids(const std::vector<InteractionRecord>& records, const EmbeddingStore& drugs,
                  const EmbeddingStore& targets, const EmbeddingStore* pockets = nullptr);

std::vector<InteractionRecord> select_split(const std::vector<InteractionRecord>& records, Split split);

}  // namespace tdti::io
