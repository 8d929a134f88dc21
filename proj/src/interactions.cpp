#include "tdti/io/interactions.hpp"

#include <fstream>
#include <set>

#include "tdti/error.hpp"
#include "tdti/util/tsv.hpp"

namespace tdti::io {

std::string_view to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
        case Split::Unassigned: return "unassigned";
    }
    return "?";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "valid") return Split::Valid;
    if (text == "test") return Split::Test;
    if (text.empty() || text == "unassigned") return Split::Unassigned;
    fail(ErrorKind::Format, "unknown split tag '" + std::string(text) + "'");
}

std::string_view to_string(TaskMode m) {
    return m == TaskMode::Classification ? "dti" : "dta";
}

TaskMode parse_task_mode(std::string_view text) {
    if (text == "dti" || text == "classification") return TaskMode::Classification;
    if (text == "dta" || text == "regression") return TaskMode::Regression;
    fail(ErrorKind::Usage, "unknown mode '" + std::string(text) + "' (expected dti or dta)");
}

std::vector<InteractionRecord> load_interactions(const std::string& path) {
    const TsvTable t = read_tsv(path);
    const auto c_drug = t.column("drug_id", path);
    const auto c_target = t.column("target_id", path);
    const auto c_pocket = t.find("pocket_id");
    const auto c_label = t.find("label");
    const auto c_aff = t.find("affinity");
    const auto c_split = t.find("split");

    std::vector<InteractionRecord> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = path + " row " + std::to_string(i + 1);
        InteractionRecord r;
        r.drug_id = row[c_drug];
        r.target_id = row[c_target];
        if (r.drug_id.empty() || r.target_id.empty()) fail(ErrorKind::Format, where + ": empty id");
        if (c_pocket && !row[*c_pocket].empty()) r.pocket_id = row[*c_pocket];
        if (c_label && !row[*c_label].empty()) {
            const auto v = parse_int(row[*c_label], where);
            if (v != 0 && v != 1) fail(ErrorKind::Format, where + ": label must be 0 or 1");
            r.label = static_cast<int>(v);
        }
        if (c_aff && !row[*c_aff].empty()) r.affinity = parse_real(row[*c_aff], where);
        if (c_split) r.split = parse_split(row[*c_split]);
        out.push_back(std::move(r));
    }
    return out;
}

void save_interactions(const std::vector<InteractionRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
    out << "drug_id\ttarget_id\tpocket_id\tlabel\taffinity\tsplit\n";
    for (const auto& r : records) {
        out << r.drug_id << '\t' << r.target_id << '\t' << r.pocket_id.value_or("") << '\t'
            << (r.label ? std::to_string(*r.label) : "") << '\t'
            << (r.affinity ? format_real(*r.affinity) : "") << '\t' << to_string(r.split) << '\n';
    }
}

std::vector<SmilesRecord> load_smiles(const std::string& path) {
    const TsvTable t = read_tsv(path);
    const auto c_id = t.column("drug_id", path);
    const auto c_smiles = t.column("smiles", path);
    std::vector<SmilesRecord> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back({row[c_id], row[c_smiles]});
    return out;
}

void save_smiles(const std::vector<SmilesRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
    out << "drug_id\tsmiles\n";
    for (const auto& r : records) out << r.drug_id << '\t' << r.smiles << '\n';
}

void check_mode(const std::vector<InteractionRecord>& records, TaskMode mode) {
    for (const auto& r : records) {
        const bool ok = mode == TaskMode::Classification ? r.label.has_value() : r.affinity.has_value();
        if (!ok) {
            fail(ErrorKind::Data, "pair (" + r.drug_id + ", " + r.target_id + ") lacks " +
                                      (mode == TaskMode::Classification ? "a label" : "an affinity"));
        }
    }
}

void validate_ids(const std::vector<InteractionRecord>& records, const EmbeddingStore& drugs,
                  const EmbeddingStore& targets, const EmbeddingStore* pockets) {
    std::set<std::string> missing;
    for (const auto& r : records) {
        if (!drugs.contains(r.drug_id)) missing.insert("drug:" + r.drug_id);
        if (!targets.contains(r.target_id)) missing.insert("target:" + r.target_id);
        if (pockets != nullptr) {
            if (!r.pocket_id) {
                missing.insert("pocket:<none for " + r.target_id + ">");
            } else if (!pockets->contains(*r.pocket_id)) {
                missing.insert("pocket:" + *r.pocket_id);
            }
        }
    }
    if (missing.empty()) return;
    std::string msg = "unresolved embedding ids:";
    std::size_t shown = 0;
    for (const auto& m : missing) {
        if (shown++ == 20) {
            msg += " ... (" + std::to_string(missing.size()) + " total)";
            break;
        }
        msg += " " + m;
    }
    fail(ErrorKind::Data, msg);
}

std::vector<InteractionRecord> select_split(const std::vector<InteractionRecord>& records, Split split) {
    std::vector<InteractionRecord> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(r);
    }
    return out;
}

}  // namespace tdti::io
