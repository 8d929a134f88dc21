#include "tdti/io/embeddings.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "tdti/error.hpp"

namespace tdti::io {

namespace {

constexpr std::array<std::pair<Modality, std::string_view>, 5> kModalityNames{{
    {Modality::Drug, "drug"},
    {Modality::Protein, "protein"},
    {Modality::Pocket, "pocket"},
    {Modality::Peptide, "peptide"},
    {Modality::Rna, "rna"},
}};

static_assert(std::endian::native == std::endian::little, "binary embedding I/O assumes a little-endian host");

template <typename T>
void write_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
bool read_le(std::istream& in, T& v) {
    return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

bool has_binary_magic(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    return in.gcount() == 8 && std::string_view(magic.data(), 8) == kEmbeddingMagic;
}

EmbeddingStore read_binary(const std::string& path, Modality modality) {
    std::ifstream in(path, std::ios::binary);
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    std::uint32_t width = 0;
    if (!read_le(in, width) || width == 0) fail(ErrorKind::Format, path + ": bad width header");

    EmbeddingStore store(modality);
    std::vector<float> buf(width);
    while (true) {
        std::uint16_t len = 0;
        if (!read_le(in, len)) break;
        std::string id(len, '\0');
        if (!in.read(id.data(), len)) fail(ErrorKind::Format, path + ": truncated id");
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(width * sizeof(float)))) {
            fail(ErrorKind::Format, path + ": truncated vector for '" + id + "'");
        }
        Eigen::VectorXd vec(width);
        for (std::uint32_t i = 0; i < width; ++i) vec(i) = static_cast<double>(buf[i]);
        store.add(std::move(id), std::move(vec));
    }
    return store;
}

EmbeddingStore read_jsonl(const std::string& path, std::optional<Modality> modality) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    std::optional<EmbeddingStore> store;
    if (modality) store.emplace(*modality);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Format, where + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("kind") || !j.contains("vec") ||
            !j["id"].is_string() || !j["kind"].is_string() || !j["vec"].is_array()) {
            fail(ErrorKind::Format, where + ": expected {\"id\", \"kind\", \"vec\"}");
        }
        const auto id = j["id"].get<std::string>();
        const Modality kind = parse_modality(j["kind"].get<std::string>());
        if (!store) store.emplace(kind);
        if (kind != store->modality()) {
            fail(ErrorKind::Format, where + ": record '" + id + "' has kind " + std::string(to_string(kind)) +
                                        ", expected " + std::string(to_string(store->modality())));
        }
        const auto& arr = j["vec"];
        Eigen::VectorXd vec(static_cast<Eigen::Index>(arr.size()));
        for (std::size_t i = 0; i < arr.size(); ++i) {
            if (!arr[i].is_number()) fail(ErrorKind::Format, where + ": non-numeric entry in '" + id + "'");
            vec(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
        }
        try {
            store->add(id, std::move(vec));
        } catch (const Error& e) {
            fail(ErrorKind::Format, where + ": " + e.what());
        }
    }
    if (!store) store.emplace(Modality::Drug);
    return std::move(*store);
}

}  // namespace

std::string_view to_string(Modality m) {
    for (const auto& [k, name] : kModalityNames) {
        if (k == m) return name;
    }
    return "?";
}

Modality parse_modality(std::string_view text) {
    for (const auto& [k, name] : kModalityNames) {
        if (name == text) return k;
    }
    fail(ErrorKind::Format, "unknown modality '" + std::string(text) + "'");
}

void EmbeddingStore::add(std::string id, Eigen::VectorXd vec) {
    if (vec.size() == 0) fail(ErrorKind::Format, "embedding '" + id + "' is empty");
    if (records_.empty()) {
        width_ = vec.size();
    } else if (vec.size() != width_) {
        fail(ErrorKind::Format, "embedding '" + id + "' has width " + std::to_string(vec.size()) +
                                    ", store width is " + std::to_string(width_));
    }
    if (!vec.allFinite()) fail(ErrorKind::Format, "embedding '" + id + "' has a non-finite entry");
    if (index_.count(id) != 0) fail(ErrorKind::Format, "duplicate embedding id '" + id + "'");
    if (id.size() > 0xFFFF) fail(ErrorKind::Format, "embedding id longer than 65535 bytes");
    index_.emplace(id, records_.size());
    records_.push_back(EmbeddingRecord{std::move(id), modality_, std::move(vec)});
}

const Eigen::VectorXd& EmbeddingStore::at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) {
        fail(ErrorKind::Data, "unknown " + std::string(to_string(modality_)) + " id '" + id + "'");
    }
    return records_[it->second].vec;
}

nn::Tensor EmbeddingStore::gather(std::span<const std::string> ids) const {
    nn::Tensor out(width_, static_cast<Eigen::Index>(ids.size()));
    for (std::size_t j = 0; j < ids.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = at(ids[j]);
    return out;
}

bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    if (a.modality_ != b.modality_ || a.records_.size() != b.records_.size()) return false;
    for (std::size_t i = 0; i < a.records_.size(); ++i) {
        const auto& ra = a.records_[i];
        const auto& rb = b.records_[i];
        if (ra.id != rb.id || ra.vec.size() != rb.vec.size()) return false;
        for (Eigen::Index k = 0; k < ra.vec.size(); ++k) {
            if (std::bit_cast<std::uint64_t>(ra.vec(k)) != std::bit_cast<std::uint64_t>(rb.vec(k))) return false;
        }
    }
    return true;
}

EmbeddingStore load_embeddings(const std::string& path, Modality modality) {
    if (has_binary_magic(path)) return read_binary(path, modality);
    return read_jsonl(path, modality);
}

EmbeddingStore load_embeddings(const std::string& path) {
    if (has_binary_magic(path)) return read_binary(path, Modality::Drug);
    return read_jsonl(path, std::nullopt);
}

void save_embeddings_jsonl(const EmbeddingStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
    for (const auto& r : store.records()) {
        nlohmann::json j;
        j["id"] = r.id;
        j["kind"] = to_string(r.modality);
        j["vec"] = std::vector<double>(r.vec.data(), r.vec.data() + r.vec.size());
        out << j.dump() << '\n';
    }
}

void save_embeddings_binary(const EmbeddingStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
    out.write(kEmbeddingMagic.data(), static_cast<std::streamsize>(kEmbeddingMagic.size()));
    write_le(out, static_cast<std::uint32_t>(store.width()));
    for (const auto& r : store.records()) {
        write_le(out, static_cast<std::uint16_t>(r.id.size()));
        out.write(r.id.data(), static_cast<std::streamsize>(r.id.size()));
        for (Eigen::Index i = 0; i < r.vec.size(); ++i) write_le(out, static_cast<float>(r.vec(i)));
    }
}

Eigen::VectorXd to_f32_precision(const Eigen::VectorXd& v) {
    return v.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
}

}  // namespace tdti::io
