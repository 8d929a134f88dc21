#include "tdti/io/projections.hpp"

#include <fstream>

#include "tdti/error.hpp"
#include "tdti/util/tsv.hpp"

namespace tdti::io {

namespace {

model::Encoder& branch_for(model::Model& m, Modality modality) {
    switch (modality) {
        case Modality::Drug:
        case Modality::Peptide:
        case Modality::Rna: return m.drug_encoder();
        case Modality::Protein: return m.protein_encoder();
        case Modality::Pocket: return m.pocket_encoder();
    }
    fail(ErrorKind::Usage, "no encoder branch for modality");
}

}  // namespace

void export_projections(model::Model& model, const EmbeddingStore& store, const std::string& path) {
    model::Encoder& enc = branch_for(model, store.modality());
    if (store.width() != enc.first.in_dim()) {
        fail(ErrorKind::Shape, "store width " + std::to_string(store.width()) + " does not match encoder input " +
                                   std::to_string(enc.first.in_dim()));
    }
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write '" + path + "'");
    out << "id";
    for (Eigen::Index i = 0; i < enc.second.out_dim(); ++i) out << "\tv" << i;
    out << '\n';
    constexpr std::size_t kChunk = 512;
    const auto& recs = store.records();
    for (std::size_t start = 0; start < recs.size(); start += kChunk) {
        const std::size_t end = std::min(recs.size(), start + kChunk);
        nn::Tensor x(store.width(), static_cast<Eigen::Index>(end - start));
        for (std::size_t j = start; j < end; ++j) x.col(static_cast<Eigen::Index>(j - start)) = recs[j].vec;
        nn::Tape tape(false);
        const nn::Tensor y = enc.forward(tape.constant(x)).value();
        for (std::size_t j = start; j < end; ++j) {
            out << recs[j].id;
            for (Eigen::Index i = 0; i < y.rows(); ++i) out << '\t' << format_real(y(i, static_cast<Eigen::Index>(j - start)));
            out << '\n';
        }
    }
}

EmbeddingStore load_projections(const std::string& path, Modality modality) {
    const TsvTable t = read_tsv(path);
    const auto c_id = t.column("id", path);
    EmbeddingStore store(modality);
    for (const auto& row : t.rows) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(row.size() - 1));
        Eigen::Index k = 0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i != c_id) v(k++) = parse_real(row[i], path);
        }
        store.add(row[c_id], std::move(v));
    }
    return store;
}

}  // namespace tdti::io
