#pragma once

#include <string>

#include "tdti/io/embeddings.hpp"
#include "tdti/model/model.hpp"

namespace tdti::io {

/// Writes `id, v0..v{n-1}` rows of the branch projection matching the store's
/// modality: drug-like stores through the drug encoder, proteins through the
/// protein encoder (no pocket aggregation), pockets through the pocket
/// encoder. Coordinates are for external plotting (t-SNE etc.).
void export_projections(model::Model& model, const EmbeddingStore& store, const std::string& path);

/// Parses an export back into a store of the given modality.
EmbeddingStore load_projections(const std::string& path, Modality modality);

}  // namespace tdti::io
