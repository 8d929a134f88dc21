#include "tdti/model/tokenizer.hpp"

#include <algorithm>

#include "tdti/error.hpp"

namespace tdti::model {

namespace {
constexpr std::string_view kDefaultChars = "#%()+-./0123456789:=@BCFHIKLMNOPRSTVZ[\\]abcdeghilnoprstuy";
}

Vocabulary::Vocabulary() : Vocabulary(std::string(kDefaultChars)) {}

Vocabulary::Vocabulary(std::string chars) : chars_(std::move(chars)) {
    lookup_.fill(kUnk);
    for (std::size_t i = 0; i < chars_.size(); ++i) {
        auto& slot = lookup_[static_cast<unsigned char>(chars_[i])];
        if (slot != kUnk) fail(ErrorKind::Config, std::string("duplicate vocabulary character '") + chars_[i] + "'");
        slot = kNumSpecial + static_cast<int>(i);
    }
}

int Vocabulary::id(char c) const { return lookup_[static_cast<unsigned char>(c)]; }

char Vocabulary::symbol(int id) const {
    if (id < kNumSpecial || id >= size()) return '?';
    return chars_[static_cast<std::size_t>(id - kNumSpecial)];
}

int TokenSeq::scorable() const {
    return static_cast<int>(std::count_if(ids.begin(), ids.end(), [](int t) { return t != kPad; }));
}

TokenSeq tokenize(std::string_view smiles, const Vocabulary& vocab, int max_len) {
    if (smiles.empty()) fail(ErrorKind::Data, "cannot tokenize an empty SMILES string");
    if (max_len < 3) fail(ErrorKind::Config, "max_len must leave room for BOS, one character and EOS");
    TokenSeq seq;
    seq.ids.assign(static_cast<std::size_t>(max_len), kPad);
    const std::size_t room = static_cast<std::size_t>(max_len) - 2;
    seq.truncated = smiles.size() > room;
    const std::size_t n = std::min(room, smiles.size());
    seq.ids[0] = kBos;
    for (std::size_t i = 0; i < n; ++i) seq.ids[i + 1] = vocab.id(smiles[i]);
    seq.ids[n + 1] = kEos;
    return seq;
}

std::string detokenize(const TokenSeq& seq, const Vocabulary& vocab) {
    std::string out;
    for (int t : seq.ids) {
        if (t == kBos) continue;
        if (t == kEos || t == kPad) break;
        out += vocab.symbol(t);
    }
    return out;
}

Eigen::MatrixXi token_matrix(const std::vector<TokenSeq>& seqs) {
    if (seqs.empty()) return Eigen::MatrixXi(0, 0);
    const auto len = static_cast<Eigen::Index>(seqs.front().ids.size());
    Eigen::MatrixXi m(len, static_cast<Eigen::Index>(seqs.size()));
    for (std::size_t j = 0; j < seqs.size(); ++j) {
        if (static_cast<Eigen::Index>(seqs[j].ids.size()) != len) fail(ErrorKind::Shape, "token sequences differ in length");
        for (Eigen::Index i = 0; i < len; ++i) m(i, static_cast<Eigen::Index>(j)) = seqs[j].ids[static_cast<std::size_t>(i)];
    }
    return m;
}

}  // namespace tdti::model
