#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace tdti::model {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecial = 4;

/// Character vocabulary. Ids 0..3 are PAD, BOS, EOS, UNK; character i of
/// `chars` maps to id 4 + i.
class Vocabulary {
public:
    /// Default SMILES character set.
    Vocabulary();
    explicit Vocabulary(std::string chars);

    int size() const { return kNumSpecial + static_cast<int>(chars_.size()); }
    const std::string& chars() const { return chars_; }
    int id(char c) const;
    /// Inverse of id() for character tokens; '?' for specials and UNK.
    char symbol(int id) const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.chars_ == b.chars_; }

private:
    std::string chars_;
    std::array<int, 256> lookup_{};
};

struct TokenSeq {
    std::vector<int> ids;  // always max_len long, PAD-suffixed
    bool truncated = false;

    int scorable() const;  // non-PAD count
};

/// BOS + characters + EOS, padded to max_len. Over-long input keeps its
/// prefix and sets `truncated`.
TokenSeq tokenize(std::string_view smiles, const Vocabulary& vocab, int max_len);
std::string detokenize(const TokenSeq& seq, const Vocabulary& vocab);

/// Packs sequences as columns (max_len x n).
Eigen::MatrixXi token_matrix(const std::vector<TokenSeq>& seqs);

}  // namespace tdti::model
