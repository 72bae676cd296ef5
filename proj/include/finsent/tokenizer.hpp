#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace finsent {

inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kContinuationPrefix = "##";

// Token list with dense ids. The four special tokens must be present.
class Vocab {
public:
    Vocab() = default;
    explicit Vocab(std::vector<std::string> tokens);

    // One token per line; the zero-based line number is the id.
    static Vocab load(const std::filesystem::path& path);

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(std::size_t id) const { return tokens_.at(id); }
    bool contains(std::string_view token) const;
    // Id of `token`, or the [UNK] id when absent.
    std::size_t id(std::string_view token) const;

    std::size_t cls_id() const { return cls_; }
    std::size_t sep_id() const { return sep_; }
    std::size_t pad_id() const { return pad_; }
    std::size_t unk_id() const { return unk_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> id_of_;
    std::size_t cls_ = 0, sep_ = 0, pad_ = 0, unk_ = 0;
};

struct TokenSeq {
    static constexpr int kNoWord = -1;

    std::vector<std::string> pieces;
    std::vector<std::size_t> ids;
    // Index into `words` of the whitespace word each piece came from;
    // kNoWord for special tokens.
    std::vector<int> word_index;
    std::vector<std::string> words;

    std::size_t size() const { return pieces.size(); }
};

struct TokenizerOptions {
    bool lowercase = false;
    std::size_t max_len = 64;
    // Longer words map straight to [UNK].
    std::size_t max_chars_per_word = 100;
};

std::vector<std::string> whitespace_split(std::string_view text);

// Greedy longest-match-first segmentation. Continuation pieces carry the
// "##" prefix; a word that cannot be fully covered becomes a single [UNK].
std::vector<std::string> wordpiece(std::string_view word, const Vocab& vocab,
                                   std::size_t max_chars_per_word = 100);

// [CLS] pieces... [SEP], truncated so the whole sequence fits in max_len.
TokenSeq encode(std::string_view text, const Vocab& vocab, const TokenizerOptions& options = {});

// Inverse of wordpiece for a fully known word: strips "##" and joins.
std::string join_pieces(const std::vector<std::string>& pieces);

std::string ascii_lower(std::string_view text);

}  // namespace finsent
