#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "finsent/tensor.hpp"
#include "finsent/tokenizer.hpp"

namespace finsent {

struct SentiScores {
    double pos = 0.0;
    double neg = 0.0;
    double obj = 0.0;
};

// Word-level positivity / negativity / objectivity triples (SentiWordNet
// style). Keys are stored lowercased.
class SentiLexicon {
public:
    // `word<TAB>pos<TAB>neg` per line; obj = 1 - pos - neg.
    static SentiLexicon load(const std::filesystem::path& path);

    // Throws DataError on out-of-range scores or a duplicate word.
    void insert(std::string_view word, double pos, double neg);
    std::optional<SentiScores> find(std::string_view word) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::unordered_map<std::string, SentiScores> entries_;
};

// Token-level signed market sentiment (NTUSD style). Keys are stored
// lowercased.
class MarketLexicon {
public:
    // `token<TAB>score` per line.
    static MarketLexicon load(const std::filesystem::path& path);

    void insert(std::string_view token, double score);
    std::optional<double> find(std::string_view token) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::unordered_map<std::string, double> entries_;
};

inline constexpr std::size_t kSentimentFeatureWidth = 4;

// One (Pos, Neg, Obj, market) row per token piece.
struct SentimentFeatures {
    std::vector<std::array<double, kSentimentFeatureWidth>> rows;

    std::size_t size() const { return rows.size(); }
    // [rows × 4]; rows beyond size() (up to `padded_rows`) are zero.
    Tensor to_tensor(std::size_t padded_rows = 0) const;
};

// Every piece inherits the scores of its whole originating word; words
// missing from a lexicon get zeros in that lexicon's slots and special
// tokens get an all-zero row.
SentimentFeatures sentiment_features(const TokenSeq& seq, const SentiLexicon& senti, const MarketLexicon& market);

}  // namespace finsent
