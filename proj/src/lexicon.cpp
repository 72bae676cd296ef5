#include "finsent/lexicon.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>

#include "finsent/errors.hpp"

namespace finsent {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find('\t', start)) != std::string_view::npos; start = pos + 1) {
        fields.push_back(line.substr(start, pos - start));
    }
    fields.push_back(line.substr(start));
    return fields;
}

std::optional<double> parse_double(std::string_view text) {
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

// Calls `handle(fields, line_no)` for each non-comment, non-blank line.
void for_each_record(const std::filesystem::path& path, std::size_t n_fields,
                     const std::function<void(const std::vector<std::string_view>&)>& handle) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon file " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split_tabs(line);
        if (fields.size() != n_fields || fields.front().empty()) {
            throw ParseError(path.string(), line_no,
                             "expected " + std::to_string(n_fields) + " tab-separated fields");
        }
        try {
            handle(fields);
        } catch (const ParseError&) {
            throw;
        } catch (const DataError& e) {
            throw ParseError(path.string(), line_no, e.what());
        }
    }
}

double number_field(std::string_view text, const char* what) {
    auto value = parse_double(text);
    if (!value) throw DataError(std::string("invalid ") + what + " '" + std::string(text) + "'");
    return *value;
}

}  // namespace

// --- SentiLexicon ----------------------------------------------------------

SentiLexicon SentiLexicon::load(const std::filesystem::path& path) {
    SentiLexicon lexicon;
    for_each_record(path, 3, [&](const auto& f) {
        lexicon.insert(f[0], number_field(f[1], "positive score"), number_field(f[2], "negative score"));
    });
    return lexicon;
}

void SentiLexicon::insert(std::string_view word, double pos, double neg) {
    if (!(pos >= 0.0 && pos <= 1.0) || !(neg >= 0.0 && neg <= 1.0)) {
        throw DataError("scores for '" + std::string(word) + "' must lie in [0, 1]");
    }
    if (pos + neg > 1.0 + 1e-9) {
        throw DataError("scores for '" + std::string(word) + "' sum to more than 1");
    }
    const SentiScores scores{pos, neg, std::max(0.0, 1.0 - pos - neg)};
    if (!entries_.emplace(ascii_lower(word), scores).second) {
        throw DataError("duplicate entry '" + std::string(word) + "'");
    }
}

std::optional<SentiScores> SentiLexicon::find(std::string_view word) const {
    auto it = entries_.find(ascii_lower(word));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

// --- MarketLexicon ---------------------------------------------------------

MarketLexicon MarketLexicon::load(const std::filesystem::path& path) {
    MarketLexicon lexicon;
    for_each_record(path, 2, [&](const auto& f) { lexicon.insert(f[0], number_field(f[1], "market score")); });
    return lexicon;
}

void MarketLexicon::insert(std::string_view token, double score) {
    if (!std::isfinite(score)) throw DataError("market score for '" + std::string(token) + "' is not finite");
    if (!entries_.emplace(ascii_lower(token), score).second) {
        throw DataError("duplicate entry '" + std::string(token) + "'");
    }
}

std::optional<double> MarketLexicon::find(std::string_view token) const {
    auto it = entries_.find(ascii_lower(token));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

// --- Features --------------------------------------------------------------

Tensor SentimentFeatures::to_tensor(std::size_t padded_rows) const {
    const std::size_t n = std::max(padded_rows, rows.size());
    std::vector<double> values(n * kSentimentFeatureWidth, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), values.begin() + i * kSentimentFeatureWidth);
    }
    return Tensor::from({n, kSentimentFeatureWidth}, std::move(values));
}

SentimentFeatures sentiment_features(const TokenSeq& seq, const SentiLexicon& senti, const MarketLexicon& market) {
    // Per-word rows first, then fan out to pieces.
    std::vector<std::array<double, kSentimentFeatureWidth>> per_word(seq.words.size());
    for (std::size_t w = 0; w < seq.words.size(); ++w) {
        auto& row = per_word[w];
        row.fill(0.0);
        if (auto s = senti.find(seq.words[w])) {
            row[0] = s->pos;
            row[1] = s->neg;
            row[2] = s->obj;
        }
        if (auto m = market.find(seq.words[w])) row[3] = *m;
    }

    SentimentFeatures features;
    features.rows.resize(seq.size(), {0.0, 0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const int w = seq.word_index[i];
        if (w != TokenSeq::kNoWord) features.rows[i] = per_word.at(static_cast<std::size_t>(w));
    }
    return features;
}

}  // namespace finsent
