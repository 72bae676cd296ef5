#include "finsent/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "finsent/errors.hpp"

namespace finsent {

namespace {

// Length in bytes of the UTF-8 sequence starting at text[pos]; malformed
// bytes count as one.
std::size_t utf8_length(std::string_view text, std::size_t pos) {
    const auto lead = static_cast<unsigned char>(text[pos]);
    std::size_t len = 1;
    if ((lead & 0xE0) == 0xC0) len = 2;
    else if ((lead & 0xF0) == 0xE0) len = 3;
    else if ((lead & 0xF8) == 0xF0) len = 4;
    if (pos + len > text.size()) return 1;
    for (std::size_t i = 1; i < len; ++i) {
        if ((static_cast<unsigned char>(text[pos + i]) & 0xC0) != 0x80) return 1;
    }
    return len;
}

char32_t decode(std::string_view text, std::size_t pos, std::size_t len) {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[pos + i]); };
    switch (len) {
        case 2: return ((byte(0) & 0x1F) << 6) | (byte(1) & 0x3F);
        case 3: return ((byte(0) & 0x0F) << 12) | ((byte(1) & 0x3F) << 6) | (byte(2) & 0x3F);
        case 4:
            return ((byte(0) & 0x07) << 18) | ((byte(1) & 0x3F) << 12) | ((byte(2) & 0x3F) << 6) |
                   (byte(3) & 0x3F);
        default: return byte(0);
    }
}

bool is_unicode_space(char32_t cp) {
    return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
           (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F ||
           cp == 0x3000;
}

// Byte offsets of every code point start, plus the end offset.
std::vector<std::size_t> char_boundaries(std::string_view word) {
    std::vector<std::size_t> bounds;
    for (std::size_t pos = 0; pos < word.size(); pos += utf8_length(word, pos)) bounds.push_back(pos);
    bounds.push_back(word.size());
    return bounds;
}

}  // namespace

// --- Vocab -----------------------------------------------------------------

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) throw DataError("vocabulary entry " + std::to_string(i) + " is empty");
        if (!id_of_.emplace(tokens_[i], i).second) {
            throw DataError("vocabulary token '" + tokens_[i] + "' appears twice (id " + std::to_string(i) + ")");
        }
    }
    const auto special = [&](std::string_view tok) {
        auto it = id_of_.find(std::string(tok));
        if (it == id_of_.end()) throw DataError("vocabulary is missing special token " + std::string(tok));
        return it->second;
    };
    cls_ = special(kClsToken);
    sep_ = special(kSepToken);
    pad_ = special(kPadToken);
    unk_ = special(kUnkToken);
}

Vocab Vocab::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw ParseError(path.string(), line_no, "empty vocabulary line");
        tokens.push_back(std::move(line));
    }
    try {
        return Vocab(std::move(tokens));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

bool Vocab::contains(std::string_view token) const { return id_of_.contains(std::string(token)); }

std::size_t Vocab::id(std::string_view token) const {
    auto it = id_of_.find(std::string(token));
    return it == id_of_.end() ? unk_ : it->second;
}

// --- Tokenization ----------------------------------------------------------

std::vector<std::string> whitespace_split(std::string_view text) {
    std::vector<std::string> words;
    std::size_t start = std::string_view::npos;
    for (std::size_t pos = 0; pos < text.size();) {
        const std::size_t len = utf8_length(text, pos);
        if (is_unicode_space(decode(text, pos, len))) {
            if (start != std::string_view::npos) {
                words.emplace_back(text.substr(start, pos - start));
                start = std::string_view::npos;
            }
        } else if (start == std::string_view::npos) {
            start = pos;
        }
        pos += len;
    }
    if (start != std::string_view::npos) words.emplace_back(text.substr(start));
    return words;
}

std::vector<std::string> wordpiece(std::string_view word, const Vocab& vocab, std::size_t max_chars_per_word) {
    const auto bounds = char_boundaries(word);
    const std::size_t n_chars = bounds.size() - 1;
    if (n_chars == 0 || n_chars > max_chars_per_word) return {std::string(kUnkToken)};

    std::vector<std::string> pieces;
    std::size_t begin = 0;
    while (begin < n_chars) {
        std::size_t end = n_chars;
        std::string match;
        for (; end > begin; --end) {
            std::string candidate(word.substr(bounds[begin], bounds[end] - bounds[begin]));
            if (begin > 0) {
                candidate.insert(0, kContinuationPrefix);
            } else if (std::string_view(candidate).starts_with(kContinuationPrefix)) {
                continue;  // a word may not open with a continuation piece
            }
            if (vocab.contains(candidate)) {
                match = std::move(candidate);
                break;
            }
        }
        if (match.empty()) return {std::string(kUnkToken)};
        pieces.push_back(std::move(match));
        begin = end;
    }
    return pieces;
}

TokenSeq encode(std::string_view text, const Vocab& vocab, const TokenizerOptions& options) {
    if (options.max_len < 3) throw ConfigError("max_len must be at least 3");
    const std::size_t budget = options.max_len - 2;

    TokenSeq seq;
    seq.pieces.emplace_back(kClsToken);
    seq.word_index.push_back(TokenSeq::kNoWord);

    for (std::string& word : whitespace_split(text)) {
        if (seq.pieces.size() - 1 >= budget) break;
        const std::string normalized = options.lowercase ? ascii_lower(word) : word;
        const auto pieces = wordpiece(normalized, vocab, options.max_chars_per_word);
        const int index = static_cast<int>(seq.words.size());
        seq.words.push_back(std::move(word));
        for (const auto& piece : pieces) {
            if (seq.pieces.size() - 1 >= budget) break;
            seq.pieces.push_back(piece);
            seq.word_index.push_back(index);
        }
    }

    seq.pieces.emplace_back(kSepToken);
    seq.word_index.push_back(TokenSeq::kNoWord);
    seq.ids.reserve(seq.pieces.size());
    for (const auto& piece : seq.pieces) seq.ids.push_back(vocab.id(piece));
    return seq;
}

std::string join_pieces(const std::vector<std::string>& pieces) {
    std::string word;
    for (const auto& piece : pieces) {
        std::string_view view(piece);
        if (view.starts_with(kContinuationPrefix)) view.remove_prefix(kContinuationPrefix.size());
        word.append(view);
    }
    return word;
}

std::string ascii_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

}  // namespace finsent
