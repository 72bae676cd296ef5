#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace finsent {

// One labeled instance: where it was posted, which company or cashtag it is
// about, the text, and a gold sentiment score in [-1, 1].
struct Example {
    std::string source;
    std::string entity;
    std::string text;
    double score = 0.0;

    bool operator==(const Example&) const = default;
};

struct CorpusStats {
    std::size_t total = 0;
    double mean_words = 0.0;
    std::size_t count_negative = 0;     // score < 0
    std::size_t count_nonnegative = 0;  // score >= 0
};

// Removes http(s)://... links. When anything was removed, whitespace runs
// are collapsed to single spaces and the ends trimmed; text without links is
// returned unchanged.
std::string strip_urls(std::string_view text);

struct LoadOptions {
    // Strip links and drop rows whose text ends up empty.
    bool preprocess = true;
};

struct LoadedDataset {
    std::vector<Example> examples;
    std::size_t dropped_empty = 0;
};

// Tab-separated `source<TAB>entity<TAB>text<TAB>score`; '#' lines and blank
// lines are skipped.
LoadedDataset load_dataset(const std::filesystem::path& path, LoadOptions options = {});
LoadedDataset load_dataset(std::istream& in, const std::string& source_name, LoadOptions options = {});

// Inverse of load_dataset for already-clean examples. Rejects fields that
// would not survive the format (tabs, newlines, a leading '#').
void save_dataset(std::ostream& out, std::span<const Example> examples);
void save_dataset(const std::filesystem::path& path, std::span<const Example> examples);

CorpusStats corpus_stats(std::span<const Example> examples);

// Field names of the upstream JSON records. The text field may hold a string
// or an array of strings (joined with spaces); the score may be a number or
// a numeric string.
struct JsonFieldMap {
    std::string source = "source";
    std::string entity = "cashtag";
    std::string text = "spans";
    std::string score = "sentiment score";
    // Used when a record has no source field.
    std::string default_source;
};

std::vector<Example> examples_from_json(std::istream& in, const JsonFieldMap& fields);

}  // namespace finsent
