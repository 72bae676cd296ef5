#include "finsent/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <regex>

#include <json.hpp>

#include "finsent/errors.hpp"
#include "finsent/tokenizer.hpp"

namespace finsent {

namespace {

std::optional<double> parse_score(std::string_view text) {
    double value = 0.0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
    return value;
}

bool in_score_range(double v) { return v >= -1.0 && v <= 1.0; }

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

}  // namespace

std::string strip_urls(std::string_view text) {
    static const std::regex url(R"(https?://\S+)", std::regex::icase);
    std::string input(text);
    if (!std::regex_search(input, url)) return input;
    return join_words(whitespace_split(std::regex_replace(input, url, " ")));
}

LoadedDataset load_dataset(std::istream& in, const std::string& source_name, LoadOptions options) {
    LoadedDataset out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;

        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t pos; (pos = line.find('\t', start)) != std::string::npos; start = pos + 1) {
            fields.push_back(line.substr(start, pos - start));
        }
        fields.push_back(line.substr(start));
        if (fields.size() != 4) {
            throw ParseError(source_name, line_no,
                             "expected 4 tab-separated fields (source, entity, text, score), got " +
                                 std::to_string(fields.size()));
        }
        const auto score = parse_score(fields[3]);
        if (!score) throw ParseError(source_name, line_no, "invalid score '" + fields[3] + "'");
        if (!in_score_range(*score)) {
            throw ParseError(source_name, line_no, "score " + fields[3] + " outside [-1, 1]");
        }

        Example ex{std::move(fields[0]), std::move(fields[1]), std::move(fields[2]), *score};
        if (options.preprocess) {
            ex.text = strip_urls(ex.text);
            if (whitespace_split(ex.text).empty()) {
                ++out.dropped_empty;
                continue;
            }
        }
        out.examples.push_back(std::move(ex));
    }
    return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path, LoadOptions options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset " + path.string());
    return load_dataset(in, path.string(), options);
}

void save_dataset(std::ostream& out, std::span<const Example> examples) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        for (const std::string* field : {&ex.source, &ex.entity, &ex.text}) {
            if (field->find_first_of("\t\n\r") != std::string::npos) {
                throw DataError("example " + std::to_string(i) + ": field contains a tab or newline");
            }
        }
        if (!ex.source.empty() && ex.source.front() == '#') {
            throw DataError("example " + std::to_string(i) + ": source may not start with '#'");
        }
        if (!in_score_range(ex.score)) {
            throw DataError("example " + std::to_string(i) + ": score outside [-1, 1]");
        }
        char score[32];
        const auto end = std::to_chars(score, score + sizeof score, ex.score).ptr;
        out << ex.source << '\t' << ex.entity << '\t' << ex.text << '\t' << std::string_view(score, end - score)
            << '\n';
    }
}

void save_dataset(const std::filesystem::path& path, std::span<const Example> examples) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset " + path.string());
    save_dataset(out, examples);
}

CorpusStats corpus_stats(std::span<const Example> examples) {
    CorpusStats stats;
    std::size_t words = 0;
    for (const auto& ex : examples) {
        ++stats.total;
        words += whitespace_split(ex.text).size();
        if (ex.score < 0.0) ++stats.count_negative;
        else ++stats.count_nonnegative;
    }
    if (stats.total > 0) stats.mean_words = static_cast<double>(words) / static_cast<double>(stats.total);
    return stats;
}

std::vector<Example> examples_from_json(std::istream& in, const JsonFieldMap& fields) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw DataError("expected a JSON array of records");

    std::vector<Example> out;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        const auto fail = [i](const std::string& what) {
            throw DataError("record " + std::to_string(i) + ": " + what);
        };
        if (!rec.is_object()) fail("not an object");

        const auto string_field = [&](const std::string& name) -> std::string {
            if (!rec.contains(name)) fail("missing field '" + name + "'");
            const auto& v = rec[name];
            if (v.is_string()) return v.get<std::string>();
            if (v.is_number()) return v.dump();
            fail("field '" + name + "' is not a string");
            return {};
        };

        Example ex;
        if (rec.contains(fields.source)) ex.source = string_field(fields.source);
        else if (!fields.default_source.empty()) ex.source = fields.default_source;
        else fail("missing field '" + fields.source + "' and no default source given");
        ex.entity = string_field(fields.entity);

        if (!rec.contains(fields.text)) fail("missing field '" + fields.text + "'");
        const auto& text = rec[fields.text];
        std::vector<std::string> parts;
        if (text.is_string()) {
            parts.push_back(text.get<std::string>());
        } else if (text.is_array()) {
            for (const auto& p : text) {
                if (!p.is_string()) fail("field '" + fields.text + "' holds a non-string element");
                parts.push_back(p.get<std::string>());
            }
        } else {
            fail("field '" + fields.text + "' is neither a string nor an array of strings");
        }
        std::string joined;
        for (const auto& p : parts) joined += (joined.empty() ? "" : " ") + p;
        // The TSV format cannot carry tabs or newlines.
        ex.text = join_words(whitespace_split(joined));

        if (!rec.contains(fields.score)) fail("missing field '" + fields.score + "'");
        const auto& score = rec[fields.score];
        std::optional<double> value;
        if (score.is_number()) value = score.get<double>();
        else if (score.is_string()) value = parse_score(score.get<std::string>());
        if (!value) fail("field '" + fields.score + "' is not a number");
        if (!in_score_range(*value)) fail("score outside [-1, 1]");
        ex.score = *value;

        for (std::string* f : {&ex.source, &ex.entity}) {
            for (char& c : *f) {
                if (c == '\t' || c == '\n' || c == '\r') c = ' ';
            }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace finsent
