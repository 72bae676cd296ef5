#include "finsent/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string_view>

#include "finsent/checkpoint.hpp"
#include "finsent/errors.hpp"
#include "finsent/lexicon.hpp"
#include "finsent/metrics.hpp"
#include "finsent/tokenizer.hpp"

namespace finsent {

namespace {

void require_file(const std::filesystem::path& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("no ") + what + " given");
    if (!std::filesystem::is_regular_file(path)) {
        throw DataError(std::string(what) + " not found: " + path.string());
    }
}

ModelConfig merged_config(ModelConfig base, const std::map<std::string, std::string>& overrides) {
    auto values = base.to_map();
    for (const auto& [key, value] : overrides) values[key] = value;
    return ModelConfig::from_map(values);
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

// ModelConfig::to_map key and the flag that overrides it.
constexpr std::pair<const char*, const char*> kModelFlags[] = {
    {"d_model", "d-model"},         {"n_stack_layers", "n-stack"}, {"n_base_layers", "n-base"},
    {"n_heads_base", "heads-base"}, {"n_heads_stack", "heads-stack"}, {"ffn_multiplier", "ffn-mult"},
    {"head_hidden", "head-hidden"}, {"max_len", "max-len"},         {"dropout", "dropout"},
    {"baseline", "baseline"},       {"lowercase", "lowercase"},
};

void write_header(std::ostream& out, const std::string& command, const RunConfig& run, const ModelConfig& model) {
    out << "# finsent " << command << '\n';
    std::istringstream lines(describe_run(run, model));
    for (std::string line; std::getline(lines, line);) {
        if (!line.empty()) out << "# " << line << '\n';
    }
}

// Vocabulary plus lexicons, loaded after checking every file up front.
struct Resources {
    Vocab vocab;
    SentiLexicon senti;
    MarketLexicon market;
};

Resources load_resources(const RunConfig& run, bool baseline) {
    require_file(run.vocab, "vocabulary file");
    if (!baseline || !run.senti_lexicon.empty()) require_file(run.senti_lexicon, "sentiment lexicon");
    if (!baseline || !run.market_lexicon.empty()) require_file(run.market_lexicon, "market lexicon");
    Resources res{Vocab::load(run.vocab), {}, {}};
    if (!run.senti_lexicon.empty()) res.senti = SentiLexicon::load(run.senti_lexicon);
    if (!run.market_lexicon.empty()) res.market = MarketLexicon::load(run.market_lexicon);
    return res;
}

TokenizerOptions tokenizer_options(const ModelConfig& config) {
    TokenizerOptions options;
    options.lowercase = config.lowercase;
    options.max_len = config.max_len;
    return options;
}

// Checkpoint config with command-line overrides, sized to the vocabulary.
Checkpoint load_model(const RunConfig& run, const Vocab& vocab) {
    auto config = merged_config(read_checkpoint_config(run.checkpoint), run.model_overrides);
    config.vocab_size = vocab.size();
    config.validate();
    return load_checkpoint(run.checkpoint, config);
}

std::string format_optional(const std::optional<double>& value) {
    if (!value) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *value);
    return buf;
}

// Unsectioned keys in a config file belong to the subcommand being run, and
// underscores in keys are accepted in place of dashes.
class SubcommandConfig : public CLI::ConfigBase {
public:
    explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        auto items = CLI::ConfigBase::from_config(input);
        const auto subs = app_->get_subcommands();
        for (auto& item : items) {
            std::replace(item.name.begin(), item.name.end(), '_', '-');
            if (item.parents.empty() && !subs.empty()) item.parents = {subs.front()->get_name()};
        }
        return items;
    }

private:
    const CLI::App* app_;
};

struct ModelFlags {
    std::string d_model, n_stack, n_base, heads_base, heads_stack, ffn_mult, head_hidden, max_len, dropout;
    bool baseline = false;
    bool lowercase = false;
};

struct ModelFlagOptions {
    std::vector<std::pair<std::string, CLI::Option*>> valued;
    CLI::Option* baseline = nullptr;
    CLI::Option* lowercase = nullptr;
};

ModelFlagOptions add_model_flags(CLI::App* sub, ModelFlags& flags) {
    ModelFlagOptions opts;
    const auto add = [&](const char* flag, const char* key, std::string& target, const char* help) {
        const char* type = std::string_view(key) == "dropout" ? "FLOAT" : "UINT";
        opts.valued.emplace_back(key, sub->add_option(flag, target, help)->type_name(type));
    };
    // Flag spellings below must agree with kModelFlags.
    add("--d-model", "d_model", flags.d_model, "Base encoder width (even)");
    add("--n-stack", "n_stack_layers", flags.n_stack, "Encoder layers in the sentiment stack (1-6)");
    add("--n-base", "n_base_layers", flags.n_base, "Encoder layers in the base encoder");
    add("--heads-base", "n_heads_base", flags.heads_base, "Attention heads per base layer");
    add("--heads-stack", "n_heads_stack", flags.heads_stack, "Attention heads per stack layer");
    add("--ffn-mult", "ffn_multiplier", flags.ffn_mult, "Feed-forward width as a multiple of the layer width");
    add("--head-hidden", "head_hidden", flags.head_hidden, "Hidden width of the regression head");
    add("--max-len", "max_len", flags.max_len, "Maximum sequence length including [CLS] and [SEP]");
    add("--dropout", "dropout", flags.dropout, "Dropout probability during training");
    opts.baseline = sub->add_flag("--baseline", flags.baseline, "[CLS]-only head on the base encoder");
    opts.lowercase = sub->add_flag("--lowercase", flags.lowercase, "Lowercase words before WordPiece");
    return opts;
}

std::map<std::string, std::string> model_overrides(const ModelFlagOptions& opts, const ModelFlags& flags) {
    std::map<std::string, std::string> out;
    for (const auto& [key, opt] : opts.valued) {
        if (opt->count() > 0) out[key] = opt->as<std::string>();
    }
    if (opts.baseline->count() > 0) out["baseline"] = flags.baseline ? "true" : "false";
    if (opts.lowercase->count() > 0) out["lowercase"] = flags.lowercase ? "true" : "false";
    return out;
}

void add_path_flags(CLI::App* sub, RunConfig& run) {
    sub->add_option("--vocab", run.vocab, "Vocabulary file, one token per line");
    sub->add_option("--senti", run.senti_lexicon, "Word lexicon: word<TAB>pos<TAB>neg");
    sub->add_option("--market", run.market_lexicon, "Market lexicon: token<TAB>score");
    sub->add_option("--checkpoint", run.checkpoint, "Model checkpoint");
    sub->add_option("--report", run.report, "Report file");
}

void add_train_flags(CLI::App* sub, RunConfig& run) {
    sub->add_option("--train", run.train_data, "Training data TSV");
    sub->add_option("--test", run.test_data, "Evaluation data TSV");
    sub->add_option("--epochs", run.train.epochs, "Training epochs");
    sub->add_option("--batch-size", run.train.batch_size, "Examples per batch");
    sub->add_option("--seed", run.train.seed, "Seed for initialization, shuffling and dropout");
    sub->add_option("--lr", run.train.learning_rate, "Adam learning rate");
    sub->add_option("--adam-eps", run.train.adam_epsilon, "Adam epsilon");
    sub->add_flag("--shuffle,!--no-shuffle", run.train.shuffle, "Reshuffle the training data every epoch")
        ->capture_default_str();
    sub->add_flag("--eval-each-epoch", run.train.eval_each_epoch, "Report cosine after every epoch");
}

std::string quoted(const std::filesystem::path& path) { return '"' + path.string() + '"'; }

}  // namespace

std::string describe_run(const RunConfig& run, const ModelConfig& model) {
    std::ostringstream out;
    const auto values = model.to_map();
    for (const auto& [key, flag] : kModelFlags) out << flag << '=' << values.at(key) << '\n';
    const std::pair<const char*, const std::filesystem::path*> paths[] = {
        {"vocab", &run.vocab},       {"senti", &run.senti_lexicon}, {"market", &run.market_lexicon},
        {"train", &run.train_data}, {"test", &run.test_data},       {"checkpoint", &run.checkpoint},
    };
    for (const auto& [flag, path] : paths) {
        if (!path->empty()) out << flag << '=' << quoted(*path) << '\n';
    }
    const auto shortest = [](double value) {
        char buf[32];
        return std::string(buf, std::to_chars(buf, buf + sizeof buf, value).ptr);
    };
    out << "epochs=" << run.train.epochs << '\n'
        << "batch-size=" << run.train.batch_size << '\n'
        << "seed=" << run.train.seed << '\n'
        << "lr=" << shortest(run.train.learning_rate) << '\n'
        << "adam-eps=" << shortest(run.train.adam_epsilon) << '\n'
        << "shuffle=" << (run.train.shuffle ? "true" : "false") << '\n'
        << "eval-each-epoch=" << (run.train.eval_each_epoch ? "true" : "false") << '\n';
    return out.str();
}

int cmd_train(const RunConfig& run, std::ostream& out) {
    require_file(run.train_data, "training data");
    if (!run.test_data.empty()) require_file(run.test_data, "test data");
    if (run.checkpoint.empty()) throw ConfigError("no checkpoint path given");
    auto config = merged_config(ModelConfig{}, run.model_overrides);
    const Resources res = load_resources(run, config.baseline);
    config.vocab_size = res.vocab.size();
    config.validate();
    run.train.validate();

    const auto train_set = load_dataset(run.train_data).examples;
    std::vector<Example> eval_set;
    if (!run.test_data.empty()) eval_set = load_dataset(run.test_data).examples;

    std::optional<std::ofstream> report;
    if (!run.report.empty()) {
        report = open_output(run.report);
        write_header(*report, "train", run, config);
    }

    const Featurizer featurizer(res.vocab, res.senti, res.market, tokenizer_options(config));
    auto params = ModelParams::initialize(config, run.train.seed);
    train(config, params, train_set, featurizer, run.train, eval_set, [&](const EpochRecord& record) {
        const auto line = format_epoch(record);
        out << line << '\n' << std::flush;
        if (report) *report << line << '\n' << std::flush;
    });
    save_checkpoint(run.checkpoint, config, params);
    return kExitOk;
}

int cmd_evaluate(const RunConfig& run, std::ostream& out) {
    require_file(run.checkpoint, "checkpoint");
    require_file(run.test_data, "test data");
    const auto stored = merged_config(read_checkpoint_config(run.checkpoint), run.model_overrides);
    const Resources res = load_resources(run, stored.baseline);
    const auto model = load_model(run, res.vocab);

    const auto test_set = load_dataset(run.test_data).examples;
    const Featurizer featurizer(res.vocab, res.senti, res.market, tokenizer_options(model.config));
    const auto inputs = featurize(test_set, featurizer);
    const auto predicted = predict_all(inputs, model.params, model.config);
    std::vector<double> gold;
    gold.reserve(inputs.size());
    for (const auto& item : inputs) gold.push_back(item.gold);

    const auto result = evaluate_predictions(PredictionSet::complete(gold, predicted), &std::cerr);
    result.write(out);
    if (!run.report.empty()) {
        auto report = open_output(run.report);
        write_header(report, "evaluate", run, model.config);
        result.write(report);
    }
    return kExitOk;
}

int cmd_predict(const RunConfig& run, const std::string& text, const std::string& /*entity*/, std::ostream& out) {
    require_file(run.checkpoint, "checkpoint");
    const auto stored = merged_config(read_checkpoint_config(run.checkpoint), run.model_overrides);
    const Resources res = load_resources(run, stored.baseline);
    const auto model = load_model(run, res.vocab);
    const Featurizer featurizer(res.vocab, res.senti, res.market, tokenizer_options(model.config));
    const double score = predict_score(featurizer(strip_urls(text)), model.params, model.config);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", score);
    out << buf << '\n';
    return kExitOk;
}

int cmd_stats(const std::filesystem::path& data, std::ostream& out) {
    require_file(data, "dataset");
    const auto loaded = load_dataset(data, LoadOptions{.preprocess = false});
    const auto stats = corpus_stats(loaded.examples);
    char mean[32];
    std::snprintf(mean, sizeof mean, "%.2f", stats.mean_words);
    out << "total\t" << stats.total << '\n'
        << "mean_words\t" << mean << '\n'
        << "count_negative\t" << stats.count_negative << '\n'
        << "count_nonnegative\t" << stats.count_nonnegative << '\n';
    return kExitOk;
}

int cmd_convert(const std::filesystem::path& input, const std::filesystem::path& output, const JsonFieldMap& fields,
                std::ostream& out) {
    require_file(input, "input file");
    if (output.empty()) throw ConfigError("no output path given");
    std::ifstream in(input);
    if (!in) throw DataError("cannot open " + input.string());
    auto examples = examples_from_json(in, fields);
    save_dataset(output, examples);
    out << "wrote " << examples.size() << " examples to " << output.string() << '\n';
    return kExitOk;
}

int cmd_ablate(const RunConfig& run, std::ostream& out, std::ostream& err) {
    require_file(run.train_data, "training data");
    if (!run.test_data.empty()) require_file(run.test_data, "test data");
    auto overrides = run.model_overrides;
    overrides.erase("baseline");
    overrides.erase("n_stack_layers");
    const auto common = merged_config(ModelConfig{}, overrides);
    const Resources res = load_resources(run, false);

    const auto train_set = load_dataset(run.train_data).examples;
    const auto eval_set = run.test_data.empty() ? train_set : load_dataset(run.test_data).examples;

    std::vector<std::pair<std::string, std::optional<double>>> rows;
    for (std::size_t n = 0; n <= 6; ++n) {
        auto config = common;
        config.vocab_size = res.vocab.size();
        config.baseline = n == 0;
        if (n > 0) config.n_stack_layers = n;
        config.validate();
        const std::string name = n == 0 ? "Base" : "Base+" + std::to_string(n) + "xTransf";
        err << "training " << name << '\n' << std::flush;

        const Featurizer featurizer(res.vocab, res.senti, res.market, tokenizer_options(config));
        auto params = ModelParams::initialize(config, run.train.seed);
        train(config, params, train_set, featurizer, run.train);
        const auto inputs = featurize(eval_set, featurizer);
        const auto predicted = predict_all(inputs, params, config);
        std::vector<double> gold;
        for (const auto& item : inputs) gold.push_back(item.gold);
        rows.emplace_back(name, evaluate_predictions(PredictionSet::complete(gold, predicted)).cosine);
    }

    std::ostringstream table;
    table << "model\tcosine\n";
    for (const auto& [name, cosine] : rows) table << name << '\t' << format_optional(cosine) << '\n';
    out << table.str();
    if (!run.report.empty()) {
        auto report = open_output(run.report);
        write_header(report, "ablate", run, common);
        report << table.str();
    }
    return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical Transformer sentiment regression for financial text", "finsent"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
    app.config_formatter(std::make_shared<SubcommandConfig>(&app));
    app.allow_config_extras(CLI::config_extras_mode::error);

    RunConfig run;
    ModelFlags flags;
    std::vector<std::pair<CLI::App*, ModelFlagOptions>> model_options;

    auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on labeled data");
    auto* predict_cmd = app.add_subcommand("predict", "Score one text");
    auto* ablate_cmd = app.add_subcommand("ablate", "Compare the baseline with 1 to 6 stack layers");
    for (auto* sub : {train_cmd, eval_cmd, predict_cmd, ablate_cmd}) {
        sub->fallthrough();
        add_path_flags(sub, run);
        model_options.emplace_back(sub, add_model_flags(sub, flags));
    }
    add_train_flags(train_cmd, run);
    add_train_flags(ablate_cmd, run);
    eval_cmd->add_option("--test", run.test_data, "Evaluation data TSV");

    std::string text, entity;
    predict_cmd->add_option("--text", text, "Text to score")->required();
    predict_cmd->add_option("--entity", entity, "Company or cashtag the text is about");

    std::filesystem::path stats_data;
    auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics of a dataset TSV");
    stats_cmd->add_option("--data", stats_data, "Dataset TSV")->required();

    std::filesystem::path convert_in, convert_out;
    JsonFieldMap fields;
    auto* convert_cmd = app.add_subcommand("convert", "Convert a JSON array of records to dataset TSV");
    convert_cmd->add_option("--input", convert_in, "JSON file")->required();
    convert_cmd->add_option("--output", convert_out, "TSV file to write")->required();
    convert_cmd->add_option("--source-field", fields.source, "Field holding the source platform")->capture_default_str();
    convert_cmd->add_option("--entity-field", fields.entity, "Field holding the company or cashtag")->capture_default_str();
    convert_cmd->add_option("--text-field", fields.text, "Field holding the text")->capture_default_str();
    convert_cmd->add_option("--score-field", fields.score, "Field holding the gold score")->capture_default_str();
    convert_cmd->add_option("--default-source", fields.default_source, "Source used when a record has none");
    stats_cmd->fallthrough();
    convert_cmd->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        for (const auto& [sub, opts] : model_options) {
            if (sub->parsed()) {
                run.model_overrides = model_overrides(opts, flags);
            }
        }
        if (train_cmd->parsed()) return cmd_train(run, out);
        if (eval_cmd->parsed()) return cmd_evaluate(run, out);
        if (predict_cmd->parsed()) return cmd_predict(run, text, entity, out);
        if (ablate_cmd->parsed()) return cmd_ablate(run, out, err);
        if (stats_cmd->parsed()) return cmd_stats(stats_data, out);
        if (convert_cmd->parsed()) return cmd_convert(convert_in, convert_out, fields, out);
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "finsent: error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "finsent: error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "finsent: error: " << e.what() << '\n';
        return kExitData;
    }
}

}  // namespace finsent
