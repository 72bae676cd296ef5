#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "finsent/dataset.hpp"
#include "finsent/model.hpp"
#include "finsent/training.hpp"

namespace finsent {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Everything one command needs: model overrides keyed like
// ModelConfig::to_map, training settings, and the files involved.
struct RunConfig {
    std::map<std::string, std::string> model_overrides;
    TrainConfig train;
    std::filesystem::path vocab;
    std::filesystem::path senti_lexicon;
    std::filesystem::path market_lexicon;
    std::filesystem::path train_data;
    std::filesystem::path test_data;
    std::filesystem::path checkpoint;
    std::filesystem::path report;
};

// Effective settings as `key=value` lines keyed by flag name, so a report
// header with its "# " prefixes removed is itself a valid --config file.
std::string describe_run(const RunConfig& run, const ModelConfig& model);

// Each command returns a process exit code and lets module errors propagate;
// run_cli maps them to codes and a one-line diagnostic.
int cmd_train(const RunConfig& run, std::ostream& out);
int cmd_evaluate(const RunConfig& run, std::ostream& out);
int cmd_predict(const RunConfig& run, const std::string& text, const std::string& entity, std::ostream& out);
int cmd_stats(const std::filesystem::path& data, std::ostream& out);
int cmd_convert(const std::filesystem::path& input, const std::filesystem::path& output, const JsonFieldMap& fields,
                std::ostream& out);
// Trains the baseline and n_stack = 1..6 on the training data and prints a
// `model<TAB>cosine` table scored on the test data (training data when no
// test file is given).
int cmd_ablate(const RunConfig& run, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace finsent
