#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "finsent/lexicon.hpp"
#include "finsent/model.hpp"
#include "finsent/tokenizer.hpp"

namespace fixture {

std::filesystem::path path(const std::string& name);
std::filesystem::path cli();

// The shipped fixture vocabulary and lexicons.
struct Resources {
    finsent::Vocab vocab;
    finsent::SentiLexicon senti;
    finsent::MarketLexicon market;
};
const Resources& resources();

// A small model config sized to the fixture vocabulary.
finsent::ModelConfig small_config(std::size_t d_model = 8, std::size_t n_stack = 2);

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    std::filesystem::path operator/(const std::string& name) const { return dir_ / name; }
    const std::filesystem::path& path() const { return dir_; }

private:
    std::filesystem::path dir_;
};

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs the CLI binary with `args` (already shell-quoted as needed).
CommandResult run_cli(const std::string& args);

std::string read_file(const std::filesystem::path& path);

}  // namespace fixture
