#include "fixtures.hpp"

#include <sys/wait.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace fixture {

std::filesystem::path path(const std::string& name) { return std::filesystem::path(FINSENT_FIXTURE_DIR) / name; }

std::filesystem::path cli() { return FINSENT_CLI_PATH; }

const Resources& resources() {
    static const Resources res{finsent::Vocab::load(path("vocab.txt")),
                               finsent::SentiLexicon::load(path("senti.tsv")),
                               finsent::MarketLexicon::load(path("market.tsv"))};
    return res;
}

finsent::ModelConfig small_config(std::size_t d_model, std::size_t n_stack) {
    finsent::ModelConfig config;
    config.d_model = d_model;
    config.n_stack_layers = n_stack;
    config.n_heads_base = 2;
    config.n_heads_stack = 2;
    config.head_hidden = 16;
    config.vocab_size = resources().vocab.size();
    return config;
}

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    dir_ = std::filesystem::temp_directory_path() /
           ("finsent-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(dir_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CommandResult run_cli(const std::string& args) {
    TempDir scratch;
    const auto out = scratch / "stdout";
    const auto err = scratch / "stderr";
    const std::string command =
        "'" + cli().string() + "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(command.c_str());
    CommandResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(out);
    result.err = read_file(err);
    return result;
}

}  // namespace fixture
