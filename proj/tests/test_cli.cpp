#include <gtest/gtest.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "finsent/checkpoint.hpp"
#include "finsent/cli.hpp"
#include "finsent/dataset.hpp"
#include "fixtures.hpp"

using namespace finsent;

namespace {

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

std::string resources() {
    return " --vocab " + q(fixture::path("vocab.txt")) + " --senti " + q(fixture::path("senti.tsv")) + " --market " +
           q(fixture::path("market.tsv"));
}

// Small, fast model settings shared by the tests below.
const std::string kSmall = " --d-model 8 --heads-base 2 --heads-stack 2 --head-hidden 8 --n-base 1";

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::string shortest(double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
}

}  // namespace

TEST(Cli, TrainWritesCheckpointAndTabSeparatedReport) {
    fixture::TempDir dir;
    const auto r = fixture::run_cli("train" + resources() + " --train " + q(fixture::path("train.tsv")) +
                                    " --n-stack 5 --d-model 8 --heads-base 2 --heads-stack 2 --epochs 2 --checkpoint " +
                                    q(dir / "m.ckpt") + " --report " + q(dir / "report.txt"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "m.ckpt"));
    EXPECT_EQ(read_checkpoint_config(dir / "m.ckpt").n_stack_layers, 5u);
    const auto out = lines(r.out);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].rfind("1\t", 0), 0u) << out[0];
    EXPECT_EQ(out[1].rfind("2\t", 0), 0u) << out[1];

    const auto report = lines(fixture::read_file(dir / "report.txt"));
    ASSERT_GE(report.size(), 3u);
    EXPECT_EQ(report.front(), "# finsent train");
    EXPECT_NE(fixture::read_file(dir / "report.txt").find("# n-stack=5\n"), std::string::npos);
    EXPECT_EQ(std::vector<std::string>(report.end() - 2, report.end()), out);
}

TEST(Cli, MissingVocabularyNamesThePath) {
    fixture::TempDir dir;
    const auto r = fixture::run_cli("train --vocab /no/such/vocab.txt --senti " + q(fixture::path("senti.tsv")) +
                                    " --market " + q(fixture::path("market.tsv")) + " --train " +
                                    q(fixture::path("train.tsv")) + " --checkpoint " + q(dir / "m.ckpt"));
    EXPECT_EQ(r.exit_code, kExitData);
    EXPECT_NE(r.err.find("/no/such/vocab.txt"), std::string::npos) << r.err;
    EXPECT_EQ(lines(r.err).size(), 1u) << r.err;
    EXPECT_FALSE(std::filesystem::exists(dir / "m.ckpt"));
}

TEST(Cli, ZeroEpochsSavesTheInitialization) {
    fixture::TempDir dir;
    const auto r = fixture::run_cli("train" + resources() + kSmall + " --train " + q(fixture::path("train.tsv")) +
                                    " --epochs 0 --seed 42 --checkpoint " + q(dir / "m.ckpt"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    const auto config = read_checkpoint_config(dir / "m.ckpt");
    std::ostringstream expected;
    save_checkpoint(expected, config, ModelParams::initialize(config, 42));
    EXPECT_EQ(fixture::read_file(dir / "m.ckpt"), expected.str());
}

TEST(Cli, TrainingIsDeterministicPerSeed) {
    fixture::TempDir dir;
    const std::string common =
        "train" + resources() + kSmall + " --train " + q(fixture::path("train.tsv")) + " --epochs 2 --seed 5";
    const auto a = fixture::run_cli(common + " --checkpoint " + q(dir / "a.ckpt"));
    const auto b = fixture::run_cli(common + " --checkpoint " + q(dir / "b.ckpt"));
    ASSERT_EQ(a.exit_code, 0) << a.err;
    ASSERT_EQ(b.exit_code, 0) << b.err;
    EXPECT_EQ(a.out, b.out);
    EXPECT_EQ(fixture::read_file(dir / "a.ckpt"), fixture::read_file(dir / "b.ckpt"));
}

TEST(Cli, EvaluatePrintsPerfectCosineForSelfConsistentGold) {
    fixture::TempDir dir;
    ASSERT_EQ(fixture::run_cli("train" + resources() + kSmall + " --train " + q(fixture::path("train.tsv")) +
                               " --epochs 1 --checkpoint " + q(dir / "m.ckpt"))
                  .exit_code,
              0);
    // Gold scores equal to the model's own predictions.
    const auto model = load_checkpoint(dir / "m.ckpt");
    const auto& res = fixture::resources();
    const Featurizer feat(res.vocab, res.senti, res.market, {.max_len = model.config.max_len});
    std::ofstream out(dir / "gold.tsv");
    for (const auto& ex : load_dataset(fixture::path("test.tsv")).examples) {
        out << ex.source << '\t' << ex.entity << '\t' << ex.text << '\t'
            << shortest(predict_score(feat(ex.text), model.params, model.config)) << '\n';
    }
    out.close();

    const auto r = fixture::run_cli("evaluate" + resources() + " --test " + q(dir / "gold.tsv") + " --checkpoint " +
                                    q(dir / "m.ckpt") + " --report " + q(dir / "eval.txt"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto out_lines = lines(r.out);
    ASSERT_EQ(out_lines.size(), 6u) << r.out;
    EXPECT_EQ(out_lines[0], "cosine\t1.000000");
    EXPECT_EQ(out_lines[1], "score\t1.000000");
    EXPECT_EQ(out_lines[2].rfind("cosine_positive\t", 0), 0u);
    EXPECT_EQ(out_lines[3].rfind("cosine_negative\t", 0), 0u);
    EXPECT_EQ(out_lines[4], "n_answered\t32");
    EXPECT_EQ(out_lines[5], "n_gold\t32");
    const auto report = fixture::read_file(dir / "eval.txt");
    EXPECT_NE(report.find("# finsent evaluate\n"), std::string::npos);
    EXPECT_NE(report.find(r.out), std::string::npos);
}

TEST(Cli, BaselineModeRunsWithoutLexicons) {
    fixture::TempDir dir;
    const std::string vocab = " --vocab " + q(fixture::path("vocab.txt"));
    auto r = fixture::run_cli("train" + vocab + kSmall + " --baseline --train " + q(fixture::path("train.tsv")) +
                              " --epochs 1 --checkpoint " + q(dir / "m.ckpt"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(read_checkpoint_config(dir / "m.ckpt").baseline);
    r = fixture::run_cli("evaluate" + vocab + " --test " + q(fixture::path("test.tsv")) + " --checkpoint " +
                         q(dir / "m.ckpt"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.out.find("cosine_positive\t"), std::string::npos);
    EXPECT_NE(r.out.find("cosine_negative\t"), std::string::npos);
    // The full model needs both lexicons.
    r = fixture::run_cli("train" + vocab + kSmall + " --train " + q(fixture::path("train.tsv")) +
                         " --epochs 1 --checkpoint " + q(dir / "full.ckpt"));
    EXPECT_EQ(r.exit_code, kExitUsage);
}

TEST(Cli, ShapeMismatchNamesTheTensor) {
    fixture::TempDir dir;
    ASSERT_EQ(fixture::run_cli("train" + resources() + kSmall + " --train " + q(fixture::path("train.tsv")) +
                               " --epochs 0 --checkpoint " + q(dir / "m.ckpt"))
                  .exit_code,
              0);
    const auto r = fixture::run_cli("evaluate" + resources() + " --head-hidden 12 --test " +
                                    q(fixture::path("test.tsv")) + " --checkpoint " + q(dir / "m.ckpt"));
    EXPECT_EQ(r.exit_code, kExitData);
    EXPECT_NE(r.err.find("head.hidden.weight"), std::string::npos) << r.err;
}

TEST(Cli, PredictPrintsOneStableFloat) {
    fixture::TempDir dir;
    ASSERT_EQ(fixture::run_cli("train" + resources() + kSmall + " --train " + q(fixture::path("train.tsv")) +
                               " --epochs 1 --checkpoint " + q(dir / "m.ckpt"))
                  .exit_code,
              0);
    const std::string base = "predict" + resources() + " --checkpoint " + q(dir / "m.ckpt") + " --entity '$DIA'";
    for (const std::string text : {"'Lunchtime rally coming'", "''"}) {
        const auto a = fixture::run_cli(base + " --text " + text);
        const auto b = fixture::run_cli(base + " --text " + text);
        ASSERT_EQ(a.exit_code, 0) << a.err;
        EXPECT_EQ(a.out, b.out);
        const auto out = lines(a.out);
        ASSERT_EQ(out.size(), 1u);
        double v = 0.0;
        const auto [end, ec] = std::from_chars(out[0].data(), out[0].data() + out[0].size(), v);
        EXPECT_EQ(ec, std::errc());
        EXPECT_EQ(end, out[0].data() + out[0].size());
        EXPECT_TRUE(v > -1.0 && v < 1.0) << out[0];
        EXPECT_EQ(out[0].size() - out[0].find('.') - 1, 4u) << out[0];
    }
}

TEST(Cli, ConfigFileWithFlagOverride) {
    fixture::TempDir dir;
    std::ofstream(dir / "run.ini") << "# settings\nvocab=" << fixture::path("vocab.txt").string()
                                   << "\nsenti=" << fixture::path("senti.tsv").string()
                                   << "\nmarket=" << fixture::path("market.tsv").string()
                                   << "\ntrain=" << fixture::path("train.tsv").string()
                                   << "\nd-model=8\nheads_base=2\nheads-stack=2\nn-stack=1\nepochs=0\ncheckpoint="
                                   << (dir / "m.ckpt").string() << "\n";
    auto r = fixture::run_cli("train --config " + q(dir / "run.ini") + " --n-stack 3 --report " +
                              q(dir / "report.txt"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto config = read_checkpoint_config(dir / "m.ckpt");
    EXPECT_EQ(config.d_model, 8u);
    EXPECT_EQ(config.n_stack_layers, 3u);

    // The report header replays as a config file.
    std::ofstream replay(dir / "replay.ini");
    for (const auto& line : lines(fixture::read_file(dir / "report.txt"))) {
        if (line.rfind("# ", 0) == 0 && line.find('=') != std::string::npos) replay << line.substr(2) << '\n';
    }
    replay.close();
    r = fixture::run_cli("train --config " + q(dir / "replay.ini") + " --checkpoint " + q(dir / "replay.ckpt"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(fixture::read_file(dir / "replay.ckpt"), fixture::read_file(dir / "m.ckpt"));

    std::ofstream(dir / "bad.ini") << "d-model=8\nnot-a-setting=1\n";
    EXPECT_EQ(fixture::run_cli("train --config " + q(dir / "bad.ini")).exit_code, kExitUsage);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(fixture::run_cli("").exit_code, kExitUsage);
    EXPECT_EQ(fixture::run_cli("frobnicate").exit_code, kExitUsage);
    EXPECT_EQ(fixture::run_cli("train --no-such-flag").exit_code, kExitUsage);
    EXPECT_EQ(fixture::run_cli("predict" + resources()).exit_code, kExitUsage);  // --text is required
    EXPECT_EQ(fixture::run_cli("--help").exit_code, kExitOk);
    fixture::TempDir dir;
    const auto r = fixture::run_cli("train" + resources() + " --d-model 7 --train " + q(fixture::path("train.tsv")) +
                                    " --checkpoint " + q(dir / "m.ckpt"));
    EXPECT_EQ(r.exit_code, kExitUsage);
    EXPECT_NE(r.err.find("d_model"), std::string::npos) << r.err;
}

TEST(Cli, NonFiniteLossExitsWithNumericCode) {
    fixture::TempDir dir;
    // A step this large overflows the next forward pass.
    const auto r = fixture::run_cli("train" + resources() + kSmall + " --train " + q(fixture::path("train.tsv")) +
                                    " --epochs 2 --lr 1e200 --checkpoint " + q(dir / "m.ckpt"));
    EXPECT_EQ(r.exit_code, kExitNumeric) << r.err;
    EXPECT_NE(r.err.find("batch 2 of 4"), std::string::npos) << r.err;
    EXPECT_FALSE(std::filesystem::exists(dir / "m.ckpt"));
}

TEST(Cli, StatsCountsRawText) {
    const auto r = fixture::run_cli("stats --data " + q(fixture::path("train.tsv")));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto loaded = load_dataset(fixture::path("train.tsv"), {.preprocess = false});
    const auto s = corpus_stats(loaded.examples);
    char mean[32];
    std::snprintf(mean, sizeof mean, "%.2f", s.mean_words);
    EXPECT_EQ(r.out, "total\t64\nmean_words\t" + std::string(mean) + "\ncount_negative\t" +
                         std::to_string(s.count_negative) + "\ncount_nonnegative\t" +
                         std::to_string(s.count_nonnegative) + "\n");
}

TEST(Cli, ConvertWritesLoadableTsv) {
    fixture::TempDir dir;
    const auto r = fixture::run_cli("convert --input " + q(fixture::path("ssix_sample.json")) + " --output " +
                                    q(dir / "out.tsv") + " --default-source twitter");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto loaded = load_dataset(dir / "out.tsv");
    ASSERT_EQ(loaded.examples.size(), 6u);
    EXPECT_EQ(loaded.examples.back().text, "Lunchtime rally coming");
    EXPECT_EQ(loaded.examples.back().score, 0.46);
    EXPECT_EQ(fixture::run_cli("convert --input " + q(fixture::path("ssix_sample.json")) + " --output " +
                               q(dir / "x.tsv") + " --score-field nope")
                  .exit_code,
              kExitData);
}

TEST(Cli, AblateEmitsComparisonTable) {
    fixture::TempDir dir;
    const auto r = fixture::run_cli("ablate" + resources() + kSmall + " --train " + q(fixture::path("train.tsv")) +
                                    " --test " + q(fixture::path("test.tsv")) + " --epochs 1 --report " +
                                    q(dir / "ablation.txt"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const auto out = lines(r.out);
    ASSERT_EQ(out.size(), 8u) << r.out;
    EXPECT_EQ(out[0], "model\tcosine");
    EXPECT_EQ(out[1].rfind("Base\t", 0), 0u);
    for (int n = 1; n <= 6; ++n) EXPECT_EQ(out[n + 1].rfind("Base+" + std::to_string(n) + "xTransf\t", 0), 0u);
}
