#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "finsent/errors.hpp"
#include "finsent/lexicon.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace finsent;
using Row = std::array<double, 4>;

namespace {

std::filesystem::path write(const fixture::TempDir& dir, const std::string& name, const std::string& body) {
    std::ofstream(dir / name) << body;
    return dir / name;
}

template <typename Fn>
std::string error_of(Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

Vocab piece_vocab() {
    return Vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "go", "##od", "good", "rally", "the", "##s"});
}

}  // namespace

TEST(SentiLexicon, ObjectivityIsTheRemainder) {
    fixture::TempDir dir;
    const auto lex = SentiLexicon::load(write(dir, "s.tsv", "# comment\ngood\t0.75\t0.0\n\nthe\t0.0\t0.0\n"));
    ASSERT_EQ(lex.size(), 2u);
    const auto good = lex.find("good");
    ASSERT_TRUE(good);
    EXPECT_DOUBLE_EQ(good->pos, 0.75);
    EXPECT_DOUBLE_EQ(good->neg, 0.0);
    EXPECT_DOUBLE_EQ(good->obj, 0.25);
    const auto the = lex.find("the");
    ASSERT_TRUE(the);
    EXPECT_DOUBLE_EQ(the->obj, 1.0);
    EXPECT_FALSE(lex.find("bad"));
}

TEST(SentiLexicon, RejectsSumAboveOneWithLineNumber) {
    fixture::TempDir dir;
    const auto msg = error_of([&] { SentiLexicon::load(write(dir, "s.tsv", "good\t0.5\t0\nbad\t0.6\t0.6\n")); });
    EXPECT_NE(msg.find(":2:"), std::string::npos) << msg;
}

TEST(SentiLexicon, RejectsMalformedAndDuplicateLines) {
    fixture::TempDir dir;
    EXPECT_THROW(SentiLexicon::load(write(dir, "a.tsv", "good\t0.5\n")), ParseError);
    EXPECT_THROW(SentiLexicon::load(write(dir, "b.tsv", "good\tx\t0.1\n")), ParseError);
    EXPECT_THROW(SentiLexicon::load(write(dir, "c.tsv", "good\t-0.1\t0.1\n")), ParseError);
    const auto msg = error_of([&] { SentiLexicon::load(write(dir, "d.tsv", "Good\t0.5\t0\ngood\t0.1\t0\n")); });
    EXPECT_NE(msg.find(":2:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
}

TEST(SentiLexicon, TriplesSumToOne) {
    const auto& lex = fixture::resources().senti;
    for (const char* word : {"good", "bad", "rally", "crash", "the", "weak"}) {
        const auto s = lex.find(word);
        ASSERT_TRUE(s) << word;
        EXPECT_NEAR(s->pos + s->neg + s->obj, 1.0, 1e-6);
    }
}

TEST(MarketLexicon, LoadsSignedScores) {
    fixture::TempDir dir;
    const auto lex = MarketLexicon::load(write(dir, "m.tsv", "rally\t1.84\ncrash\t-2.5\n"));
    EXPECT_EQ(lex.find("rally"), 1.84);
    EXPECT_EQ(lex.find("crash"), -2.5);
    EXPECT_EQ(fixture::resources().market.find("rally"), 1.84);
}

TEST(MarketLexicon, EmptyFileAndMalformedLines) {
    fixture::TempDir dir;
    EXPECT_EQ(MarketLexicon::load(write(dir, "e.tsv", "")).size(), 0u);
    const auto msg = error_of([&] { MarketLexicon::load(write(dir, "m.tsv", "rally\t1\nrally up\n")); });
    EXPECT_NE(msg.find(":2:"), std::string::npos) << msg;
    EXPECT_THROW(MarketLexicon::load(write(dir, "d.tsv", "a\t1\na\t2\n")), ParseError);
    EXPECT_THROW(MarketLexicon::load(write(dir, "n.tsv", "a\tnan\n")), ParseError);
}

TEST(SentimentFeatures, SubwordsInheritTheirWordsScores) {
    SentiLexicon senti;
    senti.insert("good", 0.75, 0.0);
    MarketLexicon market;
    const auto seq = encode("good", Vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "go", "##od"}));
    ASSERT_EQ(seq.pieces, (std::vector<std::string>{"[CLS]", "go", "##od", "[SEP]"}));
    const auto f = sentiment_features(seq, senti, market);
    ASSERT_EQ(f.size(), 4u);
    EXPECT_EQ(f.rows[0], (Row{0, 0, 0, 0}));
    EXPECT_EQ(f.rows[1], (Row{0.75, 0, 0.25, 0}));
    EXPECT_EQ(f.rows[2], (Row{0.75, 0, 0.25, 0}));
    EXPECT_EQ(f.rows[3], (Row{0, 0, 0, 0}));
}

TEST(SentimentFeatures, LookupUsesWholeLowercasedWord) {
    SentiLexicon senti;
    senti.insert("rallys", 0.5, 0.25);
    MarketLexicon market;
    market.insert("rallys", 1.84);
    // The pieces "rally" + "##s" are not themselves looked up.
    senti.insert("rally", 0.0, 1.0);
    const auto f = sentiment_features(encode("RALLYS", piece_vocab(), {.lowercase = true}), senti, market);
    EXPECT_EQ(f.rows[1], (Row{0.5, 0.25, 0.25, 1.84}));
    EXPECT_EQ(f.rows[2], (Row{0.5, 0.25, 0.25, 1.84}));
}

TEST(SentimentFeatures, MissingWordsGiveZeroSlots) {
    SentiLexicon senti;
    senti.insert("the", 0, 0);
    MarketLexicon market;
    market.insert("rally", -1.5);
    const auto f = sentiment_features(encode("zzz the rally", piece_vocab()), senti, market);
    EXPECT_EQ(f.rows[1], (Row{0, 0, 0, 0}));       // fully out of both lexicons
    EXPECT_EQ(f.rows[2], (Row{0, 0, 1, 0}));       // known objective word
    EXPECT_EQ(f.rows[3], (Row{0, 0, 0, -1.5}));    // market only
}

TEST(SentimentFeatures, ToTensorPadsWithZeroRows) {
    SentiLexicon senti;
    senti.insert("good", 0.75, 0.0);
    const auto f = sentiment_features(encode("good", piece_vocab()), senti, MarketLexicon{});
    const auto t = f.to_tensor(5);
    EXPECT_EQ(t.shape(), (Shape{5, 4}));
    EXPECT_EQ(t.at(1, 0), 0.75);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(t.at(4, c), 0.0);
    EXPECT_EQ(f.to_tensor().shape(), (Shape{3, 4}));
}

// Properties over random texts built from lexicon and non-lexicon words.
TEST(SentimentFeaturesProperty, RowsAlignShareAndStayInRange) {
    const auto& res = fixture::resources();
    const std::vector<std::string> words{"good", "bad", "rally", "crash", "the", "Rally", "BEARISH", "stock",
                                         "currencies", "zzz", "$AAPL", "gainsed", "plunges"};
    oracle::Rng rng(23);
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1), count(0, 20);
    for (int trial = 0; trial < 1000; ++trial) {
        std::string text;
        for (std::size_t i = count(rng); i > 0; --i) text += words[pick(rng)] + " ";
        const auto seq = encode(text, res.vocab, {.max_len = 24});
        const auto f = sentiment_features(seq, res.senti, res.market);
        ASSERT_EQ(f.size(), seq.size());
        for (std::size_t i = 0; i < seq.size(); ++i) {
            const auto& r = f.rows[i];
            for (std::size_t k = 0; k < 3; ++k) ASSERT_TRUE(r[k] >= 0.0 && r[k] <= 1.0);
            ASSERT_TRUE(std::isfinite(r[3]));
            if (seq.word_index[i] == TokenSeq::kNoWord) ASSERT_EQ(r, (Row{0, 0, 0, 0}));
            if (i > 0 && seq.word_index[i] == seq.word_index[i - 1]) ASSERT_EQ(r, f.rows[i - 1]);
        }
    }
}
