#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "pina_xmc/parallel.hpp"
#include "pina_xmc/textvec.hpp"
#include "test_util.hpp"

using namespace pina_xmc;

TEST(Tokenize, WhitespacePunctuationCase) {
    EXPECT_EQ(text::tokenize("  Hello, World!  (ok)"), (std::vector<std::string>{"hello", "world", "ok"}));
    EXPECT_EQ(text::tokenize("don't e-mail"), (std::vector<std::string>{"don't", "e-mail"}));
    EXPECT_EQ(text::tokenize("..."), std::vector<std::string>{});
    EXPECT_EQ(text::tokenize(""), std::vector<std::string>{});
}

TEST(Tokenize, UnicodeWhitespaceAndCase) {
    // U+00A0 no-break space and U+3000 ideographic space separate tokens
    EXPECT_EQ(text::tokenize("a\xC2\xA0" "b\xE3\x80\x80" "c"), (std::vector<std::string>{"a", "b", "c"}));
    // ÄÖ -> äö, Greek ΣΟΦΙΑ -> σοφια, Cyrillic МИР -> мир
    EXPECT_EQ(text::tokenize("\xC3\x84\xC3\x96"), (std::vector<std::string>{"\xC3\xA4\xC3\xB6"}));
    EXPECT_EQ(text::tokenize("\xD0\x9C\xD0\x98\xD0\xA0"), (std::vector<std::string>{"\xD0\xBC\xD0\xB8\xD1\x80"}));
    // curly quotes are stripped
    EXPECT_EQ(text::tokenize("\xE2\x80\x9Cword\xE2\x80\x9D"), (std::vector<std::string>{"word"}));
}

TEST(FitVocabulary, LexicographicIds) {
    const auto v = fit_vocabulary({"a b", "b c"}, {VectorizerMode::tfidf, 1});
    EXPECT_EQ(v.tokens(), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(v.doc_freq(), (std::vector<std::uint32_t>{1, 2, 1}));
    EXPECT_EQ(*v.lookup("b"), 1u);
}

TEST(FitVocabulary, MinDf) {
    const auto v = fit_vocabulary({"a b", "b c"}, {VectorizerMode::tfidf, 2});
    EXPECT_EQ(v.tokens(), (std::vector<std::string>{"b"}));
    EXPECT_EQ(*v.lookup("b"), 0u);
}

TEST(FitVocabulary, EmptyCorpusRejected) { EXPECT_THROW(fit_vocabulary({}, {}), Error); }

TEST(FitVocabulary, RandomCorpusDfRecount) {
    std::mt19937_64 rng(1);
    Corpus corpus;
    for (int d = 0; d < 100; ++d) {
        std::string doc;
        const int len = 1 + static_cast<int>(rng() % 8);
        for (int t = 0; t < len; ++t) doc += "w" + std::to_string(rng() % 40) + " ";
        corpus.push_back(doc);
    }
    for (std::size_t min_df : {1u, 3u, 7u}) {
        const auto v = fit_vocabulary(corpus, {VectorizerMode::bow, min_df});
        std::map<std::string, std::uint32_t> df;
        for (const auto& doc : corpus) {
            std::set<std::string> seen;
            std::string tok;
            for (char c : doc + " ") {
                if (c == ' ') {
                    if (!tok.empty()) seen.insert(tok);
                    tok.clear();
                } else {
                    tok += c;
                }
            }
            for (const auto& s : seen) ++df[s];
        }
        std::vector<std::string> expected;
        for (const auto& [t, c] : df) {
            if (c >= min_df) expected.push_back(t);
        }
        ASSERT_EQ(v.tokens(), expected);
        for (std::size_t i = 0; i < v.dim(); ++i) {
            EXPECT_EQ(v.doc_freq()[i], df[v.tokens()[i]]);
            EXPECT_GE(v.doc_freq()[i], min_df);
        }
    }
}

TEST(Transform, TfidfWorkedExample) {
    const auto v = fit_vocabulary({"cat cat dog", "dog bird"}, {VectorizerMode::tfidf, 1});
    const auto x = v.transform("cat cat dog");
    const double cat = 2.0 * (std::log(3.0 / 2.0) + 1.0);
    const double dog = 1.0 * (std::log(3.0 / 3.0) + 1.0);
    const double n = std::sqrt(cat * cat + dog * dog);
    ASSERT_EQ(x.nnz(), 2u);
    const index_t cat_id = *v.lookup("cat");
    const index_t dog_id = *v.lookup("dog");
    const auto dense = x.to_dense();
    EXPECT_NEAR(dense[cat_id], cat / n, 1e-6);
    EXPECT_NEAR(dense[dog_id], dog / n, 1e-6);
    EXPECT_NEAR(dense[cat_id], 0.9422, 1e-4);
    EXPECT_NEAR(dense[dog_id], 0.3352, 1e-4);
}

TEST(Transform, OutOfVocabularyIsZero) {
    const auto v = fit_vocabulary({"cat dog"}, {});
    EXPECT_EQ(v.transform("zzz").nnz(), 0u);
    EXPECT_EQ(v.transform("").nnz(), 0u);
}

TEST(Transform, BowCounts) {
    const auto v = fit_vocabulary({"a b"}, {VectorizerMode::bow, 1});
    const auto x = v.transform("a a b");
    EXPECT_EQ(x.indices, (std::vector<index_t>{0, 1}));
    EXPECT_EQ(x.values, (std::vector<float>{2.0f, 1.0f}));
}

TEST(TransformCorpus, MatchesPerDocument) {
    std::mt19937_64 rng(2);
    Corpus corpus;
    for (int d = 0; d < 50; ++d) {
        std::string doc;
        for (int t = 0; t < 6; ++t) doc += "t" + std::to_string(rng() % 25) + " ";
        corpus.push_back(doc);
    }
    const auto v = fit_vocabulary(corpus, {});
    set_num_threads(3);
    const auto m = v.transform_corpus(corpus);
    set_num_threads(1);
    ASSERT_EQ(m.rows(), 50u);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        EXPECT_EQ(m.row_vector(i), v.transform(corpus[i]));
        double sq = 0;
        for (float x : m.row(i).values) sq += double(x) * x;
        if (m.row(i).nnz() > 0) {
            EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
        }
    }
    EXPECT_EQ(v.transform_corpus({corpus[0]}).row_vector(0), v.transform(corpus[0]));
    const auto empty = v.transform_corpus({"", "", ""});
    EXPECT_EQ(empty.rows(), 3u);
    EXPECT_EQ(empty.nnz(), 0u);
}

TEST(Vectorizer, DeterministicFit) {
    const Corpus c{"x y z", "y z", "z"};
    EXPECT_EQ(fit_vocabulary(c, {}), fit_vocabulary(c, {}));
}

TEST(Vectorizer, SaveLoadRoundTrip) {
    testutil::TempDir dir("vec");
    const auto v = fit_vocabulary({"alpha beta", "beta gamma \xC3\xA9t\xC3\xA9"}, {VectorizerMode::bow, 1});
    v.save(dir.path());
    const auto back = Vectorizer::load(dir.path());
    EXPECT_EQ(back, v);
    EXPECT_EQ(back.transform("beta alpha"), v.transform("beta alpha"));
    EXPECT_EQ(testutil::slurp(dir / "vectorizer.tsv"), "alpha\t1\nbeta\t2\ngamma\t1\n\xC3\xA9t\xC3\xA9\t1\n");
}

TEST(Vectorizer, LoadRejectsCorruptTable) {
    testutil::TempDir dir("vecbad");
    fit_vocabulary({"a b"}, {}).save(dir.path());
    io::write_file(dir / "vectorizer.tsv", "b\t1\na\t1\n");
    EXPECT_THROW(Vectorizer::load(dir.path()), Error);
    io::write_file(dir / "vectorizer.tsv", "a\t1\n");
    EXPECT_THROW(Vectorizer::load(dir.path()), Error);
    io::write_file(dir / "vectorizer.tsv", "a\tx\nb\t1\n");
    EXPECT_THROW(Vectorizer::load(dir.path()), Error);
}
