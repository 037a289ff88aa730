#include <gtest/gtest.h>

#include <sstream>

#include "ratemb/error.hpp"
#include "ratemb/evaluate.hpp"
#include "ratemb/synth.hpp"
#include "ratemb/text.hpp"

using namespace ratemb;
using namespace ratemb::text;

namespace {

struct Separation {
    double within;
    double between;
};

Separation cluster_separation(const EmbeddingTable& table) {
    double w = 0.0, b = 0.0;
    std::size_t nw = 0, nb = 0;
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = i + 1; j < table.size(); ++j) {
            const double c = evaluate::cosine(table.row(i), table.row(j));
            if (synth::token_cluster(table.id(i)) == synth::token_cluster(table.id(j))) {
                w += c;
                ++nw;
            } else {
                b += c;
                ++nb;
            }
        }
    return {w / static_cast<double>(nw), b / static_cast<double>(nb)};
}

}  // namespace

TEST(OneHot, Examples) {
    EXPECT_EQ(one_hot(2, 5), (std::vector<double>{0, 1, 0, 0, 0}));
    EXPECT_EQ(one_hot(1, 1), (std::vector<double>{1}));
    EXPECT_THROW(one_hot(6, 5), ArgumentError);
    EXPECT_THROW(one_hot(0, 5), ArgumentError);
}

TEST(OneHot, ExactlyOneUnitEntry) {
    for (std::size_t k = 1; k <= 64; ++k)
        for (std::size_t j = 1; j <= k; ++j) {
            const auto e = one_hot(j, k);
            std::size_t nonzero = 0;
            for (double v : e) nonzero += v != 0.0;
            ASSERT_EQ(nonzero, 1u);
            ASSERT_EQ(e[j - 1], 1.0);
        }
}

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
    EXPECT_EQ(tokenize("Rear-end collision, at 40km/h!"),
              (Document{"rear", "end", "collision", "at", "40km", "h"}));
    EXPECT_TRUE(tokenize("  ,;  ").empty());
}

TEST(Corpus, OneDocumentPerLine) {
    std::istringstream in("The car\n\nhit A tree\n");
    const auto c = read_corpus(in);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_TRUE(c[1].empty());
    EXPECT_EQ(c[2], (Document{"hit", "a", "tree"}));
    std::istringstream raw("Keep Case,here\n");
    EXPECT_EQ(read_corpus(raw, false)[0], (Document{"Keep", "Case,here"}));
}

TEST(Vocabulary, CountsAndMinCount) {
    const Corpus c = {{"a", "a", "b"}};
    const auto v1 = Vocabulary::build(c, 1);
    EXPECT_EQ(v1.size(), 2u);
    EXPECT_EQ(v1.total_tokens(), 3u);
    const auto v2 = Vocabulary::build(c, 2);
    ASSERT_EQ(v2.size(), 1u);
    EXPECT_EQ(v2.token(0), "a");
    EXPECT_FALSE(v2.contains("b"));
    EXPECT_THROW(Vocabulary::build(c, 3), ArgumentError);
    EXPECT_THROW(Vocabulary::build(c, 0), ArgumentError);
}

TEST(Vocabulary, IndexByDescendingCountThenToken) {
    const Corpus c = {{"z", "y", "y", "x", "w", "w"}};
    const auto v = Vocabulary::build(c);
    EXPECT_EQ(v.tokens(), (std::vector<std::string>{"w", "y", "x", "z"}));
    EXPECT_EQ(v.index("x"), 2);
    EXPECT_EQ(v.index("q"), -1);
    EXPECT_EQ(Vocabulary::build(c).tokens(), v.tokens());
}

TEST(Word2Vec, RejectsTinyVocabulary) {
    const Corpus c = {{"a", "b", "c"}};
    const auto v = Vocabulary::build(c);
    Word2VecOptions o;
    o.negatives = 3;
    EXPECT_THROW(word2vec_train(c, v, o, nn::TrainConfig(0.05, 1, 1, 1)), ArgumentError);
    o.negatives = 2;
    EXPECT_NO_THROW(word2vec_train(c, v, o, nn::TrainConfig(0.05, 1, 1, 1)));
}

TEST(Word2Vec, TableShape) {
    const auto corpus = synth::cluster_corpus({200, 20, 2, 6}, 3);
    const auto v = Vocabulary::build(corpus);
    Word2VecOptions o;
    o.dimension = 7;
    const auto r = word2vec_train(corpus, v, o, nn::TrainConfig(0.05, 2, 1, 1));
    EXPECT_EQ(r.table.size(), v.size());
    EXPECT_EQ(r.table.dimension(), 7u);
    EXPECT_EQ(r.table.id(0), v.token(0));
    EXPECT_EQ(r.loss_history.size(), 2u);
}

class Word2VecModes : public ::testing::TestWithParam<Word2VecMode> {};

TEST_P(Word2VecModes, SeparatesPlantedClusters) {
    const auto corpus = synth::cluster_corpus({}, 7);
    const auto v = Vocabulary::build(corpus);
    Word2VecOptions o;
    o.mode = GetParam();
    const nn::TrainConfig cfg(0.025, 5, 1, 3);
    const auto r = word2vec_train(corpus, v, o, cfg);
    const auto sep = cluster_separation(r.table);
    EXPECT_GE(sep.within - sep.between, 0.2) << "within " << sep.within << " between " << sep.between;
    EXPECT_LT(r.loss_history.back(), r.loss_history.front());
    const auto again = word2vec_train(corpus, v, o, cfg);
    EXPECT_TRUE(again.table == r.table);
}

INSTANTIATE_TEST_SUITE_P(Both, Word2VecModes, ::testing::Values(Word2VecMode::cbow, Word2VecMode::skipgram),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Word2Vec, SeedChangesResult) {
    const auto corpus = synth::cluster_corpus({100, 20, 2, 5}, 2);
    const auto v = Vocabulary::build(corpus);
    const auto a = word2vec_train(corpus, v, {}, nn::TrainConfig(0.05, 1, 1, 1));
    const auto b = word2vec_train(corpus, v, {}, nn::TrainConfig(0.05, 1, 1, 2));
    EXPECT_FALSE(a.table == b.table);
}

TEST(DocCentroid, Means) {
    EmbeddingTable t(2);
    t.add("u", std::vector<double>{1, 0});
    t.add("v", std::vector<double>{0, 1});
    t.add("w", std::vector<double>{4, 3});
    const auto vocab = Vocabulary::build({{"u", "v", "w"}});
    EXPECT_EQ(doc_centroid({"u"}, t, vocab), (std::vector<double>{1, 0}));
    EXPECT_EQ(doc_centroid({"u", "v"}, t, vocab), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(doc_centroid({"u", "u", "w"}, t, vocab), (std::vector<double>{2, 1}));
    EXPECT_EQ(doc_centroid({"u", "unknown", "v"}, t, vocab), (std::vector<double>{0.5, 0.5}));
    EXPECT_THROW(doc_centroid({"unknown"}, t, vocab), DomainError);
    EXPECT_THROW(doc_centroid({}, t, vocab), DomainError);
}

TEST(DocCentroid, DuplicatedDocumentHasSameCentroid) {
    const auto corpus = synth::cluster_corpus({50, 20, 2, 5}, 9);
    const auto v = Vocabulary::build(corpus);
    const auto r = word2vec_train(corpus, v, {}, nn::TrainConfig(0.05, 1, 1, 1));
    for (const auto& doc : corpus) {
        Document twice = doc;
        twice.insert(twice.end(), doc.begin(), doc.end());
        const auto a = doc_centroid(doc, r.table, v), b = doc_centroid(twice, r.table, v);
        for (std::size_t k = 0; k < a.size(); ++k) ASSERT_NEAR(a[k], b[k], 1e-15);
    }
}

TEST(DocEmbeddings, NamesTheEmptyDocument) {
    EmbeddingTable t(1);
    t.add("x", std::vector<double>{1});
    const auto vocab = Vocabulary::build({{"x"}});
    const auto table = doc_embeddings({{"x"}, {"x", "x"}}, t, vocab);
    EXPECT_EQ(table.id(1), "1");
    try {
        doc_embeddings({{"x"}, {"y"}}, t, vocab);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("document 1"), std::string::npos);
    }
}
