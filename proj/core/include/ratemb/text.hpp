#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ratemb/embedding.hpp"
#include "ratemb/nn.hpp"

namespace ratemb::text {

using Document = std::vector<std::string>;
using Corpus = std::vector<Document>;

/// e_j of length k, with j counted from 1. Throws ArgumentError unless 1 <= j <= k.
std::vector<double> one_hot(std::size_t j, std::size_t k);

/// Lowercases ASCII letters and splits on runs of characters that are not
/// ASCII letters or digits. Bytes >= 0x80 are kept as word characters.
Document tokenize(std::string_view line);

/// One document per line. Blank lines give empty documents so that line
/// numbers and document ids agree. With tokenize off, documents are split
/// on whitespace only.
Corpus read_corpus(std::istream& is, bool lowercase_split = true);
Corpus read_corpus(const std::string& path, bool lowercase_split = true);
void write_corpus(const Corpus& corpus, std::ostream& os);

class Vocabulary {
public:
    /// Keeps tokens seen at least min_count times. Indices follow descending
    /// count, ties by token text. Throws ArgumentError when nothing survives.
    static Vocabulary build(const Corpus& corpus, std::size_t min_count = 1);

    std::size_t size() const { return tokens_.size(); }
    /// Number of tokens in the corpus the vocabulary was built from, before filtering.
    std::size_t total_tokens() const { return total_; }
    const std::string& token(std::size_t i) const { return tokens_.at(i); }
    std::size_t count(std::size_t i) const { return counts_.at(i); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    /// -1 for out-of-vocabulary tokens.
    std::int64_t index(const std::string& token) const;
    bool contains(const std::string& token) const { return index(token) >= 0; }

    /// Corpus as index lists with out-of-vocabulary tokens dropped.
    std::vector<std::vector<std::size_t>> encode(const Corpus& corpus) const;

private:
    std::vector<std::string> tokens_;
    std::vector<std::size_t> counts_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t total_ = 0;
};

enum class Word2VecMode { cbow, skipgram };
std::string_view to_string(Word2VecMode m);
Word2VecMode parse_word2vec_mode(std::string_view name);

struct Word2VecOptions {
    Word2VecMode mode = Word2VecMode::skipgram;
    /// Context words taken on each side of the center, cut at document edges.
    std::size_t window = 2;
    std::size_t dimension = 10;
    std::size_t negatives = 5;
};

struct Word2VecResult {
    /// Input-side weight rows, one per vocabulary token in index order.
    EmbeddingTable table;
    /// Mean negative-sampling objective per training pair, one entry per epoch.
    std::vector<double> loss_history;
};

/// Per-pair SGD on the negative-sampling objective with noise proportional
/// to count^0.75. cfg.batch_size is not used; every pair is its own step.
/// Documents are visited in order, or in a seeded shuffle when cfg.shuffle().
Word2VecResult word2vec_train(const Corpus& corpus, const Vocabulary& vocab, const Word2VecOptions& opts,
                              const nn::TrainConfig& cfg);

/// Mean of the rows of in-vocabulary tokens; other tokens are skipped and
/// not counted. Throws DomainError when no token is in the vocabulary.
std::vector<double> doc_centroid(const Document& doc, const EmbeddingTable& table, const Vocabulary& vocab);

/// Centroids of every document, ids "0", "1", ... Documents with no known
/// token raise DomainError naming the document.
EmbeddingTable doc_embeddings(const Corpus& corpus, const EmbeddingTable& table, const Vocabulary& vocab);

}  // namespace ratemb::text
