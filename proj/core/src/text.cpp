#include "ratemb/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "ratemb/error.hpp"

namespace ratemb::text {

std::vector<double> one_hot(std::size_t j, std::size_t k) {
    if (j < 1 || j > k)
        throw ArgumentError("one_hot: index " + std::to_string(j) + " outside 1.." + std::to_string(k));
    std::vector<double> e(k, 0.0);
    e[j - 1] = 1.0;
    return e;
}

Document tokenize(std::string_view line) {
    Document out;
    std::string cur;
    for (unsigned char ch : line) {
        if (std::isalnum(ch) || ch >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(ch)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Corpus read_corpus(std::istream& is, bool lowercase_split) {
    Corpus corpus;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lowercase_split) {
            corpus.push_back(tokenize(line));
        } else {
            std::istringstream ls(line);
            Document doc;
            for (std::string tok; ls >> tok;) doc.push_back(tok);
            corpus.push_back(std::move(doc));
        }
    }
    return corpus;
}

Corpus read_corpus(const std::string& path, bool lowercase_split) {
    std::ifstream is(path);
    if (!is) throw ArgumentError("cannot open corpus '" + path + "'");
    return read_corpus(is, lowercase_split);
}

void write_corpus(const Corpus& corpus, std::ostream& os) {
    for (const auto& doc : corpus) {
        for (std::size_t i = 0; i < doc.size(); ++i) os << (i ? " " : "") << doc[i];
        os << '\n';
    }
}

Vocabulary Vocabulary::build(const Corpus& corpus, std::size_t min_count) {
    if (min_count < 1) throw ArgumentError("min count must be at least 1");
    std::map<std::string, std::size_t> counts;
    Vocabulary v;
    for (const auto& doc : corpus)
        for (const auto& tok : doc) {
            ++counts[tok];
            ++v.total_;
        }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [tok, c] : counts)
        if (c >= min_count) kept.emplace_back(tok, c);
    if (kept.empty())
        throw ArgumentError("vocabulary is empty after dropping tokens seen fewer than " + std::to_string(min_count) +
                            " times");
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (auto& [tok, c] : kept) {
        v.index_.emplace(tok, v.tokens_.size());
        v.tokens_.push_back(tok);
        v.counts_.push_back(c);
    }
    return v;
}

std::int64_t Vocabulary::index(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::vector<std::vector<std::size_t>> Vocabulary::encode(const Corpus& corpus) const {
    std::vector<std::vector<std::size_t>> out;
    out.reserve(corpus.size());
    for (const auto& doc : corpus) {
        std::vector<std::size_t> ids;
        for (const auto& tok : doc)
            if (auto it = index_.find(tok); it != index_.end()) ids.push_back(it->second);
        out.push_back(std::move(ids));
    }
    return out;
}

std::string_view to_string(Word2VecMode m) { return m == Word2VecMode::cbow ? "cbow" : "skipgram"; }

Word2VecMode parse_word2vec_mode(std::string_view name) {
    if (name == "cbow") return Word2VecMode::cbow;
    if (name == "skipgram") return Word2VecMode::skipgram;
    throw ArgumentError("unknown word2vec mode '" + std::string(name) + "' (expected cbow or skipgram)");
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

class NoiseSampler {
public:
    explicit NoiseSampler(const Vocabulary& vocab) {
        double acc = 0.0;
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            acc += std::pow(static_cast<double>(vocab.count(i)), 0.75);
            cumulative_.push_back(acc);
        }
    }

    std::size_t draw(SeededRng& rng) const {
        const double u = rng.uniform() * cumulative_.back();
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        return std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
    }

private:
    std::vector<double> cumulative_;
};

struct Trainer {
    std::size_t dim;
    std::vector<double> in;   // |V| x dim
    std::vector<double> out;  // |V| x dim
    std::vector<double> grad_h;
    const NoiseSampler& noise;
    std::size_t negatives;
    double lr;

    double* in_row(std::size_t w) { return in.data() + w * dim; }
    double* out_row(std::size_t w) { return out.data() + w * dim; }

    // One positive target and its negatives against hidden vector h. The
    // gradient with respect to h is accumulated into grad_h.
    double step(const std::vector<double>& h, std::size_t target, SeededRng& rng) {
        std::fill(grad_h.begin(), grad_h.end(), 0.0);
        double loss = 0.0;
        for (std::size_t s = 0; s <= negatives; ++s) {
            std::size_t word = target;
            double label = 1.0;
            if (s > 0) {
                word = noise.draw(rng);
                if (word == target) continue;
                label = 0.0;
            }
            double* u = out_row(word);
            double z = 0.0;
            for (std::size_t k = 0; k < dim; ++k) z += u[k] * h[k];
            const double p = sigmoid(z);
            loss -= std::log(std::max(label > 0 ? p : 1.0 - p, 1e-300));
            const double g = lr * (label - p);
            for (std::size_t k = 0; k < dim; ++k) {
                grad_h[k] += g * u[k];
                u[k] += g * h[k];
            }
        }
        return loss;
    }
};

}  // namespace

Word2VecResult word2vec_train(const Corpus& corpus, const Vocabulary& vocab, const Word2VecOptions& opts,
                              const nn::TrainConfig& cfg) {
    if (opts.window < 1) throw ArgumentError("word2vec: window must be at least 1");
    if (opts.dimension < 1) throw ArgumentError("word2vec: dimension must be at least 1");
    if (vocab.size() < opts.negatives + 1)
        throw ArgumentError("word2vec: vocabulary of " + std::to_string(vocab.size()) + " tokens is too small for " +
                            std::to_string(opts.negatives) + " negative samples");
    const auto docs = vocab.encode(corpus);
    const std::size_t dim = opts.dimension;
    const NoiseSampler noise(vocab);
    Trainer tr{dim, std::vector<double>(vocab.size() * dim), std::vector<double>(vocab.size() * dim, 0.0),
               std::vector<double>(dim), noise, opts.negatives, cfg.learning_rate()};
    SeededRng init(SeededRng::derive(cfg.seed(), 0x2E));
    const double bound = 0.5 / static_cast<double>(dim);
    for (auto& v : tr.in) v = init.uniform(-bound, bound);

    SeededRng rng(cfg.seed());
    std::vector<double> h(dim);
    std::vector<std::size_t> order(docs.size()), context;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<double> history;
    for (std::size_t epoch = 0; epoch < cfg.epochs(); ++epoch) {
        if (cfg.shuffle()) order = rng.permutation(docs.size());
        double total = 0.0;
        std::size_t pairs = 0;
        for (std::size_t d : order) {
            const auto& doc = docs[d];
            for (std::size_t i = 0; i < doc.size(); ++i) {
                const std::size_t lo = i >= opts.window ? i - opts.window : 0;
                const std::size_t hi = std::min(doc.size() - 1, i + opts.window);
                context.clear();
                for (std::size_t j = lo; j <= hi; ++j)
                    if (j != i) context.push_back(doc[j]);
                if (context.empty()) continue;
                if (opts.mode == Word2VecMode::skipgram) {
                    double* v = tr.in_row(doc[i]);
                    for (std::size_t c : context) {
                        std::copy(v, v + dim, h.begin());
                        total += tr.step(h, c, rng);
                        ++pairs;
                        for (std::size_t k = 0; k < dim; ++k) v[k] += tr.grad_h[k];
                    }
                } else {
                    std::fill(h.begin(), h.end(), 0.0);
                    for (std::size_t c : context) {
                        const double* v = tr.in_row(c);
                        for (std::size_t k = 0; k < dim; ++k) h[k] += v[k];
                    }
                    const double inv = 1.0 / static_cast<double>(context.size());
                    for (auto& x : h) x *= inv;
                    total += tr.step(h, doc[i], rng);
                    ++pairs;
                    for (std::size_t c : context) {
                        double* v = tr.in_row(c);
                        for (std::size_t k = 0; k < dim; ++k) v[k] += tr.grad_h[k] * inv;
                    }
                }
            }
        }
        if (pairs == 0) throw ArgumentError("word2vec: corpus has no document with two in-vocabulary tokens");
        const double mean = total / static_cast<double>(pairs);
        if (!std::isfinite(mean)) throw Error("word2vec: loss became non-finite at epoch " + std::to_string(epoch));
        history.push_back(mean);
    }

    EmbeddingTable table(dim);
    for (std::size_t w = 0; w < vocab.size(); ++w)
        table.add(vocab.token(w), std::span<const double>(tr.in_row(w), dim));
    return {std::move(table), std::move(history)};
}

std::vector<double> doc_centroid(const Document& doc, const EmbeddingTable& table, const Vocabulary& vocab) {
    std::vector<double> mean(table.dimension(), 0.0);
    std::size_t used = 0;
    for (const auto& tok : doc) {
        if (!vocab.contains(tok)) continue;
        const auto row = table.at(tok);
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += row[k];
        ++used;
    }
    if (used == 0) throw DomainError("document has no in-vocabulary token");
    for (auto& v : mean) v /= static_cast<double>(used);
    return mean;
}

EmbeddingTable doc_embeddings(const Corpus& corpus, const EmbeddingTable& table, const Vocabulary& vocab) {
    EmbeddingTable out(table.dimension());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        try {
            out.add(std::to_string(i), doc_centroid(corpus[i], table, vocab));
        } catch (const DomainError&) {
            throw DomainError("document " + std::to_string(i) + " has no in-vocabulary token");
        }
    }
    return out;
}

}  // namespace ratemb::text
