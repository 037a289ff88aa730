#include "ratemb/synth.hpp"

#include <cmath>
#include <numbers>

#include "ratemb/error.hpp"

namespace ratemb::synth {

std::uint64_t poisson(double mean, SeededRng& rng) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) throw ArgumentError("poisson mean must be finite and non-negative");
    if (mean > 500.0) return static_cast<std::uint64_t>(std::max(0.0, std::round(mean + std::sqrt(mean) * rng.normal())));
    // Sequential inversion of the CDF.
    const double u = rng.uniform();
    double p = std::exp(-mean), cdf = p;
    std::uint64_t k = 0;
    while (u > cdf && k < 100000) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
        if (p == 0.0 && cdf < u) break;
    }
    return k;
}

TabularLatent tabular_latent(const TabularLatentParams& params, std::uint64_t seed) {
    if (params.rows < 2 || params.census_columns < 1)
        throw ArgumentError("tabular-latent needs at least 2 rows and 1 census column");
    if (!(params.census_noise >= 0.0)) throw ArgumentError("census noise must be non-negative");
    SeededRng coef(SeededRng::derive(seed, 1));
    std::vector<double> loading(params.census_columns), rating_effect(params.rating_columns);
    double a2 = 0.0;
    for (auto& a : loading) {
        a = (coef.below(2) ? 1.0 : -1.0) * coef.uniform(0.5, 1.5);
        a2 += a * a;
    }
    for (auto& b : rating_effect) b = coef.uniform(-0.4, 0.4);

    SeededRng rng(SeededRng::derive(seed, 2));
    TabularLatent out{EmbeddingTable(params.rating_columns), EmbeddingTable(params.census_columns),
                      EmbeddingTable(1), {}};
    std::vector<double> rating(params.rating_columns), census(params.census_columns);
    for (std::size_t i = 0; i < params.rows; ++i) {
        const double f = rng.normal();
        for (auto& r : rating) r = rng.normal();
        double h = 0.0;
        for (std::size_t j = 0; j < census.size(); ++j) {
            census[j] = f * loading[j] + params.census_noise * rng.normal();
            h += loading[j] * census[j];
        }
        h /= a2;
        double eta = -0.5 + params.latent_effect * h;
        for (std::size_t k = 0; k < rating.size(); ++k) eta += rating_effect[k] * rating[k];
        const auto count = static_cast<double>(poisson(std::exp(eta), rng));
        const std::string id = std::to_string(i + 1);
        out.rating.add(id, rating);
        out.census.add(id, census);
        out.response.add(id, std::vector<double>{count});
        out.hidden.push_back(h);
    }
    return out;
}

sequence::SequenceDataset marker_sequences(const MarkerParams& params, std::uint64_t seed) {
    if (params.sequences == 0 || params.min_length < 1 || params.max_length < params.min_length)
        throw ArgumentError("marker-sequences needs sequences >= 1 and 1 <= min length <= max length");
    SeededRng rng(seed);
    sequence::SequenceDataset data;
    for (std::size_t i = 0; i < params.sequences; ++i) {
        const std::size_t t = params.min_length + rng.below(params.max_length - params.min_length + 1);
        const bool positive = rng.below(2) == 1;
        const std::size_t at = rng.below(t);
        sequence::Sequence s;
        for (std::size_t k = 0; k < t; ++k) s.steps.push_back({positive && k == at ? 1.0 : 0.0, rng.uniform(-0.5, 0.5)});
        data.ids.push_back(std::to_string(i));
        data.sequences.push_back(std::move(s));
        data.labels.push_back(std::vector<double>{positive ? 1.0 : 0.0});
    }
    return data;
}

text::Corpus cluster_corpus(const ClusterCorpusParams& params, std::uint64_t seed) {
    if (params.clusters < 1 || params.clusters > 26 || params.vocabulary % params.clusters != 0 ||
        params.vocabulary == 0 || params.document_length == 0)
        throw ArgumentError("cluster-corpus needs 1..26 clusters dividing a positive vocabulary size");
    const std::size_t per = params.vocabulary / params.clusters;
    SeededRng rng(seed);
    text::Corpus corpus;
    corpus.reserve(params.documents);
    for (std::size_t d = 0; d < params.documents; ++d) {
        const auto c = rng.below(params.clusters);
        text::Document doc;
        for (std::size_t t = 0; t < params.document_length; ++t)
            doc.push_back(std::string(1, static_cast<char>('a' + c)) + std::to_string(1 + rng.below(per)));
        corpus.push_back(std::move(doc));
    }
    return corpus;
}

std::size_t token_cluster(const std::string& token) {
    if (token.empty() || token[0] < 'a' || token[0] > 'z') throw ArgumentError("not a cluster token: '" + token + "'");
    return static_cast<std::size_t>(token[0] - 'a');
}

std::vector<Tensor> square_images(const SquareImageParams& params, std::uint64_t seed) {
    if (params.min_side < 1 || params.max_side < params.min_side || params.max_side > params.size)
        throw ArgumentError("square-images needs 1 <= min side <= max side <= size");
    SeededRng rng(seed);
    std::vector<Tensor> out;
    for (std::size_t n = 0; n < params.images; ++n) {
        const std::size_t side = params.min_side + rng.below(params.max_side - params.min_side + 1);
        const std::size_t top = rng.below(params.size - side + 1), left = rng.below(params.size - side + 1);
        Tensor img({params.size, params.size, 1});
        for (std::size_t i = top; i < top + side; ++i)
            for (std::size_t j = left; j < left + side; ++j) img.at(i, j, 0) = 1.0;
        out.push_back(std::move(img));
    }
    return out;
}

geo::GeoPointSet smooth_geo_field(const GeoFieldParams& params, std::uint64_t seed) {
    if (params.points < 2 || params.features < 1) throw ArgumentError("smooth-geo-field needs >= 2 points and >= 1 feature");
    SeededRng coef(SeededRng::derive(seed, 1));
    std::vector<double> freq(params.features), angle(params.features), phase(params.features);
    for (std::size_t k = 0; k < params.features; ++k) {
        freq[k] = coef.uniform(1.0, 2.0);
        angle[k] = coef.uniform(0.0, std::numbers::pi);
        phase[k] = coef.uniform(0.0, 2.0 * std::numbers::pi);
    }
    std::vector<std::string> names;
    for (std::size_t k = 0; k < params.features; ++k) names.push_back("f" + std::to_string(k + 1));
    geo::GeoPointSet pts(names);
    SeededRng rng(SeededRng::derive(seed, 2));
    constexpr double kQuantum = 1048576.0;
    for (std::size_t i = 0; i < params.points; ++i) {
        geo::GeoPoint p;
        p.id = "p" + std::to_string(i + 1);
        p.x = std::round(rng.uniform() * kQuantum) / kQuantum;
        p.y = std::round(rng.uniform() * kQuantum) / kQuantum;
        for (std::size_t k = 0; k < params.features; ++k) {
            const double s = p.x * std::cos(angle[k]) + p.y * std::sin(angle[k]);
            p.features.push_back(std::sin(2.0 * std::numbers::pi * freq[k] * s + phase[k]) + params.noise * rng.normal());
        }
        pts.add(std::move(p));
    }
    return pts;
}

}  // namespace ratemb::synth
