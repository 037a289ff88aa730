#pragma once

#include <cstdint>
#include <vector>

#include "ratemb/embedding.hpp"
#include "ratemb/geo.hpp"
#include "ratemb/sequence.hpp"
#include "ratemb/text.hpp"

namespace ratemb::synth {

/// Poisson draw; inversion for small means, a rounded normal above 500.
std::uint64_t poisson(double mean, SeededRng& rng);

struct TabularLatentParams {
    std::size_t rows = 2000;
    std::size_t rating_columns = 2;
    std::size_t census_columns = 8;
    double census_noise = 0.5;
    /// Weight of the hidden factor in the log mean.
    double latent_effect = 0.6;
};

/// Census columns are f * a_j + noise for a per-row factor f ~ N(0, 1) and
/// fixed loadings a. The hidden factor h = a.census / |a|^2 is therefore a
/// fixed linear map of the census columns, aligned with their first
/// principal direction. Rating columns are iid N(0, 1). The response is
/// Poisson with log mean -0.5 + sum_k b_k rating_k + latent_effect * h.
struct TabularLatent {
    EmbeddingTable rating;
    EmbeddingTable census;
    /// One column: the claim count.
    EmbeddingTable response;
    std::vector<double> hidden;
};

TabularLatent tabular_latent(const TabularLatentParams& params, std::uint64_t seed);

struct MarkerParams {
    std::size_t sequences = 200;
    std::size_t min_length = 2;
    std::size_t max_length = 10;
};

/// Two components per step: a marker channel that is 0 except for a single
/// 1 in positive sequences, and uniform noise on [-0.5, 0.5]. Labels are 1
/// exactly when the marker appears.
sequence::SequenceDataset marker_sequences(const MarkerParams& params, std::uint64_t seed);

struct ClusterCorpusParams {
    std::size_t documents = 2000;
    std::size_t vocabulary = 20;
    std::size_t clusters = 2;
    std::size_t document_length = 8;
};

/// Tokens "a1".."aK", "b1".."bK", ... one letter per cluster. Each document
/// draws all of its tokens uniformly from one randomly chosen cluster, so
/// tokens of a cluster share contexts and clusters never co-occur.
text::Corpus cluster_corpus(const ClusterCorpusParams& params, std::uint64_t seed);
/// Cluster index of a token produced by cluster_corpus.
std::size_t token_cluster(const std::string& token);

struct SquareImageParams {
    std::size_t images = 32;
    std::size_t size = 16;
    std::size_t min_side = 3;
    std::size_t max_side = 6;
};

/// size x size x 1 images, 0 background with one bright square of value 1.
std::vector<Tensor> square_images(const SquareImageParams& params, std::uint64_t seed);

struct GeoFieldParams {
    std::size_t points = 500;
    std::size_t features = 4;
    double noise = 0.5;
};

/// Points uniform on the unit square, coordinates rounded to multiples of
/// 2^-20. Feature k is sin(2 pi f_k (x cos t_k + y sin t_k) + phase_k) plus
/// iid N(0, noise^2), with f_k in [1, 2) cycles per unit. Ids "p1".."pn".
geo::GeoPointSet smooth_geo_field(const GeoFieldParams& params, std::uint64_t seed);

}  // namespace ratemb::synth
