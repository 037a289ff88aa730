#pragma once

#include <span>
#include <string>
#include <vector>

#include "ratemb/embedding.hpp"
#include "ratemb/nn.hpp"

namespace ratemb::autoencode {

struct ConvStage {
    std::size_t filter = 3;
    std::size_t count = 4;
    bool pool = false;
};

/// Undercomplete autoencoder description. The decoder always mirrors the encoder.
struct AutoencoderSpec {
    enum class Kind { dense, conv };

    Kind kind = Kind::dense;
    /// {p} for dense, {N, M, C} for conv.
    Shape input_shape;
    std::vector<std::size_t> hidden;
    std::vector<ConvStage> stages;
    std::size_t bottleneck = 2;
    nn::Activation hidden_activation = nn::Activation::tanh;
    nn::Activation bottleneck_activation = nn::Activation::tanh;
    nn::Activation output_activation = nn::Activation::identity;

    static AutoencoderSpec dense(std::size_t p, std::vector<std::size_t> hidden, std::size_t bottleneck);
    /// Two stages (f=3, K=4, pooled) then (f=3, K=8); sigmoid output for [0,1] pixels.
    static AutoencoderSpec conv_default(Shape image_shape, std::size_t bottleneck);

    /// Throws SpecError when the bottleneck is not strictly smaller than the
    /// input or a stage would shrink a feature map to nothing.
    void validate() const;
};

/// Encoder followed by its mirrored decoder in one trainable network.
struct AutoencoderNetwork {
    nn::Network network;
    /// Layers [0, encoder_layers) form the encoder.
    std::size_t encoder_layers;
};

AutoencoderNetwork build_autoencoder(const AutoencoderSpec& spec, SeededRng& rng);

struct Autoencoder {
    nn::Network encoder;
    nn::Network decoder;
    std::vector<double> loss_history;
};

/// Trains on the rows of x (n x p) to minimize mean per-row squared reconstruction error.
Autoencoder ae_fit(const Tensor& x, const AutoencoderSpec& spec, const nn::TrainConfig& cfg);

/// Trains on same-shaped N x M x C images.
Autoencoder conv_ae_fit(std::span<const Tensor> images, const AutoencoderSpec& spec, const nn::TrainConfig& cfg);

/// Runs the encoder over every item. Ids default to "0", "1", ...
EmbeddingTable encode_batch(const nn::Network& encoder, std::span<const Tensor> xs,
                            std::span<const std::string> ids = {});

}  // namespace ratemb::autoencode
