#include "ratemb/autoencode.hpp"

#include "ratemb/error.hpp"

namespace ratemb::autoencode {

using nn::Activation;
using nn::Network;

AutoencoderSpec AutoencoderSpec::dense(std::size_t p, std::vector<std::size_t> hidden, std::size_t bottleneck) {
    AutoencoderSpec s;
    s.kind = Kind::dense;
    s.input_shape = {p};
    s.hidden = std::move(hidden);
    s.bottleneck = bottleneck;
    return s;
}

AutoencoderSpec AutoencoderSpec::conv_default(Shape image_shape, std::size_t bottleneck) {
    AutoencoderSpec s;
    s.kind = Kind::conv;
    s.input_shape = std::move(image_shape);
    s.stages = {{3, 4, true}, {3, 8, false}};
    s.bottleneck = bottleneck;
    s.output_activation = Activation::sigmoid;
    return s;
}

namespace {

// Feature-map shape after each conv stage; throws SpecError on collapse.
std::vector<Shape> stage_shapes(const AutoencoderSpec& spec) {
    std::vector<Shape> shapes;
    Shape cur = spec.input_shape;
    for (std::size_t s = 0; s < spec.stages.size(); ++s) {
        const auto& st = spec.stages[s];
        if (st.filter == 0 || st.count == 0) throw SpecError("conv stage " + std::to_string(s) + " has zero size");
        if (st.filter > cur[0] || st.filter > cur[1])
            throw SpecError("conv stage " + std::to_string(s) + ": filter " + std::to_string(st.filter) +
                            " larger than feature map " + shape_string(cur));
        cur = {cur[0] - st.filter + 1, cur[1] - st.filter + 1, st.count};
        if (st.pool) {
            if (cur[0] / 2 == 0 || cur[1] / 2 == 0)
                throw SpecError("conv stage " + std::to_string(s) + ": pooling reduces " + shape_string(cur) +
                                " to zero");
            cur = {cur[0] / 2, cur[1] / 2, cur[2]};
        }
        shapes.push_back(cur);
    }
    return shapes;
}

}  // namespace

void AutoencoderSpec::validate() const {
    if (bottleneck == 0) throw SpecError("bottleneck must be positive");
    if (input_shape.empty()) throw SpecError("input shape is empty");
    if (bottleneck >= shape_size(input_shape))
        throw SpecError("bottleneck " + std::to_string(bottleneck) + " must be smaller than input size " +
                        std::to_string(shape_size(input_shape)));
    if (kind == Kind::dense) {
        if (input_shape.size() != 1) throw SpecError("dense autoencoder needs a rank-1 input shape");
        for (auto h : hidden)
            if (h == 0) throw SpecError("hidden layer sizes must be positive");
    } else {
        if (input_shape.size() != 3) throw SpecError("conv autoencoder needs an N x M x C input shape");
        if (stages.empty()) throw SpecError("conv autoencoder needs at least one stage");
        stage_shapes(*this);
    }
}

AutoencoderNetwork build_autoencoder(const AutoencoderSpec& spec, SeededRng& rng) {
    spec.validate();
    Network::LayerList layers;
    std::size_t encoder_layers = 0;

    if (spec.kind == AutoencoderSpec::Kind::dense) {
        std::size_t prev = spec.input_shape[0];
        for (auto h : spec.hidden) {
            layers.push_back(std::make_unique<nn::DenseLayer>(prev, h, spec.hidden_activation, rng));
            prev = h;
        }
        layers.push_back(std::make_unique<nn::DenseLayer>(prev, spec.bottleneck, spec.bottleneck_activation, rng));
        encoder_layers = layers.size();
        prev = spec.bottleneck;
        for (auto it = spec.hidden.rbegin(); it != spec.hidden.rend(); ++it) {
            layers.push_back(std::make_unique<nn::DenseLayer>(prev, *it, spec.hidden_activation, rng));
            prev = *it;
        }
        layers.push_back(std::make_unique<nn::DenseLayer>(prev, spec.input_shape[0], spec.output_activation, rng));
        return {Network(spec.input_shape, std::move(layers)), encoder_layers};
    }

    const auto shapes = stage_shapes(spec);
    std::vector<std::size_t> in_channels;
    std::vector<Shape> pre_pool;
    std::vector<std::int64_t> pool_index;
    Shape cur = spec.input_shape;
    for (const auto& st : spec.stages) {
        in_channels.push_back(cur[2]);
        layers.push_back(std::make_unique<nn::ConvLayer>(st.filter, cur[2], st.count, spec.hidden_activation, rng));
        cur = {cur[0] - st.filter + 1, cur[1] - st.filter + 1, st.count};
        pre_pool.push_back(cur);
        if (st.pool) {
            pool_index.push_back(static_cast<std::int64_t>(layers.size()));
            layers.push_back(std::make_unique<nn::MaxPoolLayer>());
            cur = {cur[0] / 2, cur[1] / 2, cur[2]};
        } else {
            pool_index.push_back(nn::UnpoolLayer::no_source);
        }
    }
    const Shape map_shape = shapes.back();
    const std::size_t flat = shape_size(map_shape);
    layers.push_back(std::make_unique<nn::UnrollLayer>());
    layers.push_back(std::make_unique<nn::DenseLayer>(flat, spec.bottleneck, spec.bottleneck_activation, rng));
    encoder_layers = layers.size();

    layers.push_back(std::make_unique<nn::DenseLayer>(spec.bottleneck, flat, spec.hidden_activation, rng));
    layers.push_back(std::make_unique<nn::RollLayer>(map_shape));
    for (std::size_t s = spec.stages.size(); s-- > 0;) {
        const auto& st = spec.stages[s];
        if (st.pool) layers.push_back(std::make_unique<nn::UnpoolLayer>(pre_pool[s], pool_index[s]));
        const auto act = s == 0 ? spec.output_activation : spec.hidden_activation;
        layers.push_back(std::make_unique<nn::DeconvLayer>(st.filter, st.count, in_channels[s], act, rng));
    }
    return {Network(spec.input_shape, std::move(layers)), encoder_layers};
}

namespace {

Autoencoder train(std::span<const Tensor> xs, const AutoencoderSpec& spec, const nn::TrainConfig& cfg) {
    SeededRng init(SeededRng::derive(cfg.seed(), 0xAE));
    auto built = build_autoencoder(spec, init);
    auto result = nn::sgd_train(std::move(built.network), xs, xs, cfg);
    return {result.network.slice(0, built.encoder_layers),
            result.network.slice(built.encoder_layers, result.network.size()), std::move(result.loss_history)};
}

}  // namespace

Autoencoder ae_fit(const Tensor& x, const AutoencoderSpec& spec, const nn::TrainConfig& cfg) {
    if (spec.kind != AutoencoderSpec::Kind::dense) throw SpecError("ae_fit needs a dense spec");
    spec.validate();
    if (x.rank() != 2 || x.dim(1) != spec.input_shape[0])
        throw ShapeError("ae_fit: data " + shape_string(x.shape()) + " does not match input width " +
                         std::to_string(spec.input_shape[0]));
    std::vector<Tensor> rows;
    rows.reserve(x.dim(0));
    for (std::size_t i = 0; i < x.dim(0); ++i) rows.push_back(x.row(i));
    return train(rows, spec, cfg);
}

Autoencoder conv_ae_fit(std::span<const Tensor> images, const AutoencoderSpec& spec, const nn::TrainConfig& cfg) {
    if (spec.kind != AutoencoderSpec::Kind::conv) throw SpecError("conv_ae_fit needs a conv spec");
    spec.validate();
    for (std::size_t i = 0; i < images.size(); ++i)
        if (images[i].shape() != spec.input_shape)
            throw ShapeError("image " + std::to_string(i) + " has shape " + shape_string(images[i].shape()) +
                             ", expected " + shape_string(spec.input_shape));
    return train(images, spec, cfg);
}

EmbeddingTable encode_batch(const nn::Network& encoder, std::span<const Tensor> xs, std::span<const std::string> ids) {
    if (!ids.empty() && ids.size() != xs.size())
        throw ArgumentError("encode_batch: " + std::to_string(ids.size()) + " ids for " + std::to_string(xs.size()) +
                            " items");
    EmbeddingTable table(shape_size(encoder.output_shape()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const std::string id = ids.empty() ? std::to_string(i) : ids[i];
        if (xs[i].shape() != encoder.input_shape())
            throw ShapeError("item '" + id + "' has shape " + shape_string(xs[i].shape()) + ", encoder expects " +
                             shape_string(encoder.input_shape()));
        const Tensor z = encoder.predict(xs[i]);
        table.add(id, z.values());
    }
    return table;
}

}  // namespace ratemb::autoencode
