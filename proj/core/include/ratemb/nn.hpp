#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ratemb/rng.hpp"
#include "ratemb/tensor.hpp"

namespace ratemb::nn {

enum class Activation { identity, tanh, sigmoid, relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);
double activate(Activation a, double z);
/// Derivative expressed through the activation output y. ReLU uses 0 at the kink.
double activation_slope(Activation a, double y);

enum class LossKind { squared_error, binary_cross_entropy };

std::string_view to_string(LossKind k);
LossKind parse_loss(std::string_view name);

/// Squared error is the plain sum of (prediction - target)^2. Cross-entropy
/// clamps predictions to [1e-12, 1 - 1e-12].
double loss_value(LossKind kind, const Tensor& prediction, const Tensor& target);
Tensor loss_gradient(LossKind kind, const Tensor& prediction, const Tensor& target);

/// Per-forward scratch owned by the caller, never by the layer, so a trained
/// network can be shared read-only across threads.
struct LayerCache {
    std::vector<std::size_t> indices;
};

/// Weights drawn uniformly on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_init(Shape shape, std::size_t fan_in, SeededRng& rng);

class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string_view kind() const = 0;

    /// Output shape for a given input shape; throws ShapeError if incompatible.
    virtual Shape output_shape(const Shape& input) const = 0;

    /// `earlier` holds the caches of all preceding layers of the same network.
    virtual Tensor forward(const Tensor& x, LayerCache& cache, std::span<const LayerCache> earlier) const = 0;

    /// Accumulates parameter gradients into `grads` (same order and shapes as
    /// parameters()) and returns dLoss/dx.
    virtual Tensor backward(const Tensor& x, const Tensor& y, const LayerCache& cache,
                            std::span<const LayerCache> earlier, const Tensor& dy,
                            std::span<Tensor> grads) const = 0;

    virtual std::unique_ptr<Layer> clone() const = 0;

    /// Header line (kind and hyperparameters), then one line per parameter tensor.
    virtual void write(std::ostream& os) const = 0;

    std::span<Tensor> parameters() { return params_; }
    std::span<const Tensor> parameters() const { return params_; }

protected:
    std::vector<Tensor> params_;
};

/// y = act(x W + b) for a rank-1 input of length `in`.
class DenseLayer final : public Layer {
public:
    DenseLayer(std::size_t in, std::size_t out, Activation act, SeededRng& rng);
    DenseLayer(Tensor weights, Tensor bias, Activation act);

    std::string_view kind() const override { return "dense"; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const override;
    Tensor backward(const Tensor& x, const Tensor& y, const LayerCache&, std::span<const LayerCache>,
                    const Tensor& dy, std::span<Tensor> grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
    void write(std::ostream& os) const override;

    std::size_t in() const { return params_[0].dim(0); }
    std::size_t out() const { return params_[0].dim(1); }
    Activation activation() const { return act_; }

private:
    Activation act_;
};

/// Valid cross-correlation with f x f x C x K filters plus per-output-channel bias.
class ConvLayer final : public Layer {
public:
    ConvLayer(std::size_t f, std::size_t channels, std::size_t count, Activation act, SeededRng& rng);
    ConvLayer(Tensor filters, Tensor bias, Activation act);

    std::string_view kind() const override { return "conv"; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const override;
    Tensor backward(const Tensor& x, const Tensor& y, const LayerCache&, std::span<const LayerCache>,
                    const Tensor& dy, std::span<Tensor> grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ConvLayer>(*this); }
    void write(std::ostream& os) const override;

private:
    Activation act_;
};

/// Transposed convolution: grows an H x W x K map to (H+f-1) x (W+f-1) x C.
/// Filters are stored as f x f x C x K, the bank of the convolution it mirrors.
class DeconvLayer final : public Layer {
public:
    DeconvLayer(std::size_t f, std::size_t in_channels, std::size_t out_channels, Activation act, SeededRng& rng);
    DeconvLayer(Tensor filters, Tensor bias, Activation act);

    std::string_view kind() const override { return "deconv"; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const override;
    Tensor backward(const Tensor& x, const Tensor& y, const LayerCache&, std::span<const LayerCache>,
                    const Tensor& dy, std::span<Tensor> grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DeconvLayer>(*this); }
    void write(std::ostream& os) const override;

private:
    Activation act_;
};

/// 2x2 stride-2 max pooling; argmax switches go to the cache.
class MaxPoolLayer final : public Layer {
public:
    std::string_view kind() const override { return "maxpool"; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& x, LayerCache& cache, std::span<const LayerCache>) const override;
    Tensor backward(const Tensor& x, const Tensor& y, const LayerCache& cache, std::span<const LayerCache>,
                    const Tensor& dy, std::span<Tensor> grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }
    void write(std::ostream& os) const override;
};

/// Max unpooling back to `target` shape using the switches recorded by the
/// pooling layer at index `source` of the same network. Without a source
/// (a decoder split off its encoder) each value goes to the top-left of its window.
class UnpoolLayer final : public Layer {
public:
    static constexpr std::int64_t no_source = -1;

    UnpoolLayer(Shape target, std::int64_t source);

    std::string_view kind() const override { return "unpool"; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& x, LayerCache& cache, std::span<const LayerCache> earlier) const override;
    Tensor backward(const Tensor& x, const Tensor& y, const LayerCache& cache, std::span<const LayerCache> earlier,
                    const Tensor& dy, std::span<Tensor> grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<UnpoolLayer>(*this); }
    void write(std::ostream& os) const override;

    std::int64_t source() const { return source_; }
    void set_source(std::int64_t s) { source_ = s; }
    const Shape& target() const { return target_; }

private:
    std::vector<std::size_t> switches(const Tensor& x, std::span<const LayerCache> earlier) const;

    Shape target_;
    std::int64_t source_;
};

class UnrollLayer final : public Layer {
public:
    std::string_view kind() const override { return "unroll"; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const override;
    Tensor backward(const Tensor& x, const Tensor& y, const LayerCache&, std::span<const LayerCache>,
                    const Tensor& dy, std::span<Tensor> grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<UnrollLayer>(*this); }
    void write(std::ostream& os) const override;
};

class RollLayer final : public Layer {
public:
    explicit RollLayer(Shape target);

    std::string_view kind() const override { return "roll"; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const override;
    Tensor backward(const Tensor& x, const Tensor& y, const LayerCache&, std::span<const LayerCache>,
                    const Tensor& dy, std::span<Tensor> grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<RollLayer>(*this); }
    void write(std::ostream& os) const override;

private:
    Shape target_;
};

/// Fixed per-channel standardization (x - shift[c]) / scale[c] of an
/// H x W x C map. Not trainable.
class ChannelAffineLayer final : public Layer {
public:
    ChannelAffineLayer(std::vector<double> shift, std::vector<double> scale);

    std::string_view kind() const override { return "channel-affine"; }
    Shape output_shape(const Shape& input) const override;
    Tensor forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const override;
    Tensor backward(const Tensor& x, const Tensor& y, const LayerCache&, std::span<const LayerCache>,
                    const Tensor& dy, std::span<Tensor> grads) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ChannelAffineLayer>(*this); }
    void write(std::ostream& os) const override;

    const std::vector<double>& shift() const { return shift_; }
    const std::vector<double>& scale() const { return scale_; }

private:
    std::vector<double> shift_;
    std::vector<double> scale_;
};

/// Activations of one forward pass: outputs[i] is the output of layer i.
struct Trace {
    std::vector<Tensor> outputs;
    std::vector<LayerCache> caches;

    const Tensor& prediction() const { return outputs.back(); }
};

/// Per layer, one gradient tensor per parameter tensor.
using Gradients = std::vector<std::vector<Tensor>>;

class Network {
public:
    using LayerList = std::vector<std::unique_ptr<Layer>>;

    /// Validates that every layer accepts its predecessor's output shape.
    Network(Shape input_shape, LayerList layers, LossKind loss = LossKind::squared_error);

    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    const Shape& input_shape() const { return input_shape_; }
    const Shape& output_shape() const;
    const Shape& layer_output_shape(std::size_t i) const { return shapes_.at(i); }
    std::size_t size() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }
    LossKind loss() const { return loss_; }
    std::size_t parameter_count() const;

    Trace forward(const Tensor& x) const;
    Tensor predict(const Tensor& x) const;
    Gradients backward(const Tensor& x, const Trace& trace, const Tensor& target) const;
    Gradients zero_gradients() const;

    /// Layers [begin, end) as a standalone network. Unpool layers whose
    /// source falls outside the slice lose it.
    Network slice(std::size_t begin, std::size_t end) const;

    /// Prepends a layer; unpool sources shift accordingly.
    Network with_front(std::unique_ptr<Layer> front) const;

private:
    Shape input_shape_;
    LayerList layers_;
    LossKind loss_;
    std::vector<Shape> shapes_;
};

/// Plain mini-batch SGD settings. Constructor rejects non-positive values.
class TrainConfig {
public:
    TrainConfig(double learning_rate, std::size_t epochs, std::size_t batch_size, std::uint64_t seed,
                bool shuffle = true);

    double learning_rate() const { return learning_rate_; }
    std::size_t epochs() const { return epochs_; }
    std::size_t batch_size() const { return batch_size_; }
    std::uint64_t seed() const { return seed_; }
    bool shuffle() const { return shuffle_; }

private:
    double learning_rate_;
    std::size_t epochs_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    bool shuffle_;
};

struct TrainResult {
    Network network;
    /// Mean per-example loss of each epoch, accumulated before each batch update.
    std::vector<double> loss_history;
};

/// Gradients are averaged over each batch and summed in index order, so the
/// result is a pure function of (initial network, data, config).
TrainResult sgd_train(Network net, std::span<const Tensor> inputs, std::span<const Tensor> targets,
                      const TrainConfig& cfg);

double network_loss(const Network& net, const Tensor& x, const Tensor& target);

/// Max over parameters of |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
/// with central differences of step epsilon.
double grad_check(const Network& net, const Tensor& x, const Tensor& target, double epsilon = 1e-5);

/// Output of layer `layer_index` for input x, unrolled to rank 1 if needed.
Tensor extract_embedding(const Network& net, std::size_t layer_index, const Tensor& x);

void save_network(const Network& net, std::ostream& os);
Network load_network(std::istream& is);
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace ratemb::nn
