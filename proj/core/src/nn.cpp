#include "ratemb/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "ratemb/error.hpp"
#include "ratemb/textio.hpp"

namespace ratemb::nn {

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
    }
    return "identity";
}

Activation parse_activation(std::string_view name) {
    if (name == "identity" || name == "linear") return Activation::identity;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "relu") return Activation::relu;
    throw ArgumentError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double z) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::tanh: return std::tanh(z);
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::relu: return z > 0.0 ? z : 0.0;
    }
    return z;
}

double activation_slope(Activation a, double y) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::tanh: return 1.0 - y * y;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

std::string_view to_string(LossKind k) {
    return k == LossKind::squared_error ? "squared-error" : "binary-cross-entropy";
}

LossKind parse_loss(std::string_view name) {
    if (name == "squared-error" || name == "mse") return LossKind::squared_error;
    if (name == "binary-cross-entropy" || name == "bce") return LossKind::binary_cross_entropy;
    throw ArgumentError("unknown loss '" + std::string(name) + "'");
}

namespace {

constexpr double kProbFloor = 1e-12;

void check_same(const Tensor& prediction, const Tensor& target) {
    if (prediction.shape() != target.shape())
        throw ShapeError("target shape " + shape_string(target.shape()) + " does not match prediction shape " +
                         shape_string(prediction.shape()));
}

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

}  // namespace

double loss_value(LossKind kind, const Tensor& prediction, const Tensor& target) {
    check_same(prediction, target);
    // Neumaier summation keeps finite-difference probes of the loss clean.
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        double term;
        if (kind == LossKind::squared_error) {
            const double d = prediction[i] - target[i];
            term = d * d;
        } else {
            const double p = clamp_prob(prediction[i]);
            term = -(target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p));
        }
        const double t = s + term;
        c += std::abs(s) >= std::abs(term) ? (s - t) + term : (term - t) + s;
        s = t;
    }
    return s + c;
}

Tensor loss_gradient(LossKind kind, const Tensor& prediction, const Tensor& target) {
    check_same(prediction, target);
    Tensor g(prediction.shape());
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        if (kind == LossKind::squared_error) {
            g[i] = 2.0 * (prediction[i] - target[i]);
        } else {
            const double p = clamp_prob(prediction[i]);
            g[i] = (p - target[i]) / (p * (1.0 - p));
        }
    }
    return g;
}

Tensor uniform_init(Shape shape, std::size_t fan_in, SeededRng& rng) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (auto& v : t.values()) v = rng.uniform(-bound, bound);
    return t;
}

namespace {

void apply_activation(Tensor& t, Activation a) {
    if (a == Activation::identity) return;
    for (auto& v : t.values()) v = activate(a, v);
}

Tensor pre_activation_grad(const Tensor& y, const Tensor& dy, Activation a) {
    Tensor dz(dy.shape());
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = dy[i] * activation_slope(a, y[i]);
    return dz;
}

void write_shape(std::ostream& os, const Shape& s) {
    for (auto d : s) os << ' ' << d;
}

}  // namespace

// ---------------------------------------------------------------- dense

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act, SeededRng& rng) : act_(act) {
    params_.push_back(uniform_init({in, out}, in, rng));
    params_.push_back(uniform_init({out}, in, rng));
}

DenseLayer::DenseLayer(Tensor weights, Tensor bias, Activation act) : act_(act) {
    if (weights.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weights.dim(1))
        throw ShapeError("dense: weights " + shape_string(weights.shape()) + " and bias " +
                         shape_string(bias.shape()) + " are inconsistent");
    params_.push_back(std::move(weights));
    params_.push_back(std::move(bias));
}

Shape DenseLayer::output_shape(const Shape& input) const {
    if (input != Shape{in()})
        throw ShapeError("dense expects input " + shape_string({in()}) + ", got " + shape_string(input));
    return {out()};
}

Tensor DenseLayer::forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const {
    output_shape(x.shape());
    const Tensor& w = params_[0];
    Tensor y = params_[1];
    const std::size_t n_in = in(), n_out = out();
    for (std::size_t i = 0; i < n_in; ++i) {
        const double xi = x[i];
        for (std::size_t j = 0; j < n_out; ++j) y[j] += xi * w.at(i, j);
    }
    apply_activation(y, act_);
    return y;
}

Tensor DenseLayer::backward(const Tensor& x, const Tensor& y, const LayerCache&, std::span<const LayerCache>,
                            const Tensor& dy, std::span<Tensor> grads) const {
    const Tensor dz = pre_activation_grad(y, dy, act_);
    const Tensor& w = params_[0];
    const std::size_t n_in = in(), n_out = out();
    Tensor dx({n_in});
    for (std::size_t i = 0; i < n_in; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n_out; ++j) {
            grads[0].at(i, j) += x[i] * dz[j];
            acc += w.at(i, j) * dz[j];
        }
        dx[i] = acc;
    }
    for (std::size_t j = 0; j < n_out; ++j) grads[1][j] += dz[j];
    return dx;
}

void DenseLayer::write(std::ostream& os) const {
    os << "dense " << in() << ' ' << out() << ' ' << to_string(act_) << '\n';
    write_values(os, params_[0].values());
    write_values(os, params_[1].values());
}

// ---------------------------------------------------------------- conv

ConvLayer::ConvLayer(std::size_t f, std::size_t channels, std::size_t count, Activation act, SeededRng& rng)
    : act_(act) {
    const std::size_t fan_in = f * f * channels;
    params_.push_back(uniform_init({f, f, channels, count}, fan_in, rng));
    params_.push_back(uniform_init({count}, fan_in, rng));
}

ConvLayer::ConvLayer(Tensor filters, Tensor bias, Activation act) : act_(act) {
    if (filters.rank() != 4 || filters.dim(0) != filters.dim(1) || bias.rank() != 1 || bias.dim(0) != filters.dim(3))
        throw ShapeError("conv: filters " + shape_string(filters.shape()) + " and bias " + shape_string(bias.shape()) +
                         " are inconsistent");
    params_.push_back(std::move(filters));
    params_.push_back(std::move(bias));
}

Shape ConvLayer::output_shape(const Shape& input) const {
    const Tensor& f = params_[0];
    const std::size_t k = f.dim(0);
    if (input.size() != 3 || input[2] != f.dim(2) || input[0] < k || input[1] < k)
        throw ShapeError("conv with filters " + shape_string(f.shape()) + " cannot take input " + shape_string(input));
    return {input[0] - k + 1, input[1] - k + 1, f.dim(3)};
}

Tensor ConvLayer::forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const {
    Tensor y = conv2d_valid(x, params_[0]);
    const Tensor& b = params_[1];
    const std::size_t k = b.size();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i % k];
    apply_activation(y, act_);
    return y;
}

Tensor ConvLayer::backward(const Tensor& x, const Tensor& y, const LayerCache&, std::span<const LayerCache>,
                           const Tensor& dy, std::span<Tensor> grads) const {
    const Tensor dz = pre_activation_grad(y, dy, act_);
    const Tensor& filters = params_[0];
    const std::size_t f = filters.dim(0), c = filters.dim(2), k = filters.dim(3);
    const std::size_t oh = dz.dim(0), ow = dz.dim(1);
    Tensor& gf = grads[0];
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t u = 0; u < f; ++u)
                for (std::size_t v = 0; v < f; ++v)
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const double xv = x.at(i + u, j + v, ch);
                        for (std::size_t kk = 0; kk < k; ++kk) gf.at(u, v, ch, kk) += xv * dz.at(i, j, kk);
                    }
    for (std::size_t i = 0; i < dz.size(); ++i) grads[1][i % k] += dz[i];
    return conv2d_transpose(dz, filters);
}

void ConvLayer::write(std::ostream& os) const {
    const Tensor& f = params_[0];
    os << "conv " << f.dim(0) << ' ' << f.dim(2) << ' ' << f.dim(3) << ' ' << to_string(act_) << '\n';
    write_values(os, params_[0].values());
    write_values(os, params_[1].values());
}

// ---------------------------------------------------------------- deconv

DeconvLayer::DeconvLayer(std::size_t f, std::size_t in_channels, std::size_t out_channels, Activation act,
                         SeededRng& rng)
    : act_(act) {
    const std::size_t fan_in = f * f * in_channels;
    params_.push_back(uniform_init({f, f, out_channels, in_channels}, fan_in, rng));
    params_.push_back(uniform_init({out_channels}, fan_in, rng));
}

DeconvLayer::DeconvLayer(Tensor filters, Tensor bias, Activation act) : act_(act) {
    if (filters.rank() != 4 || filters.dim(0) != filters.dim(1) || bias.rank() != 1 || bias.dim(0) != filters.dim(2))
        throw ShapeError("deconv: filters " + shape_string(filters.shape()) + " and bias " +
                         shape_string(bias.shape()) + " are inconsistent");
    params_.push_back(std::move(filters));
    params_.push_back(std::move(bias));
}

Shape DeconvLayer::output_shape(const Shape& input) const {
    const Tensor& f = params_[0];
    if (input.size() != 3 || input[2] != f.dim(3))
        throw ShapeError("deconv with filters " + shape_string(f.shape()) + " cannot take input " +
                         shape_string(input));
    return {input[0] + f.dim(0) - 1, input[1] + f.dim(0) - 1, f.dim(2)};
}

Tensor DeconvLayer::forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const {
    Tensor y = conv2d_transpose(x, params_[0]);
    const Tensor& b = params_[1];
    const std::size_t c = b.size();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i % c];
    apply_activation(y, act_);
    return y;
}

Tensor DeconvLayer::backward(const Tensor& x, const Tensor& y, const LayerCache&, std::span<const LayerCache>,
                             const Tensor& dy, std::span<Tensor> grads) const {
    const Tensor dz = pre_activation_grad(y, dy, act_);
    const Tensor& filters = params_[0];
    const std::size_t f = filters.dim(0), c = filters.dim(2), k = filters.dim(3);
    const std::size_t ih = x.dim(0), iw = x.dim(1);
    Tensor& gf = grads[0];
    for (std::size_t i = 0; i < ih; ++i)
        for (std::size_t j = 0; j < iw; ++j)
            for (std::size_t u = 0; u < f; ++u)
                for (std::size_t v = 0; v < f; ++v)
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const double d = dz.at(i + u, j + v, ch);
                        for (std::size_t kk = 0; kk < k; ++kk) gf.at(u, v, ch, kk) += x.at(i, j, kk) * d;
                    }
    for (std::size_t i = 0; i < dz.size(); ++i) grads[1][i % c] += dz[i];
    return conv2d_valid(dz, filters);
}

void DeconvLayer::write(std::ostream& os) const {
    const Tensor& f = params_[0];
    os << "deconv " << f.dim(0) << ' ' << f.dim(3) << ' ' << f.dim(2) << ' ' << to_string(act_) << '\n';
    write_values(os, params_[0].values());
    write_values(os, params_[1].values());
}

// ---------------------------------------------------------------- pooling

Shape MaxPoolLayer::output_shape(const Shape& input) const {
    if (input.size() != 3) throw ShapeError("maxpool needs an HxWxC input, got " + shape_string(input));
    if (input[0] < 2 || input[1] < 2)
        throw ShapeError("maxpool would reduce " + shape_string(input) + " to an empty map");
    return {input[0] / 2, input[1] / 2, input[2]};
}

Tensor MaxPoolLayer::forward(const Tensor& x, LayerCache& cache, std::span<const LayerCache>) const {
    auto r = max_pool2(x);
    cache.indices = std::move(r.argmax);
    return std::move(r.output);
}

Tensor MaxPoolLayer::backward(const Tensor& x, const Tensor&, const LayerCache& cache, std::span<const LayerCache>,
                              const Tensor& dy, std::span<Tensor>) const {
    Tensor dx(x.shape());
    for (std::size_t o = 0; o < dy.size(); ++o) dx[cache.indices[o]] += dy[o];
    return dx;
}

void MaxPoolLayer::write(std::ostream& os) const { os << "maxpool\n"; }

UnpoolLayer::UnpoolLayer(Shape target, std::int64_t source) : target_(std::move(target)), source_(source) {
    if (target_.size() != 3 || target_[0] < 2 || target_[1] < 2)
        throw ShapeError("unpool target " + shape_string(target_) + " is not a poolable HxWxC shape");
}

Shape UnpoolLayer::output_shape(const Shape& input) const {
    const Shape pooled{target_[0] / 2, target_[1] / 2, target_[2]};
    if (input != pooled)
        throw ShapeError("unpool to " + shape_string(target_) + " expects input " + shape_string(pooled) + ", got " +
                         shape_string(input));
    return target_;
}

std::vector<std::size_t> UnpoolLayer::switches(const Tensor& x, std::span<const LayerCache> earlier) const {
    if (source_ >= 0 && static_cast<std::size_t>(source_) < earlier.size()) {
        const auto& idx = earlier[static_cast<std::size_t>(source_)].indices;
        if (idx.size() != x.size())
            throw ShapeError("unpool: source layer " + std::to_string(source_) + " recorded " +
                             std::to_string(idx.size()) + " switches for " + std::to_string(x.size()) + " values");
        return idx;
    }
    const std::size_t oh = x.dim(0), ow = x.dim(1), c = x.dim(2), w = target_[1];
    std::vector<std::size_t> sw(x.size());
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t k = 0; k < c; ++k) sw[(i * ow + j) * c + k] = ((2 * i) * w + 2 * j) * c + k;
    return sw;
}

Tensor UnpoolLayer::forward(const Tensor& x, LayerCache&, std::span<const LayerCache> earlier) const {
    return max_unpool2(x, switches(x, earlier), target_);
}

Tensor UnpoolLayer::backward(const Tensor& x, const Tensor&, const LayerCache&, std::span<const LayerCache> earlier,
                             const Tensor& dy, std::span<Tensor>) const {
    const auto sw = switches(x, earlier);
    Tensor dx(x.shape());
    for (std::size_t o = 0; o < dx.size(); ++o) dx[o] = dy[sw[o]];
    return dx;
}

void UnpoolLayer::write(std::ostream& os) const {
    os << "unpool " << source_;
    write_shape(os, target_);
    os << '\n';
}

// ---------------------------------------------------------------- adapters

Shape UnrollLayer::output_shape(const Shape& input) const {
    if (input.size() != 3) throw ShapeError("unroll needs a rank-3 input, got " + shape_string(input));
    return {shape_size(input)};
}

Tensor UnrollLayer::forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const { return unroll(x); }

Tensor UnrollLayer::backward(const Tensor& x, const Tensor&, const LayerCache&, std::span<const LayerCache>,
                             const Tensor& dy, std::span<Tensor>) const {
    return roll(dy, x.shape());
}

void UnrollLayer::write(std::ostream& os) const { os << "unroll\n"; }

RollLayer::RollLayer(Shape target) : target_(std::move(target)) {
    if (target_.size() != 3) throw ShapeError("roll target must be rank 3, got " + shape_string(target_));
}

Shape RollLayer::output_shape(const Shape& input) const {
    if (input != Shape{shape_size(target_)})
        throw ShapeError("roll to " + shape_string(target_) + " cannot take input " + shape_string(input));
    return target_;
}

Tensor RollLayer::forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const {
    return roll(x, target_);
}

Tensor RollLayer::backward(const Tensor&, const Tensor&, const LayerCache&, std::span<const LayerCache>,
                           const Tensor& dy, std::span<Tensor>) const {
    return unroll(dy);
}

void RollLayer::write(std::ostream& os) const {
    os << "roll";
    write_shape(os, target_);
    os << '\n';
}

ChannelAffineLayer::ChannelAffineLayer(std::vector<double> shift, std::vector<double> scale)
    : shift_(std::move(shift)), scale_(std::move(scale)) {
    if (shift_.size() != scale_.size() || shift_.empty())
        throw ShapeError("channel-affine: shift and scale must have the same positive length");
    for (double s : scale_)
        if (!(s > 0.0)) throw ArgumentError("channel-affine: scales must be positive");
}

Shape ChannelAffineLayer::output_shape(const Shape& input) const {
    if (input.size() != 3 || input[2] != shift_.size())
        throw ShapeError("channel-affine over " + std::to_string(shift_.size()) + " channels cannot take input " +
                         shape_string(input));
    return input;
}

Tensor ChannelAffineLayer::forward(const Tensor& x, LayerCache&, std::span<const LayerCache>) const {
    Tensor y = x;
    const std::size_t c = shift_.size();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = (y[i] - shift_[i % c]) / scale_[i % c];
    return y;
}

Tensor ChannelAffineLayer::backward(const Tensor&, const Tensor&, const LayerCache&, std::span<const LayerCache>,
                                    const Tensor& dy, std::span<Tensor>) const {
    Tensor dx = dy;
    const std::size_t c = scale_.size();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] /= scale_[i % c];
    return dx;
}

void ChannelAffineLayer::write(std::ostream& os) const {
    os << "channel-affine " << shift_.size() << '\n';
    write_values(os, shift_);
    write_values(os, scale_);
}

// ---------------------------------------------------------------- network

Network::Network(Shape input_shape, LayerList layers, LossKind loss)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), loss_(loss) {
    Shape cur = input_shape_;
    if (cur.empty() || shape_size(cur) == 0) throw ShapeError("network input shape must be non-empty");
    std::vector<bool> is_pool(layers_.size(), false);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!layers_[i]) throw ArgumentError("network: layer " + std::to_string(i) + " is null");
        const Shape prev = cur;
        try {
            cur = layers_[i]->output_shape(cur);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + " (" + std::string(layers_[i]->kind()) + "): " + e.what());
        }
        is_pool[i] = layers_[i]->kind() == "maxpool";
        if (auto* up = dynamic_cast<const UnpoolLayer*>(layers_[i].get()); up && up->source() >= 0) {
            const auto s = static_cast<std::size_t>(up->source());
            if (s >= i || !is_pool[s])
                throw ShapeError("layer " + std::to_string(i) + " (unpool): source " + std::to_string(s) +
                                 " is not an earlier maxpool layer");
            if (shapes_[s] != prev)
                throw ShapeError("layer " + std::to_string(i) + " (unpool): source pool output " +
                                 shape_string(shapes_[s]) + " differs from unpool input " + shape_string(prev));
        }
        shapes_.push_back(cur);
    }
}

Network::Network(const Network& other)
    : input_shape_(other.input_shape_), loss_(other.loss_), shapes_(other.shapes_) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        Network tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

const Shape& Network::output_shape() const { return shapes_.empty() ? input_shape_ : shapes_.back(); }

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
        for (const auto& p : l->parameters()) n += p.size();
    return n;
}

Trace Network::forward(const Tensor& x) const {
    if (x.shape() != input_shape_)
        throw ShapeError("layer 0: input shape " + shape_string(x.shape()) + " does not match network input " +
                         shape_string(input_shape_));
    Trace t;
    t.outputs.reserve(layers_.size());
    t.caches.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Tensor& in = i == 0 ? x : t.outputs[i - 1];
        try {
            t.outputs.push_back(layers_[i]->forward(in, t.caches[i], std::span<const LayerCache>(t.caches.data(), i)));
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
        }
    }
    if (layers_.empty()) t.outputs.push_back(x);
    return t;
}

Tensor Network::predict(const Tensor& x) const { return forward(x).prediction(); }

Gradients Network::zero_gradients() const {
    Gradients g(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i)
        for (const auto& p : layers_[i]->parameters()) g[i].emplace_back(p.shape());
    return g;
}

Gradients Network::backward(const Tensor& x, const Trace& trace, const Tensor& target) const {
    Gradients g = zero_gradients();
    if (layers_.empty()) return g;
    Tensor dy = loss_gradient(loss_, trace.prediction(), target);
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const Tensor& in = i == 0 ? x : trace.outputs[i - 1];
        dy = layers_[i]->backward(in, trace.outputs[i], trace.caches[i],
                                  std::span<const LayerCache>(trace.caches.data(), i), dy, g[i]);
    }
    return g;
}

Network Network::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > layers_.size())
        throw ArgumentError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range");
    LayerList part;
    for (std::size_t i = begin; i < end; ++i) {
        auto l = layers_[i]->clone();
        if (auto* up = dynamic_cast<UnpoolLayer*>(l.get())) {
            const auto s = up->source();
            up->set_source(s >= static_cast<std::int64_t>(begin) ? s - static_cast<std::int64_t>(begin)
                                                                 : UnpoolLayer::no_source);
        }
        part.push_back(std::move(l));
    }
    return Network(begin == 0 ? input_shape_ : shapes_[begin - 1], std::move(part), loss_);
}

Network Network::with_front(std::unique_ptr<Layer> front) const {
    LayerList all;
    all.push_back(std::move(front));
    for (const auto& l : layers_) {
        auto c = l->clone();
        if (auto* up = dynamic_cast<UnpoolLayer*>(c.get()); up && up->source() >= 0) up->set_source(up->source() + 1);
        all.push_back(std::move(c));
    }
    Shape in = input_shape_;
    return Network(std::move(in), std::move(all), loss_);
}

// ---------------------------------------------------------------- training

TrainConfig::TrainConfig(double learning_rate, std::size_t epochs, std::size_t batch_size, std::uint64_t seed,
                         bool shuffle)
    : learning_rate_(learning_rate), epochs_(epochs), batch_size_(batch_size), seed_(seed), shuffle_(shuffle) {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ArgumentError("learning rate must be positive");
    if (epochs == 0) throw ArgumentError("epochs must be positive");
    if (batch_size == 0) throw ArgumentError("batch size must be positive");
}

TrainResult sgd_train(Network net, std::span<const Tensor> inputs, std::span<const Tensor> targets,
                      const TrainConfig& cfg) {
    if (inputs.empty()) throw ArgumentError("sgd_train: empty dataset");
    if (inputs.size() != targets.size())
        throw ArgumentError("sgd_train: " + std::to_string(inputs.size()) + " inputs but " +
                            std::to_string(targets.size()) + " targets");
    SeededRng rng(cfg.seed());
    const std::size_t n = inputs.size();
    std::vector<double> history;
    history.reserve(cfg.epochs());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs(); ++epoch) {
        if (cfg.shuffle()) order = rng.permutation(n);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size()) {
            const std::size_t stop = std::min(n, start + cfg.batch_size());
            Gradients acc = net.zero_gradients();
            for (std::size_t b = start; b < stop; ++b) {
                const auto idx = order[b];
                const Trace tr = net.forward(inputs[idx]);
                total += loss_value(net.loss(), tr.prediction(), targets[idx]);
                const Gradients g = net.backward(inputs[idx], tr, targets[idx]);
                for (std::size_t l = 0; l < g.size(); ++l)
                    for (std::size_t p = 0; p < g[l].size(); ++p)
                        for (std::size_t e = 0; e < g[l][p].size(); ++e) acc[l][p][e] += g[l][p][e];
            }
            const double step = cfg.learning_rate() / static_cast<double>(stop - start);
            for (std::size_t l = 0; l < acc.size(); ++l) {
                auto params = net.layer(l).parameters();
                for (std::size_t p = 0; p < acc[l].size(); ++p)
                    for (std::size_t e = 0; e < acc[l][p].size(); ++e) params[p][e] -= step * acc[l][p][e];
            }
        }
        const double mean = total / static_cast<double>(n);
        if (!std::isfinite(mean))
            throw Error("sgd_train: loss became non-finite at epoch " + std::to_string(epoch) +
                        "; lower the learning rate");
        history.push_back(mean);
    }
    return {std::move(net), std::move(history)};
}

double network_loss(const Network& net, const Tensor& x, const Tensor& target) {
    return loss_value(net.loss(), net.predict(x), target);
}

double grad_check(const Network& net, const Tensor& x, const Tensor& target, double epsilon) {
    if (!(epsilon > 0.0)) throw ArgumentError("grad_check: epsilon must be positive");
    const Gradients analytic = net.backward(x, net.forward(x), target);
    Network probe = net;
    double worst = 0.0;
    for (std::size_t l = 0; l < probe.size(); ++l) {
        auto params = probe.layer(l).parameters();
        for (std::size_t p = 0; p < params.size(); ++p)
            for (std::size_t e = 0; e < params[p].size(); ++e) {
                const double orig = params[p][e];
                params[p][e] = orig + epsilon;
                const double up = network_loss(probe, x, target);
                params[p][e] = orig - epsilon;
                const double down = network_loss(probe, x, target);
                params[p][e] = orig;
                const double numeric = (up - down) / (2.0 * epsilon);
                const double a = analytic[l][p][e];
                const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
                worst = std::max(worst, rel);
            }
    }
    return worst;
}

Tensor extract_embedding(const Network& net, std::size_t layer_index, const Tensor& x) {
    if (layer_index >= net.size())
        throw ArgumentError("extract_embedding: layer index " + std::to_string(layer_index) + " out of range (" +
                            std::to_string(net.size()) + " layers)");
    Network prefix = net.slice(0, layer_index + 1);
    Tensor out = prefix.predict(x);
    if (out.rank() == 3) return unroll(out);
    if (out.rank() != 1) return out.reshaped({out.size()});
    return out;
}

// ---------------------------------------------------------------- persistence

void save_network(const Network& net, std::ostream& os) {
    os << "ratemb-network 1\n";
    os << "input " << net.input_shape().size();
    write_shape(os, net.input_shape());
    os << "\nloss " << to_string(net.loss()) << "\nlayers " << net.size() << '\n';
    for (std::size_t i = 0; i < net.size(); ++i) net.layer(i).write(os);
}

namespace {

Shape read_shape(TokenReader& r, std::size_t rank) {
    Shape s(rank);
    for (auto& d : s) d = r.next_size();
    return s;
}

Tensor read_tensor(TokenReader& r, Shape s) {
    auto values = r.next_doubles(shape_size(s));
    return Tensor(std::move(s), std::move(values));
}

std::unique_ptr<Layer> read_layer(TokenReader& r) {
    const auto kind = r.next();
    const auto line = r.line();
    if (kind == "dense") {
        const auto in = r.next_size(), out = r.next_size();
        const auto act = parse_activation(r.next());
        auto w = read_tensor(r, {in, out});
        auto b = read_tensor(r, {out});
        return std::make_unique<DenseLayer>(std::move(w), std::move(b), act);
    }
    if (kind == "conv") {
        const auto f = r.next_size(), c = r.next_size(), k = r.next_size();
        const auto act = parse_activation(r.next());
        auto w = read_tensor(r, {f, f, c, k});
        auto b = read_tensor(r, {k});
        return std::make_unique<ConvLayer>(std::move(w), std::move(b), act);
    }
    if (kind == "deconv") {
        const auto f = r.next_size(), k = r.next_size(), c = r.next_size();
        const auto act = parse_activation(r.next());
        auto w = read_tensor(r, {f, f, c, k});
        auto b = read_tensor(r, {c});
        return std::make_unique<DeconvLayer>(std::move(w), std::move(b), act);
    }
    if (kind == "maxpool") return std::make_unique<MaxPoolLayer>();
    if (kind == "unpool") {
        const auto source = r.next_int();
        return std::make_unique<UnpoolLayer>(read_shape(r, 3), source);
    }
    if (kind == "unroll") return std::make_unique<UnrollLayer>();
    if (kind == "roll") return std::make_unique<RollLayer>(read_shape(r, 3));
    if (kind == "channel-affine") {
        const auto c = r.next_size();
        auto shift = r.next_doubles(c);
        auto scale = r.next_doubles(c);
        return std::make_unique<ChannelAffineLayer>(std::move(shift), std::move(scale));
    }
    throw ParseError("unknown layer kind '" + kind + "'", line);
}

}  // namespace

Network load_network(std::istream& is) {
    TokenReader r(is);
    r.expect("ratemb-network");
    r.expect("1");
    r.expect("input");
    const auto rank = r.next_size();
    Shape input = read_shape(r, rank);
    r.expect("loss");
    const auto loss = parse_loss(r.next());
    r.expect("layers");
    const auto n = r.next_size();
    Network::LayerList layers;
    for (std::size_t i = 0; i < n; ++i) layers.push_back(read_layer(r));
    return Network(std::move(input), std::move(layers), loss);
}

void save_network(const Network& net, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ArgumentError("cannot open '" + path + "' for writing");
    save_network(net, os);
}

Network load_network(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ArgumentError("cannot open '" + path + "' for reading");
    return load_network(is);
}

}  // namespace ratemb::nn
