#include "ratemb/tensor.hpp"

#include <cmath>
#include <sstream>

#include "ratemb/error.hpp"

namespace ratemb {

std::string shape_string(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

namespace {

void check_dims(const Shape& s) {
    for (auto d : s)
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(s));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_dims(shape_);
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims(shape_);
    if (shape_size(shape_) != data_.size())
        throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> v;
    v.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged matrix literal");
        v.insert(v.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(v));
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

Tensor Tensor::row(std::size_t i) const {
    if (rank() != 2) throw ShapeError("row() needs a rank-2 tensor, got " + shape_string(shape_));
    const std::size_t c = shape_[1];
    return Tensor::vector(std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(i * c),
                                              data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * c)));
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a.at(i, p);
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += aip * b.at(p, j);
        }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: rank-2 tensor required, got " + shape_string(a.shape()));
    Tensor out({a.dim(1), a.dim(0)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

namespace {

void check_filters(const Tensor& filters, std::size_t channels, const char* op) {
    if (filters.rank() != 4 || filters.dim(0) != filters.dim(1) || filters.dim(2) != channels)
        throw ShapeError(std::string(op) + ": filter bank " + shape_string(filters.shape()) +
                         " incompatible with " + std::to_string(channels) + " input channels");
}

}  // namespace

Tensor conv2d_valid(const Tensor& input, const Tensor& filters) {
    if (input.rank() != 3) throw ShapeError("conv2d_valid: input must be HxWxC, got " + shape_string(input.shape()));
    const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
    check_filters(filters, c, "conv2d_valid");
    const std::size_t f = filters.dim(0), k = filters.dim(3);
    if (f > h || f > w)
        throw ShapeError("conv2d_valid: filter " + shape_string(filters.shape()) + " larger than input " +
                         shape_string(input.shape()));
    const std::size_t oh = h - f + 1, ow = w - f + 1;
    Tensor out({oh, ow, k});
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t u = 0; u < f; ++u)
                for (std::size_t v = 0; v < f; ++v)
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const double x = input.at(i + u, j + v, ch);
                        for (std::size_t kk = 0; kk < k; ++kk) out.at(i, j, kk) += x * filters.at(u, v, ch, kk);
                    }
    return out;
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& filters) {
    if (input.rank() != 3)
        throw ShapeError("conv2d_transpose: input must be HxWxK, got " + shape_string(input.shape()));
    if (filters.rank() != 4 || filters.dim(0) != filters.dim(1) || filters.dim(3) != input.dim(2))
        throw ShapeError("conv2d_transpose: filter bank " + shape_string(filters.shape()) +
                         " incompatible with input " + shape_string(input.shape()));
    const std::size_t f = filters.dim(0), c = filters.dim(2), k = filters.dim(3);
    const std::size_t ih = input.dim(0), iw = input.dim(1);
    Tensor out({ih + f - 1, iw + f - 1, c});
    for (std::size_t i = 0; i < ih; ++i)
        for (std::size_t j = 0; j < iw; ++j)
            for (std::size_t u = 0; u < f; ++u)
                for (std::size_t v = 0; v < f; ++v)
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        double acc = 0.0;
                        for (std::size_t kk = 0; kk < k; ++kk) acc += input.at(i, j, kk) * filters.at(u, v, ch, kk);
                        out.at(i + u, j + v, ch) += acc;
                    }
    return out;
}

Tensor unroll(const Tensor& t) {
    if (t.rank() != 3) throw ShapeError("unroll: rank-3 tensor required, got " + shape_string(t.shape()));
    const std::size_t h = t.dim(0), w = t.dim(1), c = t.dim(2);
    std::vector<double> flat(t.size());
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t k = 0; k < c; ++k) flat[k * h * w + i * w + j] = t.at(i, j, k);
    return Tensor::vector(std::move(flat));
}

Tensor roll(const Tensor& v, const Shape& shape) {
    if (shape.size() != 3) throw ShapeError("roll: target shape must be rank 3, got " + shape_string(shape));
    if (v.rank() != 1 || v.size() != shape_size(shape))
        throw ShapeError("roll: cannot roll " + shape_string(v.shape()) + " into " + shape_string(shape));
    const std::size_t h = shape[0], w = shape[1], c = shape[2];
    Tensor out(shape);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            for (std::size_t k = 0; k < c; ++k) out.at(i, j, k) = v[k * h * w + i * w + j];
    return out;
}

PoolResult max_pool2(const Tensor& input) {
    if (input.rank() != 3) throw ShapeError("max_pool2: HxWxC input required, got " + shape_string(input.shape()));
    const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
    if (h < 2 || w < 2) throw ShapeError("max_pool2: input " + shape_string(input.shape()) + " too small to pool");
    const std::size_t oh = h / 2, ow = w / 2;
    PoolResult r{Tensor({oh, ow, c}), std::vector<std::size_t>(oh * ow * c)};
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t k = 0; k < c; ++k) {
                std::size_t best = ((2 * i) * w + 2 * j) * c + k;
                for (std::size_t u = 0; u < 2; ++u)
                    for (std::size_t v = 0; v < 2; ++v) {
                        const std::size_t idx = ((2 * i + u) * w + (2 * j + v)) * c + k;
                        if (input[idx] > input[best]) best = idx;
                    }
                const std::size_t o = (i * ow + j) * c + k;
                r.output[o] = input[best];
                r.argmax[o] = best;
            }
    return r;
}

Tensor max_unpool2(const Tensor& pooled, const std::vector<std::size_t>& argmax, const Shape& input_shape) {
    if (argmax.size() != pooled.size())
        throw ShapeError("max_unpool2: " + std::to_string(argmax.size()) + " switches for " +
                         std::to_string(pooled.size()) + " pooled values");
    Tensor out(input_shape);
    for (std::size_t o = 0; o < pooled.size(); ++o) {
        if (argmax[o] >= out.size()) throw ShapeError("max_unpool2: switch index out of range");
        out[argmax[o]] = pooled[o];
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ShapeError("dot: length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace ratemb
