#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ratemb {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& s);
std::size_t shape_size(const Shape& s);

/// Dense row-major array of doubles with an explicit shape.
///
/// Rank-3 tensors are images or feature maps laid out height x width x channel.
/// Rank-4 tensors are convolution filter banks laid out f x f x in x out.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& data() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    double& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    /// Same data, new shape of equal size.
    Tensor reshaped(Shape shape) const;

    /// Row i of a rank-2 tensor as a rank-1 tensor.
    Tensor row(std::size_t i) const;

    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Stride-1, unpadded cross-correlation:
/// out[i][j][k] = sum_{u,v,c} in[i+u][j+v][c] * filters[u][v][c][k].
Tensor conv2d_valid(const Tensor& input, const Tensor& filters);

/// Transpose of conv2d_valid with respect to its input. Maps an
/// (H-f+1) x (W-f+1) x K map back to H x W x C using the same f x f x C x K bank.
Tensor conv2d_transpose(const Tensor& input, const Tensor& filters);

/// Flattens q x q x c left to right, top to bottom, front to back:
/// element (i, j, k) lands at k*H*W + i*W + j.
Tensor unroll(const Tensor& t);

/// Inverse of unroll.
Tensor roll(const Tensor& v, const Shape& shape);

struct PoolResult {
    Tensor output;
    // Flat index into the input of each pooled maximum, one per output element.
    std::vector<std::size_t> argmax;
};

/// 2x2 max pooling with stride 2 over an H x W x C map. Odd trailing rows and
/// columns are dropped. Ties keep the first element in row-major window order.
PoolResult max_pool2(const Tensor& input);

/// Scatters each pooled value back to its recorded argmax inside an
/// input_shape tensor; all other entries are zero.
Tensor max_unpool2(const Tensor& pooled, const std::vector<std::size_t>& argmax,
                   const Shape& input_shape);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace ratemb
