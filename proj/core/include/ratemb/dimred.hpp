#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ratemb/tensor.hpp"

namespace ratemb::dimred {

struct Standardized {
    Tensor data;
    std::vector<double> mean;
    /// Population standard deviation; 1 for constant columns.
    std::vector<double> stddev;
};

/// Column-wise (x - mean) / stddev with the population (1/n) convention.
/// Constant columns become zeros and record stddev 1. Needs n >= 2.
Standardized standardize(const Tensor& x);

/// Applies previously computed statistics to new rows.
Tensor apply_standardization(const Tensor& x, std::span<const double> mean, std::span<const double> stddev);

/// Linear encoder/decoder pair. components is p x l with orthonormal columns.
struct PcaModel {
    std::vector<double> mean;
    Tensor components;
    /// Variances along the retained components, non-increasing.
    std::vector<double> eigenvalues;
    /// The full covariance spectrum (all p eigenvalues), non-increasing.
    std::vector<double> spectrum;

    std::size_t input_dim() const { return mean.size(); }
    std::size_t code_dim() const { return eigenvalues.size(); }
};

/// Eigen-decomposes the covariance (1/n convention) of the centered rows of x
/// with cyclic Jacobi and keeps the leading `dim` eigenvectors.
PcaModel pca_fit(const Tensor& x, std::size_t dim);

/// components^T (x - mean).
std::vector<double> pca_encode(const PcaModel& model, std::span<const double> x);

/// mean + components z.
std::vector<double> pca_decode(const PcaModel& model, std::span<const double> z);

using VectorMap = std::function<std::vector<double>(std::span<const double>)>;

/// Sum over rows and columns of (decode(encode(x_i))_j - x_ij)^2.
double reconstruction_error(const VectorMap& encode, const VectorMap& decode, const Tensor& x);

double pca_reconstruction_error(const PcaModel& model, const Tensor& x);

void save_pca(const PcaModel& model, std::ostream& os);
PcaModel load_pca(std::istream& is);

}  // namespace ratemb::dimred
