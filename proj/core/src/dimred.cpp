#include "ratemb/dimred.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "ratemb/error.hpp"
#include "ratemb/linalg.hpp"
#include "ratemb/textio.hpp"

namespace ratemb::dimred {

Standardized standardize(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("standardize: n x p matrix required, got " + shape_string(x.shape()));
    const std::size_t n = x.dim(0), p = x.dim(1);
    if (n < 2) throw ArgumentError("standardize: need at least 2 rows, got " + std::to_string(n));
    Standardized s{x, linalg::column_means(x), std::vector<double>(p, 0.0)};
    for (std::size_t j = 0; j < p; ++j) {
        bool constant = true;
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            constant = constant && x.at(i, j) == x.at(0, j);
            const double d = x.at(i, j) - s.mean[j];
            ss += d * d;
        }
        if (constant) {
            // Exact constant: mean is the value itself so the column maps to 0.
            s.mean[j] = x.at(0, j);
            s.stddev[j] = 1.0;
        } else {
            s.stddev[j] = std::sqrt(ss / static_cast<double>(n));
        }
    }
    s.data = apply_standardization(x, s.mean, s.stddev);
    return s;
}

Tensor apply_standardization(const Tensor& x, std::span<const double> mean, std::span<const double> stddev) {
    if (x.rank() != 2 || x.dim(1) != mean.size() || mean.size() != stddev.size())
        throw ShapeError("apply_standardization: " + shape_string(x.shape()) + " vs " +
                         std::to_string(mean.size()) + " column statistics");
    Tensor out = x;
    for (std::size_t i = 0; i < x.dim(0); ++i)
        for (std::size_t j = 0; j < x.dim(1); ++j) out.at(i, j) = (x.at(i, j) - mean[j]) / stddev[j];
    return out;
}

PcaModel pca_fit(const Tensor& x, std::size_t dim) {
    if (x.rank() != 2) throw ShapeError("pca_fit: n x p matrix required, got " + shape_string(x.shape()));
    const std::size_t n = x.dim(0), p = x.dim(1);
    if (n < 2) throw ArgumentError("pca_fit: need at least 2 rows, got " + std::to_string(n));
    if (dim < 1 || dim > p)
        throw ArgumentError("pca_fit: code dimension " + std::to_string(dim) + " outside [1, " + std::to_string(p) + "]");
    const auto eig = linalg::symmetric_eigen(linalg::covariance(x, static_cast<double>(n)));
    PcaModel m{linalg::column_means(x), Tensor({p, dim}), {}, eig.values};
    for (std::size_t j = 0; j < dim; ++j) {
        m.eigenvalues.push_back(eig.values[j]);
        for (std::size_t i = 0; i < p; ++i) m.components.at(i, j) = eig.vectors.at(i, j);
    }
    return m;
}

std::vector<double> pca_encode(const PcaModel& model, std::span<const double> x) {
    if (x.size() != model.input_dim())
        throw ShapeError("pca_encode: expected length " + std::to_string(model.input_dim()) + ", got " +
                         std::to_string(x.size()));
    const std::size_t p = model.input_dim(), l = model.code_dim();
    std::vector<double> z(l, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        const double c = x[i] - model.mean[i];
        for (std::size_t j = 0; j < l; ++j) z[j] += model.components.at(i, j) * c;
    }
    return z;
}

std::vector<double> pca_decode(const PcaModel& model, std::span<const double> z) {
    if (z.size() != model.code_dim())
        throw ShapeError("pca_decode: expected length " + std::to_string(model.code_dim()) + ", got " +
                         std::to_string(z.size()));
    std::vector<double> x = model.mean;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < z.size(); ++j) x[i] += model.components.at(i, j) * z[j];
    return x;
}

double reconstruction_error(const VectorMap& encode, const VectorMap& decode, const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("reconstruction_error: n x p matrix required");
    const std::size_t n = x.dim(0), p = x.dim(1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> row(x.values().data() + i * p, p);
        const auto back = decode(encode(row));
        if (back.size() != p) throw ShapeError("reconstruction_error: decoder returned wrong length");
        for (std::size_t j = 0; j < p; ++j) {
            const double d = back[j] - row[j];
            total += d * d;
        }
    }
    return total;
}

double pca_reconstruction_error(const PcaModel& model, const Tensor& x) {
    return reconstruction_error([&](std::span<const double> v) { return pca_encode(model, v); },
                                [&](std::span<const double> z) { return pca_decode(model, z); }, x);
}

void save_pca(const PcaModel& model, std::ostream& os) {
    os << "ratemb-pca 1\n" << "dims " << model.input_dim() << ' ' << model.code_dim() << '\n';
    os << "mean ";
    write_values(os, model.mean);
    os << "components ";
    write_values(os, model.components.values());
    os << "eigenvalues ";
    write_values(os, model.eigenvalues);
    os << "spectrum ";
    write_values(os, model.spectrum);
}

PcaModel load_pca(std::istream& is) {
    TokenReader r(is);
    r.expect("ratemb-pca");
    r.expect("1");
    r.expect("dims");
    const auto p = r.next_size(), l = r.next_size();
    if (p == 0 || l == 0 || l > p) throw ParseError("invalid PCA dimensions", r.line());
    PcaModel m;
    r.expect("mean");
    m.mean = r.next_doubles(p);
    r.expect("components");
    m.components = Tensor({p, l}, r.next_doubles(p * l));
    r.expect("eigenvalues");
    m.eigenvalues = r.next_doubles(l);
    r.expect("spectrum");
    m.spectrum = r.next_doubles(p);
    return m;
}

}  // namespace ratemb::dimred
