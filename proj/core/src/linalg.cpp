#include "ratemb/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ratemb/error.hpp"

namespace ratemb::linalg {

namespace {

double off_norm(const Tensor& a) {
    const std::size_t n = a.dim(0);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) s += a.at(i, j) * a.at(i, j);
    return std::sqrt(s);
}

double frobenius(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return std::sqrt(s);
}

constexpr int kMaxSweeps = 100;

}  // namespace

Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

EigenResult symmetric_eigen(const Tensor& input) {
    if (input.rank() != 2 || input.dim(0) != input.dim(1))
        throw ShapeError("symmetric_eigen: square matrix required, got " + shape_string(input.shape()));
    const std::size_t n = input.dim(0);
    Tensor a = input;
    // Symmetrize so round-off in the caller cannot stall convergence.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (a.at(i, j) + a.at(j, i));
            a.at(i, j) = a.at(j, i) = m;
        }
    Tensor v = identity(n);
    const double scale = std::max(frobenius(a), 1e-300);
    int sweep = 0;
    double off = off_norm(a);
    while (off > 1e-15 * scale && sweep < kMaxSweeps) {
        ++sweep;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                a.at(p, q) = a.at(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        off = off_norm(a);
    }

    // Sign rule: largest-magnitude entry positive (first one on exact ties).
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(v.at(i, j)) > std::abs(v.at(best, j))) best = i;
        if (v.at(best, j) < 0.0)
            for (std::size_t i = 0; i < n; ++i) v.at(i, j) = -v.at(i, j);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (a.at(x, x) != a.at(y, y)) return a.at(x, x) > a.at(y, y);
        for (std::size_t i = 0; i < n; ++i)
            if (v.at(i, x) != v.at(i, y)) return v.at(i, x) > v.at(i, y);
        return false;
    });

    EigenResult r{std::vector<double>(n), Tensor({n, n}), off, sweep};
    for (std::size_t j = 0; j < n; ++j) {
        r.values[j] = a.at(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) r.vectors.at(i, j) = v.at(i, order[j]);
    }
    return r;
}

Tensor spd_inverse(const Tensor& a, double rel_tol) {
    const auto eig = symmetric_eigen(a);
    const std::size_t n = eig.values.size();
    const double largest = eig.values.front();
    const double smallest = eig.values.back();
    if (!(largest > 0.0) || !(smallest > rel_tol * largest))
        throw RankError("matrix is singular or not positive definite (eigenvalue range [" + std::to_string(smallest) +
                        ", " + std::to_string(largest) + "])");
    Tensor inv({n, n});
    for (std::size_t k = 0; k < n; ++k) {
        const double w = 1.0 / eig.values[k];
        for (std::size_t i = 0; i < n; ++i) {
            const double vik = eig.vectors.at(i, k) * w;
            for (std::size_t j = 0; j < n; ++j) inv.at(i, j) += vik * eig.vectors.at(j, k);
        }
    }
    return inv;
}

std::vector<double> column_means(const Tensor& x) {
    if (x.rank() != 2) throw ShapeError("column_means: rank-2 input required, got " + shape_string(x.shape()));
    const std::size_t n = x.dim(0), p = x.dim(1);
    std::vector<double> m(p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) m[j] += x.at(i, j);
    for (auto& v : m) v /= static_cast<double>(n);
    return m;
}

Tensor covariance(const Tensor& x, double divisor) {
    const auto mean = column_means(x);
    const std::size_t n = x.dim(0), p = x.dim(1);
    Tensor c({p, p});
    std::vector<double> row(p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) row[j] = x.at(i, j) - mean[j];
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t k = j; k < p; ++k) c.at(j, k) += row[j] * row[k];
    }
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t k = j; k < p; ++k) {
            c.at(j, k) /= divisor;
            c.at(k, j) = c.at(j, k);
        }
    return c;
}

}  // namespace ratemb::linalg
