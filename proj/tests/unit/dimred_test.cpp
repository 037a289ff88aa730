#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ratemb/dimred.hpp"
#include "ratemb/error.hpp"
#include "ratemb/linalg.hpp"
#include "test_support.hpp"

using namespace ratemb;
using namespace ratemb::dimred;
using ratemb::testing::random_tensor;

namespace {

Tensor correlated_data(std::size_t n, std::size_t p, SeededRng& rng) {
    // Mixed scales so the spectrum is well separated.
    Tensor x({n, p});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) x.at(i, j) = rng.normal() * (1.0 + static_cast<double>(p - j)) + 0.3 * j;
    return x;
}

// Brute-force reconstruction: project each row on the columns of `basis` by
// explicit loops, then sum squared residuals.
double frame_error(const Tensor& x, const std::vector<double>& mean, const Tensor& basis) {
    const std::size_t n = x.dim(0), p = x.dim(1), l = basis.dim(1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> c(p), rec(mean);
        for (std::size_t j = 0; j < p; ++j) c[j] = x.at(i, j) - mean[j];
        for (std::size_t k = 0; k < l; ++k) {
            double z = 0.0;
            for (std::size_t j = 0; j < p; ++j) z += basis.at(j, k) * c[j];
            for (std::size_t j = 0; j < p; ++j) rec[j] += basis.at(j, k) * z;
        }
        for (std::size_t j = 0; j < p; ++j) total += (rec[j] - x.at(i, j)) * (rec[j] - x.at(i, j));
    }
    return total;
}

Tensor random_orthonormal_frame(std::size_t p, std::size_t l, SeededRng& rng) {
    Tensor q({p, l});
    for (std::size_t k = 0; k < l; ++k) {
        std::vector<double> v(p);
        for (auto& e : v) e = rng.normal();
        for (std::size_t m = 0; m < k; ++m) {
            double d = 0.0;
            for (std::size_t j = 0; j < p; ++j) d += v[j] * q.at(j, m);
            for (std::size_t j = 0; j < p; ++j) v[j] -= d * q.at(j, m);
        }
        double nrm = 0.0;
        for (double e : v) nrm += e * e;
        nrm = std::sqrt(nrm);
        for (std::size_t j = 0; j < p; ++j) q.at(j, k) = v[j] / nrm;
    }
    return q;
}

double orthonormality_error(const Tensor& c) {
    const auto g = matmul(transpose(c), c);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.dim(0); ++i)
        for (std::size_t j = 0; j < g.dim(1); ++j) worst = std::max(worst, std::abs(g.at(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

}  // namespace

TEST(Standardize, PopulationConvention) {
    const auto s = standardize(Tensor::matrix({{0}, {10}}));
    EXPECT_DOUBLE_EQ(s.data.at(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(s.data.at(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(s.stddev[0], 5.0);
}

TEST(Standardize, ConstantColumnMapsToZeroWithUnitStddev) {
    const auto s = standardize(Tensor::matrix({{3, 1}, {3, 2}, {3, 4}}));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(s.data.at(i, 0), 0.0);
    EXPECT_EQ(s.stddev[0], 1.0);
}

TEST(Standardize, FixedPointOnStandardizedData) {
    SeededRng rng(2);
    const auto once = standardize(random_tensor({20, 3}, rng));
    const auto twice = standardize(once.data);
    EXPECT_LE(ratemb::testing::max_abs_diff(once.data, twice.data), 1e-12);
}

TEST(Standardize, NeedsTwoRows) { EXPECT_THROW(standardize(Tensor::matrix({{1, 2}})), ArgumentError); }

TEST(Pca, PointsOnDiagonalLine) {
    Tensor x({5, 2});
    for (std::size_t i = 0; i < 5; ++i) x.at(i, 0) = x.at(i, 1) = static_cast<double>(i) - 2.0 + 7.0;
    const auto m = pca_fit(x, 1);
    EXPECT_NEAR(m.components.at(0, 0), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(m.components.at(1, 0), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(m.spectrum[1], 0.0, 1e-12);

    const std::vector<double> probe{m.mean[0] + 1.0, m.mean[1] + 1.0};
    const auto z = pca_encode(m, probe);
    ASSERT_EQ(z.size(), 1u);
    EXPECT_NEAR(z[0], std::sqrt(2.0), 1e-12);
    const auto back = pca_decode(m, z);
    EXPECT_NEAR(back[0], probe[0], 1e-10);
    EXPECT_NEAR(back[1], probe[1], 1e-10);
}

TEST(Pca, MeanEncodesToZeroAndZeroDecodesToMean) {
    SeededRng rng(3);
    const auto m = pca_fit(correlated_data(30, 4, rng), 2);
    for (double v : pca_encode(m, m.mean)) EXPECT_NEAR(v, 0.0, 1e-12);
    EXPECT_EQ(pca_decode(m, std::vector<double>{0.0, 0.0}), m.mean);
}

TEST(Pca, FullBasisReconstructsExactly) {
    SeededRng rng(4);
    const auto x = correlated_data(40, 5, rng);
    EXPECT_LE(pca_reconstruction_error(pca_fit(x, 5), x), 1e-10);
}

TEST(Pca, TraceIdentity) {
    SeededRng rng(5);
    const auto x = correlated_data(50, 6, rng);
    const auto m = pca_fit(x, 6);
    const auto cov = linalg::covariance(x, 50.0);
    double trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < 6; ++i) trace += cov.at(i, i);
    for (double e : m.eigenvalues) sum += e;
    EXPECT_NEAR(sum, trace, 1e-8);
}

TEST(Pca, ResidualEqualsDiscardedSpectrum) {
    SeededRng rng(6);
    const std::size_t n = 60;
    const auto x = correlated_data(n, 7, rng);
    for (std::size_t l = 1; l <= 7; ++l) {
        const auto m = pca_fit(x, l);
        double discarded = 0.0;
        for (std::size_t k = l; k < 7; ++k) discarded += m.spectrum[k];
        const double brute = frame_error(x, m.mean, m.components);
        EXPECT_NEAR(pca_reconstruction_error(m, x), brute, 1e-9 * (1.0 + brute));
        if (l < 7) EXPECT_NEAR(brute, static_cast<double>(n) * discarded, 1e-6 * brute);
    }
}

TEST(Pca, OrthonormalComponentsAndSortedEigenvalues) {
    SeededRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t p = 2 + rng.below(8);
        const std::size_t l = 1 + rng.below(p);
        const auto m = pca_fit(random_tensor({10 + rng.below(30), p}, rng), l);
        EXPECT_LE(orthonormality_error(m.components), 1e-8);
        for (std::size_t k = 1; k < m.eigenvalues.size(); ++k) EXPECT_LE(m.eigenvalues[k], m.eigenvalues[k - 1]);
        for (double e : m.spectrum) EXPECT_GE(e, -1e-10);
        // Sign rule: largest-magnitude entry of each component is positive.
        for (std::size_t k = 0; k < l; ++k) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < p; ++j)
                if (std::abs(m.components.at(j, k)) > std::abs(m.components.at(best, k))) best = j;
            EXPECT_GT(m.components.at(best, k), 0.0);
        }
    }
}

TEST(Pca, NoRandomFrameBeatsPca) {
    SeededRng rng(8);
    Tensor x({50, 8});
    for (auto& v : x.values()) v = rng.normal();
    for (std::size_t i = 0; i < 50; ++i) x.at(i, 1) += 2.0 * x.at(i, 0);
    for (std::size_t l = 1; l < 8; ++l) {
        const auto m = pca_fit(x, l);
        const double best = frame_error(x, m.mean, m.components);
        for (int trial = 0; trial < 100; ++trial)
            EXPECT_GE(frame_error(x, m.mean, random_orthonormal_frame(8, l, rng)), best - 1e-9);
    }
}

TEST(Pca, RejectsBadCodeDimension) {
    SeededRng rng(9);
    const auto x = random_tensor({10, 3}, rng);
    EXPECT_THROW(pca_fit(x, 0), ArgumentError);
    EXPECT_THROW(pca_fit(x, 4), ArgumentError);
    const auto m = pca_fit(x, 2);
    EXPECT_THROW(pca_encode(m, std::vector<double>{1.0}), ShapeError);
    EXPECT_THROW(pca_decode(m, std::vector<double>{1.0}), ShapeError);
}

TEST(ReconstructionError, IdentityMapsGiveZero) {
    SeededRng rng(10);
    const auto x = random_tensor({8, 3}, rng);
    auto id = [](std::span<const double> v) { return std::vector<double>(v.begin(), v.end()); };
    EXPECT_EQ(reconstruction_error(id, id, x), 0.0);
}

TEST(Jacobi, OffDiagonalConverges) {
    SeededRng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t p = 2 + rng.below(12);
        const auto a = random_tensor({p, p}, rng);
        const auto sym = matmul(transpose(a), a);
        const auto e = linalg::symmetric_eigen(sym);
        EXPECT_LT(e.off_diagonal, 1e-12);
        // A v = lambda v
        const auto av = matmul(sym, e.vectors);
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t i = 0; i < p; ++i) EXPECT_NEAR(av.at(i, j), e.values[j] * e.vectors.at(i, j), 1e-9);
    }
}

TEST(Jacobi, SingularMatrixRaisesRankError) {
    EXPECT_THROW(linalg::spd_inverse(Tensor::matrix({{1, 1}, {1, 1}})), RankError);
}

TEST(PcaPersistence, RoundTripIsExact) {
    SeededRng rng(12);
    const auto m = pca_fit(correlated_data(20, 4, rng), 2);
    std::stringstream ss;
    save_pca(m, ss);
    const auto back = load_pca(ss);
    EXPECT_EQ(back.mean, m.mean);
    EXPECT_EQ(back.components, m.components);
    EXPECT_EQ(back.eigenvalues, m.eigenvalues);
    EXPECT_EQ(back.spectrum, m.spectrum);
}
