#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ratemb/error.hpp"
#include "ratemb/glm.hpp"
#include "ratemb/synth.hpp"
#include "glm_oracles.hpp"
#include "test_support.hpp"

using namespace ratemb;
using namespace ratemb::glm;

namespace {

DesignMatrix random_design(std::size_t n, std::size_t p, SeededRng& rng) {
    Tensor block({n, p});
    for (auto& v : block.values()) v = rng.normal();
    const std::vector<FeatureBlock> blocks = {{"x", block}};
    return assemble_features(blocks);
}

}  // namespace

TEST(Family, CanonicalLinksAndValidation) {
    EXPECT_EQ(GlmFamily(Family::gaussian).link, Link::identity);
    EXPECT_EQ(GlmFamily(Family::poisson).link, Link::log);
    EXPECT_EQ(GlmFamily(Family::gamma).link, Link::log);
    EXPECT_EQ(GlmFamily(Family::binomial).link, Link::logit);
    EXPECT_THROW(GlmFamily(Family::binomial, Link::identity), ArgumentError);
    EXPECT_THROW(GlmFamily(Family::poisson, Link::logit), ArgumentError);
    EXPECT_THROW(parse_family("tweedie"), ArgumentError);
}

TEST(Assemble, WidthsAndNames) {
    const std::vector<FeatureBlock> blocks = {{"a", Tensor({3, 2})}, {"b", Tensor({3, 3})}, {"c", Tensor({3, 4})}};
    const auto d = assemble_features(blocks);
    EXPECT_EQ(d.cols(), 10u);
    EXPECT_EQ(d.names[0], "intercept");
    EXPECT_EQ(d.names[1], "a.1");
    EXPECT_EQ(d.names[9], "c.4");
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(d.x.at(i, 0), 1.0);
}

TEST(Assemble, InterceptOnlyAndErrors) {
    const auto d = assemble_features({}, 4);
    EXPECT_EQ(d.cols(), 1u);
    EXPECT_EQ(d.rows(), 4u);
    const std::vector<FeatureBlock> dup = {{"a", Tensor({3, 1})}, {"a", Tensor({3, 1})}};
    EXPECT_THROW(assemble_features(dup), ArgumentError);
    const std::vector<FeatureBlock> ragged = {{"a", Tensor({3, 1})}, {"b", Tensor({4, 1})}};
    EXPECT_THROW(assemble_features(ragged), ArgumentError);
}

TEST(Assemble, BlockOrderDoesNotChangeDeviance) {
    SeededRng rng(5);
    Tensor a({60, 2}), b({60, 1});
    for (auto& v : a.values()) v = rng.normal();
    for (auto& v : b.values()) v = rng.normal();
    std::vector<double> y(60);
    for (std::size_t i = 0; i < 60; ++i)
        y[i] = static_cast<double>(synth::poisson(std::exp(0.2 + 0.3 * a.at(i, 0) - 0.4 * b.at(i, 0)), rng));
    const std::vector<FeatureBlock> ab = {{"a", a}, {"b", b}}, ba = {{"b", b}, {"a", a}};
    const auto m1 = glm_fit(assemble_features(ab), y, GlmFamily(Family::poisson));
    const auto m2 = glm_fit(assemble_features(ba), y, GlmFamily(Family::poisson));
    EXPECT_NEAR(m1.deviance, m2.deviance, 1e-9 * (1 + m1.deviance));
}

TEST(GlmFit, PoissonInterceptOnlyIsLogMean) {
    const std::vector<double> y = {1, 2, 3};
    const auto m = glm_fit(assemble_features({}, 3), y, GlmFamily(Family::poisson));
    EXPECT_NEAR(m.coefficients[0], std::log(2.0), 1e-6);
}

TEST(GlmFit, GaussianMatchesOlsInOneStep) {
    SeededRng rng(7);
    const auto d = random_design(50, 3, rng);
    std::vector<double> y(50);
    for (auto& v : y) v = rng.normal() * 2 + 1;
    const auto m = glm_fit(d, y, GlmFamily(Family::gaussian));
    const auto oracle = ratemb::testing::ols_oracle(d, y);
    for (std::size_t j = 0; j < oracle.size(); ++j) EXPECT_NEAR(m.coefficients[j], oracle[j], 1e-10);
    EXPECT_LE(m.iterations, 2u);
    double rss = 0.0;
    const auto mu = glm_predict(m, d);
    for (std::size_t i = 0; i < 50; ++i) rss += (y[i] - mu[i]) * (y[i] - mu[i]);
    EXPECT_NEAR(m.deviance, rss, 1e-9 * rss);
    EXPECT_NEAR(deviance(m, d, y), rss, 1e-9 * rss);
}

TEST(GlmFit, FisherStandardErrorsMatchNumericHessian) {
    for (auto fam : {Family::poisson, Family::binomial}) {
        SeededRng rng(fam == Family::poisson ? 11 : 12);
        const auto d = random_design(300, 2, rng);
        std::vector<double> y(300);
        for (std::size_t i = 0; i < 300; ++i) {
            const double eta = 0.3 + 0.5 * d.x.at(i, 1) - 0.4 * d.x.at(i, 2);
            y[i] = fam == Family::poisson ? static_cast<double>(synth::poisson(std::exp(eta), rng))
                                          : (rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0);
        }
        const auto m = glm_fit(d, y, GlmFamily(fam));
        const auto se = m.standard_errors();
        const auto oracle = ratemb::testing::numeric_standard_errors(fam, d, y, m.coefficients);
        for (std::size_t j = 0; j < se.size(); ++j)
            EXPECT_NEAR(se[j], oracle[j], 1e-4 * oracle[j]) << to_string(fam) << " coefficient " << j;
    }
}

TEST(GlmFit, ScoreEquationsHoldAtCanonicalLinks) {
    SeededRng rng(13);
    const auto d = random_design(200, 2, rng);
    std::vector<double> y(200);
    for (std::size_t i = 0; i < 200; ++i) y[i] = static_cast<double>(synth::poisson(std::exp(0.5 + 0.3 * d.x.at(i, 1)), rng));
    const auto m = glm_fit(d, y, GlmFamily(Family::poisson));
    const auto mu = glm_predict(m, d);
    for (std::size_t j = 0; j < d.cols(); ++j) {
        double score = 0.0;
        for (std::size_t i = 0; i < 200; ++i) score += d.x.at(i, j) * (y[i] - mu[i]);
        EXPECT_NEAR(score, 0.0, 1e-6);
    }
}

TEST(GlmFit, RowPermutationLeavesCoefficients) {
    SeededRng rng(17);
    const auto d = random_design(80, 2, rng);
    std::vector<double> y(80);
    for (std::size_t i = 0; i < 80; ++i) y[i] = std::exp(0.1 * d.x.at(i, 1)) * (0.5 + rng.uniform());
    const auto m = glm_fit(d, y, GlmFamily(Family::gamma));
    const auto perm = rng.permutation(80);
    DesignMatrix dp{Tensor({80, 3}), d.names};
    std::vector<double> yp(80);
    for (std::size_t i = 0; i < 80; ++i) {
        for (std::size_t j = 0; j < 3; ++j) dp.x.at(i, j) = d.x.at(perm[i], j);
        yp[i] = y[perm[i]];
    }
    const auto mp = glm_fit(dp, yp, GlmFamily(Family::gamma));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m.coefficients[j], mp.coefficients[j], 1e-10);
}

TEST(GlmFit, OffsetShiftsThePrediction) {
    const std::vector<double> y = {2, 4, 6, 8};
    const std::vector<double> exposure = {1, 2, 3, 4};
    std::vector<double> offset;
    for (double e : exposure) offset.push_back(std::log(e));
    const auto m = glm_fit(assemble_features({}, 4), y, GlmFamily(Family::poisson), offset);
    EXPECT_NEAR(m.coefficients[0], std::log(2.0), 1e-8);
    const auto mu = glm_predict(m, assemble_features({}, 4), offset);
    EXPECT_NEAR(mu[3], 8.0, 1e-7);
}

TEST(GlmFit, SaturatedFitHasZeroDeviance) {
    Tensor g({4, 1});
    g.at(1, 0) = g.at(3, 0) = 1.0;
    const std::vector<FeatureBlock> blocks = {{"g", g}};
    const std::vector<double> y = {2, 5, 2, 5};
    const auto m = glm_fit(assemble_features(blocks), y, GlmFamily(Family::poisson));
    EXPECT_NEAR(m.deviance, 0.0, 1e-8);
}

TEST(GlmFit, AllZeroBinomialIsReported) {
    Tensor x({20, 1});
    for (std::size_t i = 0; i < 20; ++i) x.at(i, 0) = static_cast<double>(i) / 10.0;
    const std::vector<FeatureBlock> blocks = {{"x", x}};
    const std::vector<double> y(20, 0.0);
    try {
        glm_fit(assemble_features(blocks), y, GlmFamily(Family::binomial));
        FAIL() << "expected a convergence error";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.last_coefficients().size(), 2u);
    }
}

TEST(GlmFit, ErrorsOnBadInput) {
    SeededRng rng(19);
    const auto d = random_design(10, 2, rng);
    EXPECT_THROW(glm_fit(d, std::vector<double>(10, -1.0), GlmFamily(Family::poisson)), ArgumentError);
    EXPECT_THROW(glm_fit(d, std::vector<double>(10, 0.0), GlmFamily(Family::gamma)), ArgumentError);
    EXPECT_THROW(glm_fit(d, std::vector<double>(9, 1.0), GlmFamily(Family::gaussian)), ArgumentError);
    Tensor dup({10, 2});
    for (std::size_t i = 0; i < 10; ++i) dup.at(i, 0) = dup.at(i, 1) = rng.normal();
    const std::vector<FeatureBlock> blocks = {{"d", dup}};
    std::vector<double> y(10);
    for (auto& v : y) v = rng.normal();
    EXPECT_THROW(glm_fit(assemble_features(blocks), y, GlmFamily(Family::gaussian)), RankError);
}

TEST(GlmPredict, LinksAndRanges) {
    GlmModel m;
    m.family = GlmFamily(Family::poisson);
    m.coefficients = {std::log(2.0), 0.0};
    SeededRng rng(23);
    const auto d = random_design(5, 1, rng);
    for (double mu : glm_predict(m, d)) EXPECT_NEAR(mu, 2.0, 1e-15);
    m.family = GlmFamily(Family::binomial);
    m.coefficients = {0.0, 50.0};
    for (double mu : glm_predict(m, d)) {
        EXPECT_GE(mu, 0.0);
        EXPECT_LE(mu, 1.0);
    }
    m.coefficients = {1.0};
    EXPECT_THROW(glm_predict(m, d), ShapeError);
}

TEST(GlmIo, SaveLoadRoundTripAndReport) {
    SeededRng rng(29);
    const auto d = random_design(40, 2, rng);
    std::vector<double> y(40);
    for (auto& v : y) v = rng.normal();
    const auto m = glm_fit(d, y, GlmFamily(Family::gaussian));
    std::ostringstream out;
    save_glm(m, out);
    std::istringstream in(out.str());
    const auto back = load_glm(in);
    EXPECT_EQ(back.coefficients, m.coefficients);
    EXPECT_EQ(back.covariance, m.covariance);
    EXPECT_EQ(back.names, m.names);
    EXPECT_EQ(back.family, m.family);
    const auto report = coefficient_report(m);
    EXPECT_NE(report.find("x.2"), std::string::npos);
    EXPECT_NE(report.find("std.error"), std::string::npos);
}
