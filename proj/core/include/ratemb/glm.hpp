#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ratemb/tensor.hpp"

namespace ratemb::glm {

enum class Family { gaussian, poisson, gamma, binomial };
enum class Link { identity, log, logit };

std::string_view to_string(Family f);
std::string_view to_string(Link l);
Family parse_family(std::string_view name);
Link parse_link(std::string_view name);

/// Family plus link. Canonical defaults: gaussian/identity, poisson/log,
/// gamma/log, binomial/logit. Allowed pairs: gaussian with identity or log,
/// poisson and gamma with log or identity, binomial with logit.
struct GlmFamily {
    Family family = Family::gaussian;
    Link link = Link::identity;

    GlmFamily() = default;
    explicit GlmFamily(Family f);
    GlmFamily(Family f, Link l);

    double link_fn(double mu) const;
    double inverse_link(double eta) const;
    /// d eta / d mu.
    double link_slope(double mu) const;
    double variance(double mu) const;
    /// Per-row deviance contribution, with 0 log 0 taken as 0.
    double unit_deviance(double y, double mu) const;
    /// Throws ArgumentError naming the row when y is outside the family support.
    void check_response(std::span<const double> y) const;
    bool has_dispersion() const { return family == Family::gaussian || family == Family::gamma; }

    friend bool operator==(const GlmFamily&, const GlmFamily&) = default;
};

/// n x (1 + p) with a leading column of ones.
struct DesignMatrix {
    Tensor x;
    std::vector<std::string> names;

    std::size_t rows() const { return x.dim(0); }
    std::size_t cols() const { return x.dim(1); }
};

struct FeatureBlock {
    std::string name;
    /// n x width; width may be 0.
    Tensor rows;
};

/// Intercept column "intercept", then each block's columns named
/// "<block>.<index>" counting from 1. With no blocks the design is
/// intercept-only with n_rows rows. Throws ArgumentError on row-count
/// mismatch or duplicate block names.
DesignMatrix assemble_features(std::span<const FeatureBlock> blocks, std::size_t n_rows = 0);

struct GlmOptions {
    std::size_t max_iterations = 25;
    double tolerance = 1e-8;
};

struct GlmModel {
    GlmFamily family;
    std::vector<std::string> names;
    std::vector<double> coefficients;
    /// Inverse Fisher information at the estimate, times the dispersion.
    Tensor covariance;
    double dispersion = 1.0;
    double deviance = 0.0;
    std::size_t iterations = 0;

    std::vector<double> standard_errors() const;
};

/// Iteratively reweighted least squares. Converged when
/// |dev - dev_prev| / (|dev| + 0.1) < tolerance. Raises ConvergenceError
/// carrying the last coefficients when the iteration limit is reached or the
/// fit runs to the edge of the mean space, RankError on singular weighted
/// normal equations.
GlmModel glm_fit(const DesignMatrix& x, std::span<const double> y, const GlmFamily& family,
                 std::span<const double> offset = {}, const GlmOptions& opts = {});

std::vector<double> linear_predictor(const GlmModel& model, const DesignMatrix& x, std::span<const double> offset = {});
/// g^{-1}(x beta + offset).
std::vector<double> glm_predict(const GlmModel& model, const DesignMatrix& x, std::span<const double> offset = {});
double deviance(const GlmModel& model, const DesignMatrix& x, std::span<const double> y,
                std::span<const double> offset = {});

void save_glm(const GlmModel& model, std::ostream& os);
GlmModel load_glm(std::istream& is);

/// One row per coefficient: name, estimate, standard error.
std::string coefficient_report(const GlmModel& model);

}  // namespace ratemb::glm
