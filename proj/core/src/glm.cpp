#include "ratemb/glm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "ratemb/error.hpp"
#include "ratemb/linalg.hpp"
#include "ratemb/textio.hpp"

namespace ratemb::glm {

std::string_view to_string(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::poisson: return "poisson";
        case Family::gamma: return "gamma";
        case Family::binomial: return "binomial";
    }
    return "gaussian";
}

std::string_view to_string(Link l) {
    switch (l) {
        case Link::identity: return "identity";
        case Link::log: return "log";
        case Link::logit: return "logit";
    }
    return "identity";
}

Family parse_family(std::string_view name) {
    if (name == "gaussian" || name == "normal") return Family::gaussian;
    if (name == "poisson") return Family::poisson;
    if (name == "gamma") return Family::gamma;
    if (name == "binomial" || name == "bernoulli") return Family::binomial;
    throw ArgumentError("unknown family '" + std::string(name) + "'");
}

Link parse_link(std::string_view name) {
    if (name == "identity") return Link::identity;
    if (name == "log") return Link::log;
    if (name == "logit") return Link::logit;
    throw ArgumentError("unknown link '" + std::string(name) + "'");
}

namespace {

Link canonical(Family f) {
    switch (f) {
        case Family::gaussian: return Link::identity;
        case Family::poisson: return Link::log;
        case Family::gamma: return Link::log;
        case Family::binomial: return Link::logit;
    }
    return Link::identity;
}

bool allowed(Family f, Link l) {
    if (f == Family::binomial) return l == Link::logit;
    return l == Link::identity || l == Link::log;
}

}  // namespace

GlmFamily::GlmFamily(Family f) : GlmFamily(f, canonical(f)) {}

GlmFamily::GlmFamily(Family f, Link l) : family(f), link(l) {
    if (!allowed(f, l))
        throw ArgumentError("link " + std::string(to_string(l)) + " is not available for the " +
                            std::string(to_string(f)) + " family");
}

double GlmFamily::link_fn(double mu) const {
    switch (link) {
        case Link::identity: return mu;
        case Link::log: return std::log(mu);
        case Link::logit: return std::log(mu / (1.0 - mu));
    }
    return mu;
}

double GlmFamily::inverse_link(double eta) const {
    switch (link) {
        case Link::identity: return eta;
        case Link::log: return std::exp(eta);
        case Link::logit: return 1.0 / (1.0 + std::exp(-eta));
    }
    return eta;
}

double GlmFamily::link_slope(double mu) const {
    switch (link) {
        case Link::identity: return 1.0;
        case Link::log: return 1.0 / mu;
        case Link::logit: return 1.0 / (mu * (1.0 - mu));
    }
    return 1.0;
}

double GlmFamily::variance(double mu) const {
    switch (family) {
        case Family::gaussian: return 1.0;
        case Family::poisson: return mu;
        case Family::gamma: return mu * mu;
        case Family::binomial: return mu * (1.0 - mu);
    }
    return 1.0;
}

namespace {

double ylogy(double y, double mu) { return y > 0.0 ? y * std::log(y / mu) : 0.0; }

}  // namespace

double GlmFamily::unit_deviance(double y, double mu) const {
    switch (family) {
        case Family::gaussian: return (y - mu) * (y - mu);
        case Family::poisson: return 2.0 * (ylogy(y, mu) - (y - mu));
        case Family::gamma: return 2.0 * (-std::log(y / mu) + (y - mu) / mu);
        case Family::binomial: return 2.0 * (ylogy(y, mu) + ylogy(1.0 - y, 1.0 - mu));
    }
    return 0.0;
}

void GlmFamily::check_response(std::span<const double> y) const {
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = y[i];
        bool ok = std::isfinite(v);
        const char* need = "a finite value";
        if (family == Family::poisson) {
            ok = ok && v >= 0.0;
            need = "a non-negative count";
        } else if (family == Family::gamma) {
            ok = ok && v > 0.0;
            need = "a positive value";
        } else if (family == Family::binomial) {
            ok = ok && (v == 0.0 || v == 1.0);
            need = "0 or 1";
        }
        if (!ok)
            throw ArgumentError("response row " + std::to_string(i) + " is " + format_double(v) + "; the " +
                                std::string(to_string(family)) + " family needs " + need);
    }
}

DesignMatrix assemble_features(std::span<const FeatureBlock> blocks, std::size_t n_rows) {
    std::set<std::string> seen;
    std::size_t n = n_rows, width = 1;
    bool have_n = n_rows > 0;
    for (const auto& b : blocks) {
        if (!seen.insert(b.name).second) throw ArgumentError("duplicate feature block '" + b.name + "'");
        if (b.rows.rank() != 2) throw ShapeError("feature block '" + b.name + "' must be a matrix");
        if (!have_n) {
            n = b.rows.dim(0);
            have_n = true;
        } else if (b.rows.dim(0) != n) {
            throw ArgumentError("feature block '" + b.name + "' has " + std::to_string(b.rows.dim(0)) +
                                " rows, expected " + std::to_string(n));
        }
        width += b.rows.dim(1);
    }
    if (n == 0) throw ArgumentError("design matrix needs at least one row");
    DesignMatrix d{Tensor({n, width}), {"intercept"}};
    for (std::size_t i = 0; i < n; ++i) d.x.at(i, 0) = 1.0;
    std::size_t col = 1;
    for (const auto& b : blocks) {
        const std::size_t w = b.rows.dim(1);
        for (std::size_t j = 0; j < w; ++j) {
            d.names.push_back(b.name + "." + std::to_string(j + 1));
            for (std::size_t i = 0; i < n; ++i) d.x.at(i, col + j) = b.rows.at(i, j);
        }
        col += w;
    }
    return d;
}

std::vector<double> GlmModel::standard_errors() const {
    std::vector<double> se(coefficients.size());
    for (std::size_t i = 0; i < se.size(); ++i) se[i] = std::sqrt(std::max(0.0, covariance.at(i, i)));
    return se;
}

namespace {

void check_offset(std::span<const double> offset, std::size_t n) {
    if (!offset.empty() && offset.size() != n)
        throw ArgumentError("offset has " + std::to_string(offset.size()) + " entries for " + std::to_string(n) +
                            " rows");
}

double offset_at(std::span<const double> offset, std::size_t i) { return offset.empty() ? 0.0 : offset[i]; }

// |eta| beyond this means the mean has run off to the edge of its range.
constexpr double kEtaLimit = 30.0;
// Means within about 1e-8 of a boundary at convergence.
constexpr double kSeparationEta = 18.0;

bool mean_in_range(const GlmFamily& f, double mu, double eta) {
    if (!std::isfinite(mu) || !std::isfinite(eta)) return false;
    switch (f.family) {
        case Family::gaussian: return f.link != Link::log || std::abs(eta) <= kEtaLimit;
        case Family::poisson:
        case Family::gamma: return mu > 0.0 && (f.link != Link::log || std::abs(eta) <= kEtaLimit);
        case Family::binomial: return std::abs(eta) <= kEtaLimit;
    }
    return true;
}

struct WeightedSystem {
    Tensor xtwx;
    std::vector<double> xtwz;
};

WeightedSystem weighted_system(const Tensor& x, std::span<const double> w, std::span<const double> z) {
    const std::size_t n = x.dim(0), p = x.dim(1);
    WeightedSystem s{Tensor({p, p}), std::vector<double>(p, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &x.values()[i * p];
        for (std::size_t a = 0; a < p; ++a) {
            const double wa = w[i] * row[a];
            s.xtwz[a] += wa * z[i];
            for (std::size_t b = a; b < p; ++b) s.xtwx.at(a, b) += wa * row[b];
        }
    }
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < a; ++b) s.xtwx.at(a, b) = s.xtwx.at(b, a);
    return s;
}

std::vector<double> eta_of(const Tensor& x, std::span<const double> beta, std::span<const double> offset) {
    const std::size_t n = x.dim(0), p = x.dim(1);
    std::vector<double> eta(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = offset_at(offset, i);
        for (std::size_t j = 0; j < p; ++j) s += x.values()[i * p + j] * beta[j];
        eta[i] = s;
    }
    return eta;
}

double total_deviance(const GlmFamily& f, std::span<const double> y, std::span<const double> mu) {
    double d = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) d += f.unit_deviance(y[i], mu[i]);
    return d;
}

}  // namespace

GlmModel glm_fit(const DesignMatrix& x, std::span<const double> y, const GlmFamily& family,
                 std::span<const double> offset, const GlmOptions& opts) {
    const std::size_t n = x.rows(), p = x.cols();
    if (y.size() != n)
        throw ArgumentError("response has " + std::to_string(y.size()) + " rows, design has " + std::to_string(n));
    if (n <= p)
        throw ArgumentError("need more rows than columns (" + std::to_string(n) + " rows, " + std::to_string(p) +
                            " columns)");
    if (opts.max_iterations == 0 || !(opts.tolerance > 0.0)) throw ArgumentError("invalid IRLS options");
    check_offset(offset, n);
    family.check_response(y);

    std::vector<double> mu(n), eta(n), w(n), z(n);
    for (std::size_t i = 0; i < n; ++i) {
        double m = y[i];
        if (family.family == Family::poisson) m = y[i] + 0.5;
        if (family.family == Family::binomial) m = std::clamp(y[i], 0.01, 0.99);
        if (family.link == Link::log && family.family == Family::gaussian && m <= 0.0) m = 0.5;
        mu[i] = m;
        eta[i] = family.link_fn(m);
    }
    double dev = total_deviance(family, y, mu);
    std::vector<double> beta(p, 0.0);
    GlmModel model;
    model.family = family;
    model.names = x.names;

    bool converged = false;
    std::size_t iter = 0;
    while (iter < opts.max_iterations) {
        ++iter;
        for (std::size_t i = 0; i < n; ++i) {
            const double slope = family.link_slope(mu[i]);
            z[i] = eta[i] - offset_at(offset, i) + (y[i] - mu[i]) * slope;
            w[i] = 1.0 / (family.variance(mu[i]) * slope * slope);
        }
        const auto sys = weighted_system(x.x, w, z);
        const Tensor inv = linalg::spd_inverse(sys.xtwx);
        for (std::size_t a = 0; a < p; ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < p; ++b) s += inv.at(a, b) * sys.xtwz[b];
            beta[a] = s;
        }
        eta = eta_of(x.x, beta, offset);
        for (std::size_t i = 0; i < n; ++i) {
            mu[i] = family.inverse_link(eta[i]);
            if (!mean_in_range(family, mu[i], eta[i]))
                throw ConvergenceError("IRLS left the " + std::string(to_string(family.family)) +
                                           " mean range at row " + std::to_string(i) + " in iteration " +
                                           std::to_string(iter) + " (linear predictor " + format_double(eta[i]) +
                                           ")",
                                       beta);
        }
        const double new_dev = total_deviance(family, y, mu);
        const double change = std::abs(new_dev - dev) / (std::abs(new_dev) + 0.1);
        dev = new_dev;
        if (change < opts.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("IRLS did not converge in " + std::to_string(opts.max_iterations) + " iterations",
                               beta);
    // Separation: the deviance settles while a coefficient heads to infinity.
    if (family.family == Family::binomial || family.family == Family::poisson)
        for (std::size_t i = 0; i < n; ++i)
            if (eta[i] - offset_at(offset, i) < -kSeparationEta ||
                (family.family == Family::binomial && eta[i] > kSeparationEta))
                throw ConvergenceError("fitted mean at row " + std::to_string(i) +
                                           " is numerically on the boundary (linear predictor " +
                                           format_double(eta[i]) + "); the data are separated",
                                       beta);

    for (std::size_t i = 0; i < n; ++i) {
        const double slope = family.link_slope(mu[i]);
        w[i] = 1.0 / (family.variance(mu[i]) * slope * slope);
    }
    Tensor cov = linalg::spd_inverse(weighted_system(x.x, w, z).xtwx);
    double phi = 1.0;
    if (family.has_dispersion()) {
        double pearson = 0.0;
        for (std::size_t i = 0; i < n; ++i) pearson += (y[i] - mu[i]) * (y[i] - mu[i]) / family.variance(mu[i]);
        phi = pearson / static_cast<double>(n - p);
        for (auto& v : cov.values()) v *= phi;
    }
    model.coefficients = beta;
    model.covariance = std::move(cov);
    model.dispersion = phi;
    model.deviance = dev;
    model.iterations = iter;
    return model;
}

std::vector<double> linear_predictor(const GlmModel& model, const DesignMatrix& x, std::span<const double> offset) {
    if (x.x.rank() != 2 || x.cols() != model.coefficients.size())
        throw ShapeError("design has " + std::to_string(x.x.rank() == 2 ? x.cols() : 0) + " columns, model has " +
                         std::to_string(model.coefficients.size()) + " coefficients");
    check_offset(offset, x.rows());
    return eta_of(x.x, model.coefficients, offset);
}

std::vector<double> glm_predict(const GlmModel& model, const DesignMatrix& x, std::span<const double> offset) {
    auto mu = linear_predictor(model, x, offset);
    for (auto& v : mu) v = model.family.inverse_link(v);
    return mu;
}

double deviance(const GlmModel& model, const DesignMatrix& x, std::span<const double> y,
                std::span<const double> offset) {
    if (y.size() != x.rows())
        throw ArgumentError("response has " + std::to_string(y.size()) + " rows, design has " +
                            std::to_string(x.rows()));
    model.family.check_response(y);
    const auto mu = glm_predict(model, x, offset);
    return total_deviance(model.family, y, mu);
}

void save_glm(const GlmModel& model, std::ostream& os) {
    const std::size_t p = model.coefficients.size();
    os << "ratemb-glm 1\n"
       << "family " << to_string(model.family.family) << ' ' << to_string(model.family.link) << '\n'
       << "columns " << p << '\n';
    for (const auto& name : model.names) os << name << '\n';
    os << "coefficients ";
    write_values(os, model.coefficients);
    os << "covariance ";
    write_values(os, model.covariance.values());
    os << "dispersion " << format_double(model.dispersion) << '\n'
       << "deviance " << format_double(model.deviance) << '\n'
       << "iterations " << model.iterations << '\n';
}

GlmModel load_glm(std::istream& is) {
    TokenReader r(is);
    r.expect("ratemb-glm");
    r.expect("1");
    r.expect("family");
    GlmModel m;
    const auto fam = parse_family(r.next());
    m.family = GlmFamily(fam, parse_link(r.next()));
    r.expect("columns");
    const auto p = r.next_size();
    if (p == 0) throw ParseError("model needs at least one column", r.line());
    for (std::size_t i = 0; i < p; ++i) m.names.push_back(r.next());
    r.expect("coefficients");
    m.coefficients = r.next_doubles(p);
    r.expect("covariance");
    m.covariance = Tensor({p, p}, r.next_doubles(p * p));
    r.expect("dispersion");
    m.dispersion = r.next_double();
    r.expect("deviance");
    m.deviance = r.next_double();
    r.expect("iterations");
    m.iterations = r.next_size();
    return m;
}

std::string coefficient_report(const GlmModel& model) {
    std::ostringstream os;
    std::size_t width = 4;
    for (const auto& n : model.names) width = std::max(width, n.size());
    const auto se = model.standard_errors();
    char buf[128];
    os << "family " << to_string(model.family.family) << ", link " << to_string(model.family.link) << ", deviance "
       << format_double(model.deviance) << ", iterations " << model.iterations << '\n';
    os << std::string(width - 4, ' ') << "name     estimate   std.error\n";
    for (std::size_t i = 0; i < model.coefficients.size(); ++i) {
        std::snprintf(buf, sizeof buf, " %12.6g %11.5g", model.coefficients[i], se[i]);
        const std::string name = i < model.names.size() ? model.names[i] : "x" + std::to_string(i);
        os << std::string(width - name.size(), ' ') << name << buf << '\n';
    }
    return os.str();
}

}  // namespace ratemb::glm
