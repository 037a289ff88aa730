#include "ratemb/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ratemb/error.hpp"
#include "ratemb/rng.hpp"
#include "ratemb/textio.hpp"

namespace ratemb::evaluate {

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw ShapeError("cosine of vectors of length " + std::to_string(u.size()) + " and " +
                         std::to_string(v.size()));
    const double nu = norm2(u), nv = norm2(v);
    if (nu == 0.0 || nv == 0.0) throw DomainError("cosine of a zero vector");
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

IntrinsicReport nearest_neighbors(const EmbeddingTable& table, const std::string& query, std::size_t k) {
    const auto qi = table.find(query);
    if (!qi) throw ArgumentError("unknown query id '" + query + "'");
    if (k >= table.size())
        throw ArgumentError("k = " + std::to_string(k) + " needs a table with more than " + std::to_string(k) +
                            " rows, got " + std::to_string(table.size()));
    const auto q = table.row(*qi);
    if (norm2(q) == 0.0) throw DomainError("embedding of '" + query + "' is the zero vector");
    std::vector<Neighbor> all;
    all.reserve(table.size() - 1);
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (i == *qi) continue;
        const auto r = table.row(i);
        if (norm2(r) == 0.0) throw DomainError("embedding of '" + table.id(i) + "' is the zero vector");
        all.push_back({table.id(i), cosine(q, r)});
    }
    const auto better = [](const Neighbor& a, const Neighbor& b) {
        if (a.cosine != b.cosine) return a.cosine > b.cosine;
        return id_less(a.id, b.id);
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), better);
    all.resize(k);
    return {query, std::move(all)};
}

namespace {

glm::DesignMatrix take_rows(const glm::DesignMatrix& d, const std::vector<std::size_t>& rows) {
    const std::size_t c = d.cols();
    glm::DesignMatrix out{Tensor({rows.size(), c}), d.names};
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) out.x.at(i, j) = d.x.at(rows[i], j);
    return out;
}

std::vector<double> take(std::span<const double> v, const std::vector<std::size_t>& rows) {
    std::vector<double> out;
    if (v.empty()) return out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(v[r]);
    return out;
}

glm::GlmModel labeled_fit(const char* label, const glm::DesignMatrix& x, std::span<const double> y,
                          const glm::GlmFamily& family, std::span<const double> offset) {
    const std::string prefix = std::string(label) + " model: ";
    try {
        return glm::glm_fit(x, y, family, offset);
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(prefix + e.what(), e.last_coefficients());
    } catch (const RankError& e) {
        throw RankError(prefix + e.what());
    } catch (const ArgumentError& e) {
        throw ArgumentError(prefix + e.what());
    }
}

}  // namespace

ExtrinsicReport extrinsic_compare(std::span<const glm::FeatureBlock> baseline,
                                  std::span<const glm::FeatureBlock> augmented, std::span<const double> y,
                                  const glm::GlmFamily& family, const SplitOptions& split,
                                  std::span<const double> offset) {
    const std::size_t n = y.size();
    const auto base = glm::assemble_features(baseline, n);
    const auto aug = glm::assemble_features(augmented, n);
    if (base.rows() != n || aug.rows() != n)
        throw ArgumentError("feature rows (" + std::to_string(base.rows()) + ", " + std::to_string(aug.rows()) +
                            ") do not match " + std::to_string(n) + " responses");
    if (!offset.empty() && offset.size() != n) throw ArgumentError("offset length does not match responses");

    SeededRng rng(split.seed);
    const auto order = rng.permutation(n);
    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> parts;
    if (split.folds <= 1) {
        if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
            throw ArgumentError("train fraction must lie in (0, 1), got " + format_double(split.train_fraction));
        const auto n_train = static_cast<std::size_t>(std::llround(split.train_fraction * static_cast<double>(n)));
        if (n_train == 0 || n_train == n) throw ArgumentError("split leaves an empty train or test part");
        std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        parts.emplace_back(std::move(train), std::move(test));
    } else {
        if (split.folds > n) throw ArgumentError("more folds than rows");
        for (std::size_t f = 0; f < split.folds; ++f) {
            std::vector<std::size_t> train, test;
            for (std::size_t i = 0; i < n; ++i) (i % split.folds == f ? test : train).push_back(order[i]);
            parts.emplace_back(std::move(train), std::move(test));
        }
    }

    ExtrinsicReport report;
    for (const auto& [train, test] : parts) {
        const auto y_train = take(y, train), y_test = take(y, test);
        const auto o_train = take(offset, train), o_test = take(offset, test);
        const auto mb = labeled_fit("baseline", take_rows(base, train), y_train, family, o_train);
        const auto ma = labeled_fit("augmented", take_rows(aug, train), y_train, family, o_train);
        FoldResult fr;
        fr.baseline_deviance = glm::deviance(mb, take_rows(base, test), y_test, o_test);
        fr.augmented_deviance = glm::deviance(ma, take_rows(aug, test), y_test, o_test);
        fr.train_rows = train.size();
        fr.test_rows = test.size();
        report.baseline_deviance += fr.baseline_deviance;
        report.augmented_deviance += fr.augmented_deviance;
        report.folds.push_back(fr);
    }
    report.delta = report.baseline_deviance - report.augmented_deviance;
    return report;
}

std::string format_report(const IntrinsicReport& report, bool machine) {
    std::ostringstream os;
    if (machine) {
        os << "query: " << report.query << '\n' << "count: " << report.neighbors.size() << '\n';
        for (std::size_t i = 0; i < report.neighbors.size(); ++i)
            os << "neighbor." << i + 1 << ": " << report.neighbors[i].id << ' '
               << format_double(report.neighbors[i].cosine) << '\n';
        return os.str();
    }
    os << "nearest neighbors of " << report.query << " by cosine\n";
    char buf[64];
    for (std::size_t i = 0; i < report.neighbors.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%4zu  %+.6f  ", i + 1, report.neighbors[i].cosine);
        os << buf << report.neighbors[i].id << '\n';
    }
    return os.str();
}

std::string format_report(const ExtrinsicReport& report, bool machine) {
    std::ostringstream os;
    if (machine) {
        os << "baseline_deviance: " << format_double(report.baseline_deviance) << '\n'
           << "augmented_deviance: " << format_double(report.augmented_deviance) << '\n'
           << "delta: " << format_double(report.delta) << '\n'
           << "folds: " << report.folds.size() << '\n';
        for (std::size_t i = 0; i < report.folds.size(); ++i) {
            const auto& f = report.folds[i];
            os << "fold." << i + 1 << ".baseline_deviance: " << format_double(f.baseline_deviance) << '\n'
               << "fold." << i + 1 << ".augmented_deviance: " << format_double(f.augmented_deviance) << '\n'
               << "fold." << i + 1 << ".train_rows: " << f.train_rows << '\n'
               << "fold." << i + 1 << ".test_rows: " << f.test_rows << '\n';
        }
        return os.str();
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "holdout deviance  baseline %.6f  augmented %.6f  delta %+.6f\n",
                  report.baseline_deviance, report.augmented_deviance, report.delta);
    os << buf;
    for (std::size_t i = 0; i < report.folds.size(); ++i) {
        const auto& f = report.folds[i];
        std::snprintf(buf, sizeof buf, "  fold %zu: train %zu, test %zu, baseline %.6f, augmented %.6f\n", i + 1,
                      f.train_rows, f.test_rows, f.baseline_deviance, f.augmented_deviance);
        os << buf;
    }
    return os.str();
}

}  // namespace ratemb::evaluate
