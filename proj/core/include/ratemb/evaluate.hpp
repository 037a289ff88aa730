#pragma once

#include <span>
#include <string>
#include <vector>

#include "ratemb/embedding.hpp"
#include "ratemb/glm.hpp"

namespace ratemb::evaluate {

/// u.v / (|u| |v|); larger means closer. Throws DomainError on a zero
/// vector and ShapeError on unequal lengths.
double cosine(std::span<const double> u, std::span<const double> v);

struct Neighbor {
    std::string id;
    double cosine;
};

struct IntrinsicReport {
    std::string query;
    /// Non-increasing cosine; equal cosines ordered by id.
    std::vector<Neighbor> neighbors;
};

/// Top k rows by cosine to the query row, the query excluded. Needs
/// k < table size. Zero rows raise DomainError naming the id.
IntrinsicReport nearest_neighbors(const EmbeddingTable& table, const std::string& query, std::size_t k);

struct SplitOptions {
    double train_fraction = 0.7;
    std::uint64_t seed = 1;
    /// 0 or 1 for a single seeded holdout; k >= 2 for k-fold.
    std::size_t folds = 0;
};

struct FoldResult {
    double baseline_deviance = 0.0;
    double augmented_deviance = 0.0;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
};

struct ExtrinsicReport {
    /// Holdout deviances summed over folds.
    double baseline_deviance = 0.0;
    double augmented_deviance = 0.0;
    /// baseline - augmented; positive favors the augmented model.
    double delta = 0.0;
    std::vector<FoldResult> folds;
};

/// Fits both designs on each training part and scores deviance on the held
/// out rows. Fit failures are rethrown with "baseline" or "augmented" in the
/// message.
ExtrinsicReport extrinsic_compare(std::span<const glm::FeatureBlock> baseline,
                                  std::span<const glm::FeatureBlock> augmented, std::span<const double> y,
                                  const glm::GlmFamily& family, const SplitOptions& split = {},
                                  std::span<const double> offset = {});

/// Plain text when machine is false, otherwise "key: value" lines.
std::string format_report(const IntrinsicReport& report, bool machine);
std::string format_report(const ExtrinsicReport& report, bool machine);

}  // namespace ratemb::evaluate
