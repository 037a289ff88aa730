#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ratemb/autoencode.hpp"
#include "ratemb/embedding.hpp"

namespace ratemb::geo {

struct GeoPoint {
    std::string id;
    double x = 0.0;
    double y = 0.0;
    std::vector<double> features;
};

/// Planar points, each carrying the same p features.
class GeoPointSet {
public:
    explicit GeoPointSet(std::vector<std::string> feature_names);

    /// Throws ArgumentError on duplicate id, wrong feature count or
    /// non-finite coordinates.
    void add(GeoPoint point);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    std::size_t feature_count() const { return names_.size(); }
    const std::vector<std::string>& feature_names() const { return names_; }
    const GeoPoint& operator[](std::size_t i) const { return points_[i]; }
    const std::vector<GeoPoint>& points() const { return points_; }

    /// Diagonal of the bounding box.
    double diameter() const;

private:
    std::vector<std::string> names_;
    std::vector<GeoPoint> points_;
    std::unordered_set<std::string> ids_;
};

/// Header "id,x,y,<feature names>", then one CSV row per point.
GeoPointSet read_geo_csv(std::istream& is);
GeoPointSet read_geo_csv(const std::string& path);
void write_geo_csv(const GeoPointSet& pts, std::ostream& os);

/// q x q lattice centered on (cx, cy). Cell (i, j) sits at offset
/// ((j - h) * spacing, (i - h) * spacing) from the center, h = (q - 1) / 2;
/// i runs along y and j along x.
struct NeighborGrid {
    double cx = 0.0;
    double cy = 0.0;
    std::size_t q = 1;
    double spacing = 1.0;

    double offset(std::size_t index) const;
    double cell_x(std::size_t j) const { return cx + offset(j); }
    double cell_y(std::size_t i) const { return cy + offset(i); }
    std::size_t cell_count() const { return q * q; }
};

/// Throws ArgumentError for even or zero q and non-positive spacing.
NeighborGrid span_grid(double cx, double cy, std::size_t q, double spacing);

struct AttachOptions {
    /// Cells whose nearest source is at distance >= cutoff stay empty.
    double cutoff = std::numeric_limits<double>::infinity();
    /// Appends a channel that is 1 on filled cells and 0 on empty ones.
    bool mask = true;
};

/// Bucket index over the points for nearest-source queries. Distances are
/// measured relative to a grid center so that shifting every coordinate by
/// the same exactly representable amount changes nothing.
class SourceIndex {
public:
    explicit SourceIndex(const GeoPointSet& pts);

    /// Index of the nearest point to center + (dx, dy), ties by lowest id.
    std::size_t nearest(double cx, double cy, double dx, double dy) const;
    /// Squared distance used by nearest() for point i.
    double distance2(std::size_t i, double cx, double cy, double dx, double dy) const;

private:
    const GeoPointSet& pts_;
    double x0_, y0_, cell_;
    std::size_t nx_, ny_;
    std::vector<std::vector<std::size_t>> buckets_;
    std::vector<std::size_t> id_rank_;

    std::size_t bucket_x(double x) const;
    std::size_t bucket_y(double y) const;
};

/// q x q x p cuboid (q x q x (p + 1) with the mask) for one grid.
Tensor attach_features(const NeighborGrid& grid, const GeoPointSet& pts, const AttachOptions& opts = {});
Tensor attach_features(const NeighborGrid& grid, const GeoPointSet& pts, const SourceIndex& index,
                       const AttachOptions& opts = {});

struct DataCuboid {
    std::string source_id;
    Tensor values;
};

/// One cuboid centered on every point of the set, in point order.
std::vector<DataCuboid> build_cuboids(const GeoPointSet& pts, std::size_t q, double spacing,
                                      const AttachOptions& opts = {});

/// Default lattice spacing: diameter / 64.
double default_spacing(const GeoPointSet& pts);

struct CraeModel {
    /// Takes raw cuboids; per-channel standardization is its first layer.
    nn::Network encoder;
    std::vector<double> loss_history;
};

/// Conv-AE architecture used when none is given: up to two unpooled 3 x 3
/// stages of 8 filters (fewer on small grids) and an identity output layer,
/// since inputs are standardized.
autoencode::AutoencoderSpec crae_default_spec(const Shape& cuboid_shape, std::size_t dim);

/// Standardizes each channel with statistics over every cell of every
/// cuboid, trains the conv autoencoder, and returns its encoder with the
/// standardization prepended.
CraeModel crae_fit(std::span<const DataCuboid> cuboids, const autoencode::AutoencoderSpec& spec,
                   const nn::TrainConfig& cfg);

std::vector<double> crae_embed(const nn::Network& encoder, const Tensor& cuboid);
EmbeddingTable crae_embed_all(const nn::Network& encoder, std::span<const DataCuboid> cuboids);

/// Mean over points of the mean cosine between a point's embedding and
/// those of its k spatially nearest other points (ties by id). Rows of the
/// table and coords must be in the same order.
double smoothness_score(const EmbeddingTable& embeddings, std::span<const std::pair<double, double>> coords,
                        std::size_t k);

}  // namespace ratemb::geo
