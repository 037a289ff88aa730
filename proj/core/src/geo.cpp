#include "ratemb/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "ratemb/dimred.hpp"
#include "ratemb/error.hpp"
#include "ratemb/evaluate.hpp"
#include "ratemb/textio.hpp"

namespace ratemb::geo {

GeoPointSet::GeoPointSet(std::vector<std::string> feature_names) : names_(std::move(feature_names)) {}

void GeoPointSet::add(GeoPoint point) {
    if (point.features.size() != names_.size())
        throw ArgumentError("point '" + point.id + "' has " + std::to_string(point.features.size()) +
                            " features, expected " + std::to_string(names_.size()));
    if (!std::isfinite(point.x) || !std::isfinite(point.y))
        throw ArgumentError("point '" + point.id + "' has non-finite coordinates");
    if (!ids_.insert(point.id).second) throw ArgumentError("duplicate point id '" + point.id + "'");
    points_.push_back(std::move(point));
}

double GeoPointSet::diameter() const {
    if (points_.empty()) return 0.0;
    double x0 = points_[0].x, x1 = x0, y0 = points_[0].y, y1 = y0;
    for (const auto& p : points_) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return std::hypot(x1 - x0, y1 - y0);
}

GeoPointSet read_geo_csv(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        ++lineno;
        if (!trim(line).empty()) {
            header = split(trim(line), ',');
            break;
        }
    }
    if (header.size() < 3) throw ParseError("geo header must start with id,x,y", lineno);
    for (auto& h : header) h = trim(h);
    if (header[0] != "id" || header[1] != "x" || header[2] != "y")
        throw ParseError("geo header must start with id,x,y", lineno);
    GeoPointSet pts(std::vector<std::string>(header.begin() + 3, header.end()));
    while (std::getline(is, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty()) continue;
        const auto cells = split(body, ',');
        if (cells.size() != header.size())
            throw ParseError("row has " + std::to_string(cells.size()) + " fields, header has " +
                                 std::to_string(header.size()),
                             lineno);
        GeoPoint p;
        p.id = trim(cells[0]);
        if (p.id.empty()) throw ParseError("empty point id", lineno);
        p.x = parse_double(trim(cells[1]), lineno);
        p.y = parse_double(trim(cells[2]), lineno);
        for (std::size_t k = 3; k < cells.size(); ++k) p.features.push_back(parse_double(trim(cells[k]), lineno));
        try {
            pts.add(std::move(p));
        } catch (const ArgumentError& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    return pts;
}

GeoPointSet read_geo_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ArgumentError("cannot open geo file '" + path + "'");
    return read_geo_csv(is);
}

void write_geo_csv(const GeoPointSet& pts, std::ostream& os) {
    os << "id,x,y";
    for (const auto& n : pts.feature_names()) os << ',' << n;
    os << '\n';
    for (const auto& p : pts.points()) {
        os << p.id << ',' << format_double(p.x) << ',' << format_double(p.y);
        for (double v : p.features) os << ',' << format_double(v);
        os << '\n';
    }
}

double NeighborGrid::offset(std::size_t index) const {
    const auto h = static_cast<double>((q - 1) / 2);
    return (static_cast<double>(index) - h) * spacing;
}

NeighborGrid span_grid(double cx, double cy, std::size_t q, double spacing) {
    if (q == 0 || q % 2 == 0) throw ArgumentError("grid size q must be odd, got " + std::to_string(q));
    if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ArgumentError("grid spacing must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw ArgumentError("grid center must be finite");
    return {cx, cy, q, spacing};
}

SourceIndex::SourceIndex(const GeoPointSet& pts) : pts_(pts) {
    if (pts.empty()) throw ArgumentError("cannot index an empty point set");
    const std::size_t n = pts.size();
    double x1 = pts[0].x, y1 = pts[0].y;
    x0_ = x1;
    y0_ = y1;
    for (const auto& p : pts.points()) {
        x0_ = std::min(x0_, p.x);
        x1 = std::max(x1, p.x);
        y0_ = std::min(y0_, p.y);
        y1 = std::max(y1, p.y);
    }
    const auto side = static_cast<std::size_t>(std::max(1.0, std::ceil(std::sqrt(static_cast<double>(n)))));
    const double extent = std::max(x1 - x0_, y1 - y0_);
    cell_ = extent > 0.0 ? extent / static_cast<double>(side) : 1.0;
    nx_ = std::min(side, static_cast<std::size_t>((x1 - x0_) / cell_) + 1);
    ny_ = std::min(side, static_cast<std::size_t>((y1 - y0_) / cell_) + 1);
    buckets_.assign(nx_ * ny_, {});
    for (std::size_t i = 0; i < n; ++i) buckets_[bucket_y(pts[i].y) * nx_ + bucket_x(pts[i].x)].push_back(i);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return id_less(pts[a].id, pts[b].id); });
    id_rank_.resize(n);
    for (std::size_t r = 0; r < n; ++r) id_rank_[order[r]] = r;
}

std::size_t SourceIndex::bucket_x(double x) const {
    const double f = std::floor((x - x0_) / cell_);
    return f <= 0.0 ? 0 : std::min(nx_ - 1, static_cast<std::size_t>(f));
}

std::size_t SourceIndex::bucket_y(double y) const {
    const double f = std::floor((y - y0_) / cell_);
    return f <= 0.0 ? 0 : std::min(ny_ - 1, static_cast<std::size_t>(f));
}

double SourceIndex::distance2(std::size_t i, double cx, double cy, double dx, double dy) const {
    const double rx = (pts_[i].x - cx) - dx;
    const double ry = (pts_[i].y - cy) - dy;
    return rx * rx + ry * ry;
}

std::size_t SourceIndex::nearest(double cx, double cy, double dx, double dy) const {
    const double qx = cx + dx, qy = cy + dy;
    const auto bx = static_cast<std::ptrdiff_t>(bucket_x(qx));
    const auto by = static_cast<std::ptrdiff_t>(bucket_y(qy));
    const auto nx = static_cast<std::ptrdiff_t>(nx_), ny = static_cast<std::ptrdiff_t>(ny_);
    std::size_t best = pts_.size();
    double best_d2 = std::numeric_limits<double>::infinity();
    const auto consider = [&](std::size_t i) {
        const double d2 = distance2(i, cx, cy, dx, dy);
        if (d2 < best_d2 || (d2 == best_d2 && id_rank_[i] < id_rank_[best])) {
            best = i;
            best_d2 = d2;
        }
    };
    for (std::ptrdiff_t r = 0;; ++r) {
        for (std::ptrdiff_t j = by - r; j <= by + r; ++j) {
            if (j < 0 || j >= ny) continue;
            const bool edge_row = j == by - r || j == by + r;
            for (std::ptrdiff_t i = bx - r; i <= bx + r; i += (edge_row || r == 0) ? 1 : 2 * r) {
                if (i < 0 || i >= nx) continue;
                for (auto p : buckets_[static_cast<std::size_t>(j * nx + i)]) consider(p);
            }
        }
        const bool covered = bx - r <= 0 && by - r <= 0 && bx + r >= nx - 1 && by + r >= ny - 1;
        if (covered) break;
        if (best < pts_.size()) {
            // Every point outside the searched square is at least this far away.
            const double left = x0_ + static_cast<double>(bx - r) * cell_;
            const double right = x0_ + static_cast<double>(bx + r + 1) * cell_;
            const double bottom = y0_ + static_cast<double>(by - r) * cell_;
            const double top = y0_ + static_cast<double>(by + r + 1) * cell_;
            double reach = std::numeric_limits<double>::infinity();
            if (bx - r > 0) reach = std::min(reach, qx - left);
            if (bx + r < nx - 1) reach = std::min(reach, right - qx);
            if (by - r > 0) reach = std::min(reach, qy - bottom);
            if (by + r < ny - 1) reach = std::min(reach, top - qy);
            if (reach > 0.0 && reach * reach > best_d2 * (1.0 + 1e-9) + 1e-300) break;
        }
    }
    return best;
}

Tensor attach_features(const NeighborGrid& grid, const GeoPointSet& pts, const AttachOptions& opts) {
    return attach_features(grid, pts, SourceIndex(pts), opts);
}

Tensor attach_features(const NeighborGrid& grid, const GeoPointSet& pts, const SourceIndex& index,
                       const AttachOptions& opts) {
    if (pts.empty()) throw ArgumentError("attach_features needs at least one source point");
    if (std::isnan(opts.cutoff) || opts.cutoff < 0.0) throw ArgumentError("cutoff must be non-negative");
    const std::size_t p = pts.feature_count(), c = p + (opts.mask ? 1 : 0), q = grid.q;
    Tensor cuboid({q, q, c});
    const double cutoff2 = opts.cutoff * opts.cutoff;
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) {
            const double dx = grid.offset(j), dy = grid.offset(i);
            const std::size_t src = index.nearest(grid.cx, grid.cy, dx, dy);
            if (!(index.distance2(src, grid.cx, grid.cy, dx, dy) < cutoff2)) continue;
            const auto& f = pts[src].features;
            for (std::size_t k = 0; k < p; ++k) cuboid.at(i, j, k) = f[k];
            if (opts.mask) cuboid.at(i, j, p) = 1.0;
        }
    return cuboid;
}

std::vector<DataCuboid> build_cuboids(const GeoPointSet& pts, std::size_t q, double spacing,
                                      const AttachOptions& opts) {
    const SourceIndex index(pts);
    std::vector<DataCuboid> out;
    out.reserve(pts.size());
    for (const auto& p : pts.points())
        out.push_back({p.id, attach_features(span_grid(p.x, p.y, q, spacing), pts, index, opts)});
    return out;
}

double default_spacing(const GeoPointSet& pts) {
    const double d = pts.diameter();
    if (!(d > 0.0)) throw ArgumentError("cannot derive a grid spacing from points with zero extent");
    return d / 64.0;
}

autoencode::AutoencoderSpec crae_default_spec(const Shape& cuboid_shape, std::size_t dim) {
    if (cuboid_shape.size() != 3) throw SpecError("cuboid shape must be q x q x channels");
    autoencode::AutoencoderSpec spec;
    spec.kind = autoencode::AutoencoderSpec::Kind::conv;
    spec.input_shape = cuboid_shape;
    spec.bottleneck = dim;
    std::size_t side = cuboid_shape[0];
    for (int s = 0; s < 2 && side >= 3; ++s, side -= 2) spec.stages.push_back({3, 8, false});
    if (spec.stages.empty()) spec.stages.push_back({1, 8, false});
    spec.bottleneck_activation = nn::Activation::identity;
    spec.output_activation = nn::Activation::identity;
    spec.validate();
    return spec;
}

CraeModel crae_fit(std::span<const DataCuboid> cuboids, const autoencode::AutoencoderSpec& spec,
                   const nn::TrainConfig& cfg) {
    if (cuboids.empty()) throw ArgumentError("crae_fit needs at least one cuboid");
    const Shape shape = cuboids.front().values.shape();
    if (shape.size() != 3) throw ShapeError("cuboids must be q x q x channels, got " + shape_string(shape));
    for (const auto& c : cuboids)
        if (c.values.shape() != shape)
            throw ShapeError("cuboid '" + c.source_id + "' has shape " + shape_string(c.values.shape()) +
                             ", expected " + shape_string(shape));
    if (spec.input_shape != shape)
        throw SpecError("autoencoder input " + shape_string(spec.input_shape) + " does not match cuboids " +
                        shape_string(shape));

    const std::size_t channels = shape[2], cells = shape[0] * shape[1];
    Tensor all({cuboids.size() * cells, channels});
    for (std::size_t n = 0; n < cuboids.size(); ++n)
        std::copy(cuboids[n].values.values().begin(), cuboids[n].values.values().end(),
                  all.values().begin() + static_cast<std::ptrdiff_t>(n * cells * channels));
    const auto stats = dimred::standardize(all);
    auto front = std::make_unique<nn::ChannelAffineLayer>(stats.mean, stats.stddev);

    std::vector<Tensor> inputs;
    inputs.reserve(cuboids.size());
    nn::LayerCache scratch;
    for (const auto& c : cuboids) inputs.push_back(front->forward(c.values, scratch, {}));
    auto ae = autoencode::conv_ae_fit(inputs, spec, cfg);
    return {ae.encoder.with_front(std::move(front)), std::move(ae.loss_history)};
}

std::vector<double> crae_embed(const nn::Network& encoder, const Tensor& cuboid) {
    if (cuboid.shape() != encoder.input_shape())
        throw ShapeError("cuboid shape " + shape_string(cuboid.shape()) + " does not match encoder input " +
                         shape_string(encoder.input_shape()));
    const Tensor z = encoder.predict(cuboid);
    return {z.values().begin(), z.values().end()};
}

EmbeddingTable crae_embed_all(const nn::Network& encoder, std::span<const DataCuboid> cuboids) {
    EmbeddingTable table(shape_size(encoder.output_shape()));
    for (const auto& c : cuboids) table.add(c.source_id, crae_embed(encoder, c.values));
    return table;
}

double smoothness_score(const EmbeddingTable& embeddings, std::span<const std::pair<double, double>> coords,
                        std::size_t k) {
    const std::size_t n = embeddings.size();
    if (coords.size() != n)
        throw ArgumentError("smoothness_score: " + std::to_string(coords.size()) + " coordinates for " +
                            std::to_string(n) + " embeddings");
    if (k < 1 || k >= n) throw ArgumentError("smoothness_score: need 1 <= k < " + std::to_string(n));
    std::vector<std::size_t> others;
    others.reserve(n);
    double total = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        others.clear();
        for (std::size_t b = 0; b < n; ++b)
            if (b != a) others.push_back(b);
        const auto d2 = [&](std::size_t b) {
            const double dx = coords[b].first - coords[a].first, dy = coords[b].second - coords[a].second;
            return dx * dx + dy * dy;
        };
        std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k), others.end(),
                          [&](std::size_t u, std::size_t v) {
                              const double du = d2(u), dv = d2(v);
                              if (du != dv) return du < dv;
                              return id_less(embeddings.id(u), embeddings.id(v));
                          });
        double s = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
            try {
                s += evaluate::cosine(embeddings.row(a), embeddings.row(others[t]));
            } catch (const DomainError&) {
                const auto& bad = norm2(embeddings.row(a)) == 0.0 ? embeddings.id(a) : embeddings.id(others[t]);
                throw DomainError("embedding of '" + bad + "' is the zero vector");
            }
        }
        total += s / static_cast<double>(k);
    }
    return total / static_cast<double>(n);
}

}  // namespace ratemb::geo
