#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ratemb/tensor.hpp"

namespace ratemb {

/// id -> fixed-length vector, kept in insertion order.
class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dimension = 0) : dim_(dimension) {}

    std::size_t dimension() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

    /// Throws ArgumentError on duplicate id, ShapeError on wrong length.
    void add(std::string id, std::span<const double> vec);

    const std::vector<std::string>& ids() const { return ids_; }
    const std::string& id(std::size_t i) const { return ids_.at(i); }
    std::span<const double> row(std::size_t i) const;
    std::optional<std::size_t> find(const std::string& id) const;
    /// Throws ArgumentError for unknown ids.
    std::span<const double> at(const std::string& id) const;

    /// n x dimension matrix of all rows (n must be positive).
    Tensor matrix() const;

    friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
        return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.values_ == b.values_;
    }

private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<double> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// First line "<count> <dimension>", then "<id> <v1> ... <vl>" per row with
/// 17-significant-digit values.
void write_embeddings(const EmbeddingTable& table, std::ostream& os);
EmbeddingTable read_embeddings(std::istream& is);
void write_embeddings(const EmbeddingTable& table, const std::string& path);
EmbeddingTable read_embeddings(const std::string& path);

}  // namespace ratemb
