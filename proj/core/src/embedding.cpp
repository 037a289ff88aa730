#include "ratemb/embedding.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ratemb/error.hpp"
#include "ratemb/textio.hpp"

namespace ratemb {

void EmbeddingTable::add(std::string id, std::span<const double> vec) {
    if (vec.size() != dim_)
        throw ShapeError("embedding '" + id + "' has length " + std::to_string(vec.size()) + ", table dimension is " +
                         std::to_string(dim_));
    if (id.empty() || id.find_first_of(" \t\r\n") != std::string::npos)
        throw ArgumentError("embedding id '" + id + "' must be non-empty without whitespace");
    if (index_.contains(id)) throw ArgumentError("duplicate embedding id '" + id + "'");
    index_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    values_.insert(values_.end(), vec.begin(), vec.end());
}

std::span<const double> EmbeddingTable::row(std::size_t i) const {
    if (i >= ids_.size()) throw ArgumentError("embedding row " + std::to_string(i) + " out of range");
    return {values_.data() + i * dim_, dim_};
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::span<const double> EmbeddingTable::at(const std::string& id) const {
    auto i = find(id);
    if (!i) throw ArgumentError("unknown embedding id '" + id + "'");
    return row(*i);
}

Tensor EmbeddingTable::matrix() const { return Tensor({size(), dim_}, values_); }

void write_embeddings(const EmbeddingTable& table, std::ostream& os) {
    os << table.size() << ' ' << table.dimension() << '\n';
    for (std::size_t i = 0; i < table.size(); ++i) {
        os << table.id(i);
        for (double v : table.row(i)) os << ' ' << format_double(v);
        os << '\n';
    }
}

namespace {

std::vector<std::string> words(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> w;
    std::string t;
    while (ss >> t) w.push_back(t);
    return w;
}

}  // namespace

EmbeddingTable read_embeddings(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(is, line)) throw ParseError("missing embedding header", 1);
    ++lineno;
    const auto header = words(line);
    if (header.size() != 2) throw ParseError("embedding header must be '<count> <dimension>'", lineno);
    const auto count = parse_size(header[0], lineno);
    const auto dim = parse_size(header[1], lineno);
    EmbeddingTable table(dim);
    while (std::getline(is, line)) {
        ++lineno;
        const auto w = words(line);
        if (w.empty()) continue;
        if (w.size() != dim + 1)
            throw ParseError("row has " + std::to_string(w.size() - 1) + " values, header declares " +
                             std::to_string(dim), lineno);
        if (table.size() == count) throw ParseError("more rows than the declared count " + std::to_string(count), lineno);
        std::vector<double> v(dim);
        for (std::size_t j = 0; j < dim; ++j) v[j] = parse_double(w[j + 1], lineno);
        try {
            table.add(w[0], v);
        } catch (const ArgumentError& e) {
            throw ParseError(e.what(), lineno);
        }
    }
    if (table.size() != count)
        throw ParseError("found " + std::to_string(table.size()) + " rows, header declares " + std::to_string(count),
                         lineno);
    return table;
}

void write_embeddings(const EmbeddingTable& table, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ArgumentError("cannot open '" + path + "' for writing");
    write_embeddings(table, os);
}

EmbeddingTable read_embeddings(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ArgumentError("cannot open '" + path + "' for reading");
    return read_embeddings(is);
}

}  // namespace ratemb
