#include "ratemb/textio.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ratemb/error.hpp"

namespace ratemb {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_values(std::ostream& os, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << ' ';
        os << format_double(values[i]);
    }
    os << '\n';
}

TokenReader::TokenReader(std::istream& in) : in_(in) {}

bool TokenReader::at_end() {
    int c;
    while ((c = in_.peek()) != EOF && std::isspace(c)) {
        if (c == '\n') ++line_;
        in_.get();
    }
    return c == EOF;
}

std::string TokenReader::next() {
    if (at_end()) throw ParseError("unexpected end of input", line_);
    std::string tok;
    int c;
    while ((c = in_.peek()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(in_.get()));
    return tok;
}

double TokenReader::next_double() {
    const auto tok = next();
    return parse_double(tok, line_);
}

std::size_t TokenReader::next_size() {
    const auto tok = next();
    return parse_size(tok, line_);
}

std::int64_t TokenReader::next_int() {
    const auto tok = next();
    std::int64_t v{};
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) throw ParseError("expected integer, got '" + tok + "'", line_);
    return v;
}

void TokenReader::expect(std::string_view word) {
    const auto tok = next();
    if (tok != word) throw ParseError("expected '" + std::string(word) + "', got '" + tok + "'", line_);
}

std::vector<double> TokenReader::next_doubles(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = next_double();
    return v;
}

double parse_double(std::string_view s, std::size_t line) {
    std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (tmp.empty() || end != tmp.c_str() + tmp.size()) throw ParseError("expected number, got '" + tmp + "'", line);
    return v;
}

std::size_t parse_size(std::string_view s, std::size_t line) {
    std::size_t v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ParseError("expected non-negative integer, got '" + std::string(s) + "'", line);
    return v;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot open '" + path + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ArgumentError("failed writing '" + path + "'");
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

std::string_view strip_zeros(std::string_view s) {
    while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
    return s;
}

}  // namespace

bool id_less(std::string_view a, std::string_view b) {
    const bool da = all_digits(a), db = all_digits(b);
    if (da && db) {
        const auto x = strip_zeros(a), y = strip_zeros(b);
        if (x.size() != y.size()) return x.size() < y.size();
        if (x != y) return x < y;
        return a < b;
    }
    if (da != db) return da;
    return a < b;
}

}  // namespace ratemb
