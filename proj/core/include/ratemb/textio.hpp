#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ratemb {

/// 17 significant digits; strtod of the result reproduces the value exactly.
std::string format_double(double v);

/// Space-separated values on one line, terminated by '\n'.
void write_values(std::ostream& os, std::span<const double> values);

/// Whitespace tokenizer that remembers the current line for error messages.
class TokenReader {
public:
    explicit TokenReader(std::istream& in);

    /// Next token; throws ParseError at end of input.
    std::string next();
    bool at_end();

    double next_double();
    std::size_t next_size();
    std::int64_t next_int();
    void expect(std::string_view word);
    std::vector<double> next_doubles(std::size_t n);

    std::size_t line() const { return line_; }

private:
    std::istream& in_;
    std::size_t line_ = 1;
};

double parse_double(std::string_view s, std::size_t line);
std::size_t parse_size(std::string_view s, std::size_t line);

/// 64-bit FNV-1a over raw bytes, used for manifest and config checksums.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Whole file contents; throws ArgumentError if the file cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

/// Plain non-negative integers come first in numeric order, then all other
/// ids in byte order. Used for every "ties by id" rule.
bool id_less(std::string_view a, std::string_view b);

}  // namespace ratemb
