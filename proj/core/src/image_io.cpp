#include "ratemb/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ratemb/error.hpp"
#include "ratemb/textio.hpp"

namespace ratemb {

Tensor read_image(std::istream& is) {
    // Strip comments first so the token reader sees only the raster.
    std::ostringstream clean;
    std::string line;
    while (std::getline(is, line)) {
        if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
        clean << line << '\n';
    }
    std::istringstream in(clean.str());
    TokenReader r(in);
    const auto magic = r.next();
    std::size_t channels = 0;
    if (magic == "P2") channels = 1;
    else if (magic == "P3") channels = 3;
    else throw ParseError("unsupported image magic '" + magic + "' (expected P2 or P3)", r.line());
    const auto width = r.next_size();
    const auto height = r.next_size();
    const auto max_value = r.next_size();
    if (width == 0 || height == 0 || max_value == 0) throw ParseError("image dimensions and max value must be positive", r.line());
    Tensor img({height, width, channels});
    for (auto& v : img.values()) {
        const auto px = r.next_size();
        if (px > max_value) throw ParseError("pixel value " + std::to_string(px) + " exceeds max value", r.line());
        v = static_cast<double>(px) / static_cast<double>(max_value);
    }
    return img;
}

Tensor read_image(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ArgumentError("cannot open image '" + path + "'");
    try {
        return read_image(is);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line());
    }
}

void write_image(const Tensor& image, std::ostream& os, int max_value) {
    if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3))
        throw ShapeError("write_image: need H x W x 1 or H x W x 3, got " + shape_string(image.shape()));
    if (max_value <= 0) throw ArgumentError("write_image: max value must be positive");
    os << (image.dim(2) == 1 ? "P2" : "P3") << '\n' << image.dim(1) << ' ' << image.dim(0) << '\n' << max_value << '\n';
    const std::size_t per_row = image.dim(1) * image.dim(2);
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = std::clamp(image[i], 0.0, 1.0);
        os << static_cast<int>(std::lround(v * max_value)) << ((i + 1) % per_row == 0 ? '\n' : ' ');
    }
}

void write_image(const Tensor& image, const std::string& path, int max_value) {
    std::ofstream os(path);
    if (!os) throw ArgumentError("cannot open '" + path + "' for writing");
    write_image(image, os, max_value);
}

}  // namespace ratemb
