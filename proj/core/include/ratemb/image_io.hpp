#pragma once

#include <iosfwd>
#include <string>

#include "ratemb/tensor.hpp"

namespace ratemb {

// Plain-text netpbm images: "P2" graymaps (1 channel) and "P3" pixmaps
// (3 channels). '#' starts a comment that runs to end of line.

/// Pixel intensities are divided by the declared max value, so the result
/// lies in [0, 1]. Shape is height x width x channels.
Tensor read_image(std::istream& is);
Tensor read_image(const std::string& path);

/// Writes P2 or P3 depending on the channel count; values are clamped to
/// [0, 1] and scaled to 0..max_value.
void write_image(const Tensor& image, std::ostream& os, int max_value = 255);
void write_image(const Tensor& image, const std::string& path, int max_value = 255);

}  // namespace ratemb
