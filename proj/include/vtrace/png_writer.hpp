#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace vtrace {

/// Encodes an 8-bit grayscale image (row-major, `width` pixels per row) as PNG.
std::string encode_png_gray8(int width, int height, std::span<const std::uint8_t> pixels);

}  // namespace vtrace
