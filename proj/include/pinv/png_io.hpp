#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pinv/core.hpp"

namespace pinv {

// Minimal PNG support for the defense CLI and remote image payloads.
// Writes 8-bit RGB (stored deflate blocks); reads 8-bit grayscale, gray+alpha,
// RGB and RGBA, filters 0-4, stored/fixed/dynamic inflate, no interlace.
// Alpha is dropped and grayscale replicated on load.

std::vector<uint8_t> encode_png(const ImageBuffer& img);
ImageBuffer decode_png(const std::vector<uint8_t>& bytes);

void write_png_file(const std::filesystem::path& path, const ImageBuffer& img);
ImageBuffer read_png_file(const std::filesystem::path& path);

// zlib stream codecs, exposed for tests.
std::vector<uint8_t> zlib_inflate(const uint8_t* data, size_t size);
std::vector<uint8_t> zlib_deflate_stored(const std::vector<uint8_t>& raw);

}  // namespace pinv
