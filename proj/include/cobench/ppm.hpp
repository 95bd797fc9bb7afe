#pragma once

#include "cobench/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace cobench {

// Binary PPM (P6, maxval 255). Grayscale images are written with the single
// channel replicated into R, G and B. Pixels quantise as round(255 * v).
std::vector<std::uint8_t> encode_ppm(const Image& image);

// Accepts P6 with any maxval in [1, 255] and '#' comments in the header.
// Always yields a 3-channel image.
Image decode_ppm(std::span<const std::uint8_t> bytes);

void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

} // namespace cobench
