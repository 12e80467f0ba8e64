#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pixelseq {

// Binary PGM (P5) from row-major grayscale bytes.
void write_pgm(const std::string& path, int side, const std::vector<std::uint8_t>& pixels);

// Binary PPM (P6) from planar RGB bytes (3 * side * side).
void write_ppm(const std::string& path, int side, const std::vector<std::uint8_t>& planar_rgb);

// Raw little-endian u8 dump, bit-exact fixture mode.
void write_raw_u8(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace pixelseq
