#include "pixelseq/pnm.hpp"

#include <fstream>

#include "pixelseq/errors.hpp"

namespace pixelseq {

void write_pgm(const std::string& path, int side, const std::vector<std::uint8_t>& pixels) {
  if (static_cast<int>(pixels.size()) != side * side) {
    throw ConfigError("write_pgm: pixel count mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "P5\n" << side << ' ' << side << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw DataError("write failed: " + path);
}

void write_ppm(const std::string& path, int side, const std::vector<std::uint8_t>& planar_rgb) {
  if (static_cast<int>(planar_rgb.size()) != 3 * side * side) {
    throw ConfigError("write_ppm: pixel count mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "P6\n" << side << ' ' << side << "\n255\n";
  const std::size_t plane = static_cast<std::size_t>(side) * side;
  for (std::size_t i = 0; i < plane; ++i) {
    const char px[3] = {static_cast<char>(planar_rgb[i]),
                        static_cast<char>(planar_rgb[plane + i]),
                        static_cast<char>(planar_rgb[2 * plane + i])};
    out.write(px, 3);
  }
  if (!out) throw DataError("write failed: " + path);
}

void write_raw_u8(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace pixelseq
