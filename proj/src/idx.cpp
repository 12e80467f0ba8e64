#include "pixelseq/idx.hpp"

#include <cstdint>
#include <fstream>
#include <string>

#include "pixelseq/errors.hpp"

namespace pixelseq {

namespace {

std::uint32_t read_u32_be(std::istream& in, std::size_t offset, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError(path + ": truncated header at byte " + std::to_string(offset));
  }
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

}  // namespace

Dataset load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);

  unsigned char magic[4];
  if (!in.read(reinterpret_cast<char*>(magic), 4)) {
    throw DataError(path + ": truncated magic at byte 0");
  }
  if (magic[0] != 0 || magic[1] != 0) {
    throw DataError(path + ": bad IDX magic at byte 0");
  }
  if (magic[2] != 0x08) {
    throw DataError(path + ": unsupported IDX type code at byte 2 (u8 required)");
  }
  if (magic[3] != 3) {
    throw DataError(path + ": unsupported IDX rank at byte 3 (3-D image tensor required)");
  }

  const std::uint32_t count = read_u32_be(in, 4, path);
  const std::uint32_t rows = read_u32_be(in, 8, path);
  const std::uint32_t cols = read_u32_be(in, 12, path);
  if (rows != cols) throw DataError(path + ": non-square images unsupported");
  if (rows == 0 || count == 0) throw DataError(path + ": empty IDX tensor");

  Dataset d;
  d.channels = 1;
  d.side = static_cast<int>(rows);
  d.max_value = 255;
  const std::size_t per = static_cast<std::size_t>(rows) * cols;
  d.images.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<std::uint8_t> img(per);
    if (!in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(per))) {
      const std::size_t got = static_cast<std::size_t>(in.gcount());
      throw DataError(path + ": truncated payload, expected " +
                      std::to_string(16 + static_cast<std::size_t>(count) * per) +
                      " bytes total, ran out at byte " +
                      std::to_string(16 + static_cast<std::size_t>(i) * per + got));
    }
    d.images.push_back(std::move(img));
  }
  return d;
}

void write_idx(const std::string& path, const Dataset& d) {
  if (d.channels != 1) throw ConfigError("write_idx: grayscale datasets only");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  const unsigned char magic[4] = {0, 0, 0x08, 3};
  out.write(reinterpret_cast<const char*>(magic), 4);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<std::uint32_t>(d.count()));
  put_u32(static_cast<std::uint32_t>(d.side));
  put_u32(static_cast<std::uint32_t>(d.side));
  for (const auto& img : d.images) {
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  }
  if (!out) throw DataError("write failed: " + path);
}

Dataset load_raw(const std::string& path, int side, int channels) {
  if (side < 1 || channels < 1) throw ConfigError("load_raw: side and channels must be >= 1");
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open: " + path);
  const std::size_t size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  const std::size_t per = static_cast<std::size_t>(channels) * side * side;
  if (size == 0 || size % per != 0) {
    throw DataError(path + ": size " + std::to_string(size) +
                    " is not a multiple of the image stride " + std::to_string(per));
  }
  Dataset d;
  d.channels = channels;
  d.side = side;
  d.max_value = 255;
  const std::size_t count = size / per;
  d.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<std::uint8_t> img(per);
    if (!in.read(reinterpret_cast<char*>(img.data()), static_cast<std::streamsize>(per))) {
      throw DataError(path + ": short read at image " + std::to_string(i));
    }
    d.images.push_back(std::move(img));
  }
  return d;
}

}  // namespace pixelseq
