#pragma once

#include <string>

#include "pixelseq/dataset.hpp"

namespace pixelseq {

// IDX u8 3-D image tensor reader (the MNIST distribution format):
// big-endian magic 0x00 0x00 0x08 0x03 followed by three big-endian u32
// extents and row-major payload bytes. Any other type/rank code and any
// truncation is rejected with the failing byte offset.
Dataset load_idx(const std::string& path);

void write_idx(const std::string& path, const Dataset& d);

// Headerless planar corpus: per image `channels * side * side` bytes.
Dataset load_raw(const std::string& path, int side, int channels);

}  // namespace pixelseq
