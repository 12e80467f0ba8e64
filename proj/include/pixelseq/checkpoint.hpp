#pragma once

#include <map>
#include <span>
#include <string>

#include "pixelseq/parameter.hpp"
#include "pixelseq/tensor.hpp"

namespace pixelseq {

// Checkpoint container: magic "PXSQ1", u64-LE header length, header bytes
// (key=value lines; empty for bare parameter files), then per-parameter
// records of (u64-LE name length, name bytes, u64-LE rank, u64-LE extents,
// f64-LE data) until end of file. Round-trips are bit-exact.
void save_checkpoint(const std::string& path, const std::string& header,
                     std::span<const Parameter* const> params);

struct LoadedCheckpoint {
  std::map<std::string, std::string> header;  // parsed key=value lines
  std::string header_text;
  std::map<std::string, Tensor> tensors;
};

LoadedCheckpoint read_checkpoint(const std::string& path);

// Copies tensors into matching parameters by name; every parameter must be
// present with an identical shape, and no record may be left over.
void load_parameters(const LoadedCheckpoint& ck, std::span<Parameter* const> params);

}  // namespace pixelseq
