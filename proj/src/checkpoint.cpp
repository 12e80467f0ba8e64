#include "pixelseq/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "pixelseq/config.hpp"
#include "pixelseq/errors.hpp"

namespace pixelseq {

namespace {

constexpr char kMagic[5] = {'P', 'X', 'S', 'Q', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError(path + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

double get_f64(std::istream& in, const std::string& path) {
  const std::uint64_t v = get_u64(in, path);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& header,
                     std::span<const Parameter* const> params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(kMagic, 5);
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const Parameter* p : params) {
    put_u64(out, p->name.size());
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u64(out, static_cast<std::uint64_t>(p->value.rank()));
    for (int e : p->value.shape) put_u64(out, static_cast<std::uint64_t>(e));
    for (double v : p->value.data) put_f64(out, v);
  }
  if (!out) throw DataError("write failed: " + path);
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0) {
    throw DataError(path + ": not a PXSQ1 checkpoint");
  }
  LoadedCheckpoint ck;
  const std::uint64_t hlen = get_u64(in, path);
  if (hlen > (1u << 20)) throw DataError(path + ": implausible header length");
  ck.header_text.resize(hlen);
  if (hlen > 0 && !in.read(ck.header_text.data(), static_cast<std::streamsize>(hlen))) {
    throw DataError(path + ": truncated header");
  }
  if (!ck.header_text.empty()) ck.header = parse_config_text(ck.header_text);

  while (true) {
    in.peek();
    if (in.eof()) break;
    const std::uint64_t nlen = get_u64(in, path);
    if (nlen > (1u << 16)) throw DataError(path + ": implausible name length");
    std::string name(nlen, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(nlen))) {
      throw DataError(path + ": truncated parameter name");
    }
    const std::uint64_t rank = get_u64(in, path);
    if (rank > 8) throw DataError(path + ": implausible tensor rank");
    std::vector<int> shape;
    std::size_t numel = 1;
    for (std::uint64_t i = 0; i < rank; ++i) {
      const std::uint64_t e = get_u64(in, path);
      if (e > (1u << 28)) throw DataError(path + ": implausible extent");
      shape.push_back(static_cast<int>(e));
      numel *= e;
    }
    Tensor t(shape);
    for (std::size_t i = 0; i < numel; ++i) t.data[i] = get_f64(in, path);
    if (ck.tensors.count(name)) throw DataError(path + ": duplicate parameter " + name);
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

void load_parameters(const LoadedCheckpoint& ck, std::span<Parameter* const> params) {
  std::set<std::string> used;
  for (Parameter* p : params) {
    auto it = ck.tensors.find(p->name);
    if (it == ck.tensors.end()) throw DataError("checkpoint missing parameter " + p->name);
    if (it->second.shape != p->value.shape) {
      throw DataError("checkpoint shape mismatch for " + p->name);
    }
    p->value = it->second;
    used.insert(p->name);
  }
  for (const auto& [name, t] : ck.tensors) {
    if (!used.count(name)) throw DataError("checkpoint has unexpected parameter " + name);
  }
}

}  // namespace pixelseq
