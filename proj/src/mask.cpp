#include "pixelseq/mask.hpp"

#include <string>

#include "pixelseq/errors.hpp"
#include "pixelseq/parameter.hpp"

namespace pixelseq {

bool MaskSpec::allows(int g_out, int g_in, int dy, int dx) const {
  const int ob = out_features / groups;
  const int ib = in_features / groups;
  for (int fo = g_out * ob; fo < (g_out + 1) * ob; ++fo) {
    for (int fi = g_in * ib; fi < (g_in + 1) * ib; ++fi) {
      if (pattern.at(fo, fi, dy, dx) != 0.0) return true;
    }
  }
  return false;
}

MaskSpec build_mask(MaskKind kind, int kh, int kw, int in_features, int out_features,
                    int groups) {
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigError("build_mask: kernel extents must be odd, got " + std::to_string(kh) +
                      "x" + std::to_string(kw));
  }
  if (groups < 1 || in_features % groups != 0 || out_features % groups != 0) {
    throw ConfigError("build_mask: feature counts (" + std::to_string(in_features) + "," +
                      std::to_string(out_features) + ") not divisible by group count " +
                      std::to_string(groups));
  }
  MaskSpec m;
  m.kind = kind;
  m.kh = kh;
  m.kw = kw;
  m.in_features = in_features;
  m.out_features = out_features;
  m.groups = groups;
  m.pattern = Tensor({out_features, in_features, kh, kw});

  const int cy = (kh - 1) / 2;
  const int cx = (kw - 1) / 2;
  for (int fo = 0; fo < out_features; ++fo) {
    const int go = m.out_group(fo);
    for (int fi = 0; fi < in_features; ++fi) {
      const int gi = m.in_group(fi);
      for (int dy = 0; dy < kh; ++dy) {
        for (int dx = 0; dx < kw; ++dx) {
          double v = 0.0;
          if (dy < cy) {
            v = 1.0;
          } else if (dy == cy && dx < cx) {
            v = 1.0;
          } else if (dy == cy && dx == cx) {
            v = (kind == MaskKind::A) ? (gi < go ? 1.0 : 0.0) : (gi <= go ? 1.0 : 0.0);
          }
          m.pattern.at(fo, fi, dy, dx) = v;
        }
      }
    }
  }
  return m;
}

MaskSpec tile_gates(const MaskSpec& base, int copies) {
  if (copies < 1) throw ConfigError("tile_gates: copies must be >= 1");
  MaskSpec m = base;
  m.out_features = base.out_features * copies;
  m.pattern = Tensor({m.out_features, m.in_features, m.kh, m.kw});
  const int block = base.out_features * base.in_features * base.kh * base.kw;
  for (int c = 0; c < copies; ++c) {
    for (int i = 0; i < block; ++i) {
      m.pattern[c * block + i] = base.pattern[i];
    }
  }
  return m;
}

void apply_mask(Parameter& p) {
  if (!p.mask) return;
  if (p.mask->pattern.numel() != p.value.numel()) {
    throw ConfigError("apply_mask: mask/parameter element count mismatch for " + p.name);
  }
  for (int i = 0; i < p.value.numel(); ++i) {
    if (p.mask->pattern[i] == 0.0) p.value[i] = 0.0;
  }
}

}  // namespace pixelseq
