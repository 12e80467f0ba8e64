#pragma once

#include "pixelseq/tensor.hpp"

namespace pixelseq {

struct Parameter;

enum class MaskKind { A, B };

// Causal connectivity pattern for one convolution kernel. Spatial rule:
// rows above the kernel center pass, the center row passes strictly left of
// center, everything else is blocked. At the center tap, features are split
// into `groups` contiguous equal blocks ordered R,G,B and an output block
// may read a strictly lower input block (kind A) or lower-or-equal (kind B).
struct MaskSpec {
  MaskKind kind = MaskKind::B;
  int kh = 1, kw = 1;
  int in_features = 0, out_features = 0;
  int groups = 1;
  Tensor pattern;  // out x in x kh x kw, values in {0,1}

  int in_group(int f) const { return f / (in_features / groups); }
  int out_group(int f) const { return f / (out_features / groups); }

  // True if any weight in the (g_out, g_in) feature block is unmasked at
  // kernel tap (dy, dx). Drives the symbolic dependency propagation.
  bool allows(int g_out, int g_in, int dy, int dx) const;
};

MaskSpec build_mask(MaskKind kind, int kh, int kw, int in_features, int out_features,
                    int groups);

// Stacks `copies` repeats of a mask along the output-feature axis. Used for
// gate-ordered LSTM kernels, where each of the four gate blocks must carry
// the same per-group connectivity.
MaskSpec tile_gates(const MaskSpec& base, int copies);

// Zeroes the masked positions of the parameter's value in place, exactly.
// Requires the parameter to carry a mask of matching element count.
void apply_mask(Parameter& p);

}  // namespace pixelseq
