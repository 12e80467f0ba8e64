#include "pixelseq/network.hpp"

#include <algorithm>
#include <string>

#include "pixelseq/errors.hpp"

namespace pixelseq {

const char* to_string(NetKind k) {
  switch (k) {
    case NetKind::pixelcnn: return "pixelcnn";
    case NetKind::row_lstm: return "row_lstm";
    case NetKind::diag_bilstm: return "diag_bilstm";
  }
  return "?";
}

const char* to_string(HeadKind k) {
  return k == HeadKind::softmax256x3 ? "softmax256x3" : "bernoulli";
}

NetKind net_kind_from_string(const std::string& s) {
  if (s == "pixelcnn") return NetKind::pixelcnn;
  if (s == "row_lstm") return NetKind::row_lstm;
  if (s == "diag_bilstm") return NetKind::diag_bilstm;
  throw ConfigError("unknown network kind: " + s);
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "softmax256x3" || s == "softmax") return HeadKind::softmax256x3;
  if (s == "bernoulli") return HeadKind::bernoulli;
  throw ConfigError("unknown head kind: " + s);
}

void NetworkSpec::validate() const {
  if (depth < 1) throw ConfigError("NetworkSpec: depth must be >= 1");
  if (h < 1) throw ConfigError("NetworkSpec: h must be >= 1");
  if (head_width < 1) throw ConfigError("NetworkSpec: head_width must be >= 1");
  if (first_kernel < 1 || first_kernel % 2 == 0) {
    throw ConfigError("NetworkSpec: first_kernel must be odd");
  }
  if (lstm_k < 3 || lstm_k % 2 == 0) throw ConfigError("NetworkSpec: lstm_k must be odd, >= 3");
  if (h % groups() != 0) {
    throw ConfigError("NetworkSpec: h must be divisible by the channel group count");
  }
  if (head_width % groups() != 0) {
    throw ConfigError("NetworkSpec: head_width must be divisible by the channel group count");
  }
}

int raster_index(const SubPixel& p, int side, int groups) {
  return (p.row * side + p.col) * groups + p.group;
}

namespace {

std::string block_name(int i) { return "block" + std::to_string(i); }

}  // namespace

Network::Network(const NetworkSpec& spec, int side, std::uint64_t seed)
    : spec_(spec), side_(side) {
  spec_.validate();
  if (side < 1) throw ConfigError("Network: image side must be >= 1");
  Rng rng(seed);
  const int G = spec_.groups();
  const int C = spec_.channels();
  const int h = spec_.h;
  const int width = 2 * h;

  first_ = make_masked_conv("first", MaskKind::A, spec_.first_kernel, spec_.first_kernel, C,
                            width, G, rng);

  for (int i = 0; i < spec_.depth; ++i) {
    Block b;
    b.residual = spec_.use_residual;
    switch (spec_.kind) {
      case NetKind::pixelcnn:
        b.kind = Block::Inner::masked_conv;
        b.conv = std::make_unique<Conv2dLayer>(
            make_masked_conv(block_name(i) + ".conv", MaskKind::B, 3, 3, width, h, G, rng));
        break;
      case NetKind::row_lstm:
        b.kind = Block::Inner::row_lstm;
        b.row = std::make_unique<RowLstm>(block_name(i) + ".row", width, h, side, G, MaskKind::B,
                                          spec_.lstm_k, rng);
        break;
      case NetKind::diag_bilstm:
        b.kind = Block::Inner::diag_bilstm;
        b.diag = std::make_unique<DiagBiLstm>(block_name(i) + ".diag", width, h, side, G,
                                              MaskKind::B, rng);
        break;
    }
    b.upsample = make_masked_conv(block_name(i) + ".up", MaskKind::B, 1, 1, h, width, G, rng);
    blocks_.push_back(std::move(b));
    if (spec_.use_skip) {
      skips_.push_back(
          make_masked_conv(block_name(i) + ".skip", MaskKind::B, 1, 1, width, width, G, rng));
    }
  }

  head1_ = make_masked_conv("head.c1", MaskKind::B, 1, 1, width, spec_.head_width, G, rng);
  head2_ = make_masked_conv("head.c2", MaskKind::B, 1, 1, spec_.head_width, spec_.head_width, G,
                            rng);
  head_out_ = make_masked_conv("head.out", MaskKind::B, 1, 1, spec_.head_width,
                               spec_.logit_features(), G, rng);
}

Value Network::forward_image(Tape& t, const Tensor& image,
                             const std::vector<Value>* gate_biases) const {
  if (image.rank() != 3 || image.extent(0) != spec_.channels()) {
    throw ConfigError("forward: image must be channels x n x n with matching channel count");
  }
  if (image.extent(1) != side_ || image.extent(2) != side_) {
    throw ConfigError("forward: image side mismatch");
  }
  if (gate_biases && static_cast<int>(gate_biases->size()) != spec_.depth) {
    throw ConfigError("forward: need one gate bias per block");
  }

  Value x = t.input(image);
  Value cur = first_.forward(t, x);
  Value skip_sum{};
  bool have_skip = false;
  for (int i = 0; i < spec_.depth; ++i) {
    const Value* gb = gate_biases ? &(*gate_biases)[static_cast<std::size_t>(i)] : nullptr;
    cur = blocks_[static_cast<std::size_t>(i)].forward(t, cur, gb);
    if (spec_.use_skip) {
      Value s = skips_[static_cast<std::size_t>(i)].forward(t, cur);
      skip_sum = have_skip ? add(skip_sum, s) : s;
      have_skip = true;
    }
  }
  Value pre_head = have_skip ? add(cur, skip_sum) : cur;
  Value a = head1_.forward(t, relu(pre_head));
  a = head2_.forward(t, relu(a));
  return head_out_.forward(t, relu(a));
}

Tensor Network::forward_batch(const Tensor& batch) const {
  if (batch.rank() != 4) throw ConfigError("forward_batch: batch must be B x C x n x n");
  const int B = batch.extent(0);
  const int C = batch.extent(1);
  const int n = batch.extent(2);
  if (C != spec_.channels() || n != side_ || batch.extent(3) != n) {
    throw ConfigError("forward_batch: batch shape mismatch");
  }
  const int lf = spec_.logit_features();
  Tensor out(spec_.head == HeadKind::softmax256x3 ? std::vector<int>{B, 3, 256, n, n}
                                                  : std::vector<int>{B, 1, n, n});
  const int per = lf * n * n;
  for (int b = 0; b < B; ++b) {
    Tensor img({C, n, n});
    std::copy_n(batch.data.begin() + static_cast<std::ptrdiff_t>(b) * C * n * n, C * n * n,
                img.data.begin());
    Tape t;
    Value logits = forward_image(t, img);
    std::copy_n(logits.val().data.begin(), per,
                out.data.begin() + static_cast<std::ptrdiff_t>(b) * per);
  }
  return out;
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  first_.collect(out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect(out);
    if (spec_.use_skip) skips_[i].collect(out);
  }
  head1_.collect(out);
  head2_.collect(out);
  head_out_.collect(out);
  return out;
}

std::vector<const Parameter*> Network::parameters() const {
  auto mut = const_cast<Network*>(this)->parameters();
  return std::vector<const Parameter*>(mut.begin(), mut.end());
}

Parameter* Network::find_parameter(const std::string& name) {
  for (Parameter* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

void Network::apply_all_masks() {
  for (Parameter* p : parameters()) apply_mask(*p);
}

// ---- dependency-field analysis ----
//
// Grids are boolean masks over (group, row, col). Each helper maps a
// requirement set on a stage's output to the requirement set on its input.

namespace {

struct Grids {
  int G = 1, n = 1;
  std::size_t idx(int g, int y, int x) const {
    return static_cast<std::size_t>((g * n + y) * n + x);
  }
  std::vector<std::uint8_t> zero() const {
    return std::vector<std::uint8_t>(static_cast<std::size_t>(G * n * n), 0);
  }
};

using Grid = std::vector<std::uint8_t>;

void merge_into(Grid& a, const Grid& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] |= b[i];
}

// Same-resolution masked convolution.
Grid conv_back(const Grids& ctx, const Grid& out, const MaskSpec& m) {
  Grid in = ctx.zero();
  const int cy = (m.kh - 1) / 2, cx = (m.kw - 1) / 2;
  for (int go = 0; go < ctx.G; ++go) {
    for (int y = 0; y < ctx.n; ++y) {
      for (int x = 0; x < ctx.n; ++x) {
        if (!out[ctx.idx(go, y, x)]) continue;
        for (int dy = 0; dy < m.kh; ++dy) {
          const int yi = y + dy - cy;
          if (yi < 0 || yi >= ctx.n) continue;
          for (int dx = 0; dx < m.kw; ++dx) {
            const int xi = x + dx - cx;
            if (xi < 0 || xi >= ctx.n) continue;
            for (int gi = 0; gi < ctx.G; ++gi) {
              if (m.allows(go, gi, dy, dx)) in[ctx.idx(gi, yi, xi)] = 1;
            }
          }
        }
      }
    }
  }
  return in;
}

// Center-tap group rule of the input-to-state masks.
bool center_allows(MaskKind kind, int g_in, int g_out) {
  return kind == MaskKind::A ? g_in < g_out : g_in <= g_out;
}

Grid row_lstm_back(const Grids& ctx, const Grid& out, const RowLstm& L) {
  const int k = L.kernel_width();
  const int half = (k - 1) / 2;
  const MaskKind kind = L.base_mask().kind;
  Grid need_h = out;
  Grid need_c = ctx.zero();
  Grid in = ctx.zero();
  for (int r = ctx.n - 1; r >= 0; --r) {
    for (int g = 0; g < ctx.G; ++g) {
      for (int c = 0; c < ctx.n; ++c) {
        if (!need_h[ctx.idx(g, r, c)] && !need_c[ctx.idx(g, r, c)]) continue;
        // gates at (g, r, c): masked input taps on row r
        for (int d = 0; d < k; ++d) {
          const int dx = d - half;
          const int xi = c + dx;
          if (xi < 0 || xi >= ctx.n || dx > 0) continue;
          for (int gi = 0; gi < ctx.G; ++gi) {
            if (dx < 0 || center_allows(kind, gi, g)) in[ctx.idx(gi, r, xi)] = 1;
          }
        }
        if (r > 0) {
          // unmasked state taps over the previous row, plus the cell chain
          for (int dx = -half; dx <= half; ++dx) {
            const int xi = c + dx;
            if (xi < 0 || xi >= ctx.n) continue;
            for (int gi = 0; gi < ctx.G; ++gi) need_h[ctx.idx(gi, r - 1, xi)] = 1;
          }
          need_c[ctx.idx(g, r - 1, c)] = 1;
        }
      }
    }
  }
  return in;
}

Grid diag_bilstm_back(const Grids& ctx, const Grid& out, const DiagBiLstm& L) {
  const MaskKind kind = L.base_mask().kind;
  const int n = ctx.n;
  Grid in = ctx.zero();

  // Left direction: state at (r, c) reads the input center tap, states at
  // (r-1, c) and (r, c-1), and the cell at (r, c-1).
  {
    Grid need_h = out;
    Grid need_c = ctx.zero();
    for (int s = 2 * n - 2; s >= 0; --s) {
      for (int r = std::min(n - 1, s); r >= std::max(0, s - n + 1); --r) {
        const int c = s - r;
        for (int g = 0; g < ctx.G; ++g) {
          if (!need_h[ctx.idx(g, r, c)] && !need_c[ctx.idx(g, r, c)]) continue;
          for (int gi = 0; gi < ctx.G; ++gi) {
            if (center_allows(kind, gi, g)) in[ctx.idx(gi, r, c)] = 1;
          }
          if (r > 0) {
            for (int gi = 0; gi < ctx.G; ++gi) need_h[ctx.idx(gi, r - 1, c)] = 1;
          }
          if (c > 0) {
            for (int gi = 0; gi < ctx.G; ++gi) need_h[ctx.idx(gi, r, c - 1)] = 1;
            need_c[ctx.idx(g, r, c - 1)] = 1;
          }
        }
      }
    }
  }

  // Right direction (mirrored scan): state at (r, c) reads the input center
  // tap, states at (r-1, c) and (r, c+1), and the cell at (r, c+1). The
  // layer output at (r, c) reads the right state at (r-1, c).
  {
    Grid need_h = ctx.zero();
    Grid need_c = ctx.zero();
    for (int g = 0; g < ctx.G; ++g) {
      for (int r = 1; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
          if (out[ctx.idx(g, r, c)]) need_h[ctx.idx(g, r - 1, c)] = 1;
        }
      }
    }
    for (int s = 2 * n - 2; s >= 0; --s) {
      // s indexes the mirrored anti-diagonal r + (n - 1 - c)
      for (int r = std::min(n - 1, s); r >= std::max(0, s - n + 1); --r) {
        const int c = n - 1 - (s - r);
        for (int g = 0; g < ctx.G; ++g) {
          if (!need_h[ctx.idx(g, r, c)] && !need_c[ctx.idx(g, r, c)]) continue;
          for (int gi = 0; gi < ctx.G; ++gi) {
            if (center_allows(kind, gi, g)) in[ctx.idx(gi, r, c)] = 1;
          }
          if (r > 0) {
            for (int gi = 0; gi < ctx.G; ++gi) need_h[ctx.idx(gi, r - 1, c)] = 1;
          }
          if (c < n - 1) {
            for (int gi = 0; gi < ctx.G; ++gi) need_h[ctx.idx(gi, r, c + 1)] = 1;
            need_c[ctx.idx(g, r, c + 1)] = 1;
          }
        }
      }
    }
  }
  return in;
}

Grid block_back(const Grids& ctx, const Grid& out, const Block& b) {
  Grid mid = conv_back(ctx, out, *b.upsample.kernel.mask);
  Grid in;
  switch (b.kind) {
    case Block::Inner::masked_conv:
      in = conv_back(ctx, mid, *b.conv->kernel.mask);
      break;
    case Block::Inner::row_lstm:
      in = row_lstm_back(ctx, mid, *b.row);
      break;
    case Block::Inner::diag_bilstm:
      in = diag_bilstm_back(ctx, mid, *b.diag);
      break;
  }
  if (b.residual) merge_into(in, out);
  return in;
}

}  // namespace

std::set<SubPixel> Network::dependency_field(const SubPixel& out) const {
  if (out.row < 0 || out.row >= side_ || out.col < 0 || out.col >= side_ || out.group < 0 ||
      out.group >= spec_.groups()) {
    throw ConfigError("dependency_field: position out of range");
  }
  Grids ctx{spec_.groups(), side_};
  Grid cur = ctx.zero();
  cur[ctx.idx(out.group, out.row, out.col)] = 1;

  // head: three 1x1 mask-B convolutions (ReLUs are identity for deps)
  cur = conv_back(ctx, cur, *head_out_.kernel.mask);
  cur = conv_back(ctx, cur, *head2_.kernel.mask);
  cur = conv_back(ctx, cur, *head1_.kernel.mask);

  Grid skip_need = ctx.zero();
  if (spec_.use_skip) {
    // every block output additionally feeds the pre-head map via its skip conv
    for (std::size_t i = 0; i < skips_.size(); ++i) {
      merge_into(skip_need, conv_back(ctx, cur, *skips_[i].kernel.mask));
    }
  }

  for (int i = spec_.depth - 1; i >= 0; --i) {
    Grid out_need = cur;
    if (spec_.use_skip) merge_into(out_need, skip_need);
    cur = block_back(ctx, out_need, blocks_[static_cast<std::size_t>(i)]);
  }

  cur = conv_back(ctx, cur, *first_.kernel.mask);

  std::set<SubPixel> deps;
  for (int g = 0; g < ctx.G; ++g) {
    for (int y = 0; y < ctx.n; ++y) {
      for (int x = 0; x < ctx.n; ++x) {
        if (cur[ctx.idx(g, y, x)]) deps.insert(SubPixel{y, x, g});
      }
    }
  }
  return deps;
}

// ---- multi-scale ----

MultiScaleNetwork::MultiScaleNetwork(const MultiScaleSpec& spec, int side, std::uint64_t seed)
    : spec_(spec),
      side_(side),
      uncond_(spec.unconditional, spec.small_side, seed),
      cond_(spec.conditional, side, seed + 1) {
  if (spec.small_side < 1 || side % spec.small_side != 0) {
    throw ConfigError("MultiScaleNetwork: small side must divide the image side");
  }
  if (spec.unconditional.channels() != spec.conditional.channels()) {
    throw ConfigError("MultiScaleNetwork: channel counts must match across scales");
  }
  if (spec.upsampler_width < 1) throw ConfigError("MultiScaleNetwork: upsampler width >= 1");
  Rng rng(seed + 2);
  const int C = spec.conditional.channels();
  const int c = spec.upsampler_width;
  ups1_ = make_conv("ups.c1", C, c, 3, 3, rng);
  ups2_ = make_conv("ups.c2", c, c, 3, 3, rng);
  for (int i = 0; i < spec.conditional.depth; ++i) {
    const int gate_width =
        spec.conditional.kind == NetKind::pixelcnn ? spec.conditional.h : 4 * spec.conditional.h;
    bias_convs_.push_back(
        make_conv("condbias" + std::to_string(i) + ".conv", c, gate_width, 1, 1, rng));
  }
}

Value MultiScaleNetwork::conditioning_map(Tape& t, const Tensor& small_image) const {
  if (small_image.rank() != 3 || small_image.extent(0) != spec_.conditional.channels() ||
      small_image.extent(1) != spec_.small_side || small_image.extent(2) != spec_.small_side) {
    throw ConfigError("conditioning_map: small image shape mismatch");
  }
  Value x = t.input(small_image);
  Value up = upsample_nearest(x, factor());
  Value y = relu(ups1_.forward(t, up));
  return ups2_.forward(t, y);
}

std::vector<Value> MultiScaleNetwork::gate_biases(Tape& t, Value cond_map) const {
  std::vector<Value> biases;
  biases.reserve(bias_convs_.size());
  for (const Conv2dLayer& conv : bias_convs_) {
    biases.push_back(conv.forward(t, cond_map));
  }
  return biases;
}

Value MultiScaleNetwork::conditional_forward(Tape& t, const Tensor& image,
                                             const Tensor& small_image) const {
  Value cmap = conditioning_map(t, small_image);
  std::vector<Value> biases = gate_biases(t, cmap);
  return cond_.forward_image(t, image, &biases);
}

std::vector<Parameter*> MultiScaleNetwork::parameters() {
  std::vector<Parameter*> out = uncond_.parameters();
  for (Parameter* p : cond_.parameters()) out.push_back(p);
  for (Parameter* p : upsampler_parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> MultiScaleNetwork::upsampler_parameters() {
  std::vector<Parameter*> out;
  ups1_.collect(out);
  ups2_.collect(out);
  for (Conv2dLayer& c : bias_convs_) c.collect(out);
  return out;
}

void MultiScaleNetwork::apply_all_masks() {
  for (Parameter* p : parameters()) apply_mask(*p);
}

}  // namespace pixelseq
