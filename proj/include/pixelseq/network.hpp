#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "pixelseq/layers.hpp"
#include "pixelseq/tape.hpp"

namespace pixelseq {

enum class NetKind { pixelcnn, row_lstm, diag_bilstm };
enum class HeadKind { softmax256x3, bernoulli };

const char* to_string(NetKind k);
const char* to_string(HeadKind k);
NetKind net_kind_from_string(const std::string& s);
HeadKind head_kind_from_string(const std::string& s);

// Declarative layer stack: a 7x7 mask-A entry convolution, `depth` blocks of
// the chosen kind at feature width 2h, then two ReLU + 1x1 mask-B layers of
// head_width features and a final 1x1 mask-B projection to the output head.
struct NetworkSpec {
  NetKind kind = NetKind::pixelcnn;
  int depth = 1;
  int h = 8;
  bool use_residual = true;
  bool use_skip = true;
  HeadKind head = HeadKind::bernoulli;
  int head_width = 32;
  int first_kernel = 7;
  int lstm_k = 3;  // Row LSTM kernel width

  int channels() const { return head == HeadKind::softmax256x3 ? 3 : 1; }
  int groups() const { return channels(); }
  int classes() const { return head == HeadKind::softmax256x3 ? 256 : 2; }
  int logit_features() const { return head == HeadKind::softmax256x3 ? 3 * 256 : 1; }
  void validate() const;
};

struct SubPixel {
  int row = 0, col = 0, group = 0;
  auto operator<=>(const SubPixel&) const = default;
};

// Raster order extended R -> G -> B within a pixel.
int raster_index(const SubPixel& p, int side, int groups);

class Network {
 public:
  Network(const NetworkSpec& spec, int side, std::uint64_t seed);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const NetworkSpec& spec() const { return spec_; }
  int side() const { return side_; }

  // Teacher-forced parallel forward pass on one preprocessed image
  // (channels x n x n). Returns the logit map: (3*256) x n x n with
  // contiguous 256-class blocks per channel, or 1 x n x n for Bernoulli.
  // gate_biases, when given, holds one per-block conditioning bias.
  Value forward_image(Tape& t, const Tensor& image,
                      const std::vector<Value>* gate_biases = nullptr) const;

  // Batched inference. batch is B x C x n x n; the result is
  // B x 3 x 256 x n x n (softmax head) or B x 1 x n x n (Bernoulli head).
  Tensor forward_batch(const Tensor& batch) const;

  // Exact dependency set of the distribution parameters at `out`, computed
  // by symbolic propagation through kernels and recurrences.
  std::set<SubPixel> dependency_field(const SubPixel& out) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter* find_parameter(const std::string& name);
  void apply_all_masks();

  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  friend class MultiScaleNetwork;

  NetworkSpec spec_;
  int side_;
  Conv2dLayer first_;
  std::vector<Block> blocks_;
  std::vector<Conv2dLayer> skips_;  // one per block when use_skip
  Conv2dLayer head1_, head2_, head_out_;
};

// Two-scale stack: an unconditional network on the s x s subsampled image
// and a conditional network on the full image whose every block is biased
// with an upsampled conditioning map of the small image.
struct MultiScaleSpec {
  int small_side = 4;
  int upsampler_width = 8;
  NetworkSpec unconditional;
  NetworkSpec conditional;
};

class MultiScaleNetwork {
 public:
  MultiScaleNetwork(const MultiScaleSpec& spec, int side, std::uint64_t seed);

  const MultiScaleSpec& spec() const { return spec_; }
  int side() const { return side_; }
  int factor() const { return side_ / spec_.small_side; }

  Network& unconditional() { return uncond_; }
  const Network& unconditional() const { return uncond_; }
  Network& conditional() { return cond_; }
  const Network& conditional() const { return cond_; }

  // c x n x n conditioning map from a preprocessed small image.
  Value conditioning_map(Tape& t, const Tensor& small_image) const;

  // Per-block additive gate biases (4h x n x n for recurrent blocks,
  // h x n x n for convolutional ones) from the conditioning map.
  std::vector<Value> gate_biases(Tape& t, Value cond_map) const;

  // Conditional logits for a full image given its small companion.
  Value conditional_forward(Tape& t, const Tensor& image, const Tensor& small_image) const;

  std::vector<Parameter*> parameters();
  std::vector<Parameter*> upsampler_parameters();
  void apply_all_masks();

 private:
  MultiScaleSpec spec_;
  int side_;
  Network uncond_, cond_;
  Conv2dLayer ups1_, ups2_;                // 3x3 unmasked
  std::vector<Conv2dLayer> bias_convs_;    // 1x1 unmasked, c -> gate width
};

}  // namespace pixelseq
