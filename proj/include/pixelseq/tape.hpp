#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pixelseq/parameter.hpp"
#include "pixelseq/tensor.hpp"

namespace pixelseq {

class Tape;

// Handle to one node of a recording. Valid only while its Tape is alive.
struct Value {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& val() const;
};

// Recording-based reverse-mode differentiation. A Tape is single-threaded
// and append-only; backward() walks the nodes once in reverse creation
// order, which is a valid topological order. A tape can be differentiated
// once; build a new recording for the next step.
class Tape {
 public:
  using BackFn = std::function<void(Tape&, int node)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value input(Tensor v);
  Value param(Parameter& p);

  // Propagates d(loss)/d(node) to every node and adds d(loss)/d(theta) into
  // the bound Parameter grad accumulators. loss must be scalar.
  void backward(Value loss);

  const Tensor& value(Value v) const { return node_value(v.id); }
  const Tensor& grad(Value v);  // zero tensor if the node is off the loss path

  // When false, the numeric-error input scans in the convolution ops are
  // skipped (used by the NaN-poisoning sampler mode).
  bool check_finite = true;

  // Low-level interface used by the op implementations.
  Value emit(Tensor out, BackFn back);
  const Tensor& node_value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Tensor& grad_buffer(int id);
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].has_grad; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    BackFn back;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<int, Parameter*>> bound_;
  bool ran_backward_ = false;
};

struct Pad2d {
  int top = 0, bottom = 0, left = 0, right = 0;
};

// Padding that preserves spatial extent for an odd kh x kw kernel.
Pad2d same_pad(int kh, int kw);

// ---- elementwise ----
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value scale(Value a, double c);
Value sigmoid(Value a);
Value tanh(Value a);
Value relu(Value a);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }
inline Value operator*(double c, Value a) { return scale(a, c); }

// ---- convolutions ----
// Cross-correlation (no kernel flip): out(o,y,x) = sum kernel(o,i,dy,dx) *
// padded_input(i, y+dy, x+dx). input is f_in x H x W, kernel is
// f_out x f_in x kh x kw. Exact-zero kernel weights are skipped, so masked
// taps contribute nothing even against non-finite inputs.
Value conv2d(Value input, Value kernel, Pad2d pad);

// Centered 1-D convolution along each row; kernel f_out x f_in x k, k odd.
Value conv1d_rows(Value input, Value kernel);

// 1-D convolution along each column; kernel f_out x f_in x k with tap d
// reading input row y + d - pad_top.
Value conv1d_cols(Value input, Value kernel, int pad_top);

// Adds bias (length = extent 0) broadcast over the remaining axes.
Value add_bias(Value input, Value bias);

// ---- shape ops ----
Value slice_row(Value map, int row);                 // f x H x W -> f x 1 x W
Value slice_col(Value map, int col);                 // f x H x W -> f x H x 1
Value stack_rows(std::span<const Value> rows);       // H x (f x 1 x W) -> f x H x W
Value stack_cols(std::span<const Value> cols);       // W x (f x H x 1) -> f x H x W
Value slice_features(Value x, int lo, int hi);       // axis-0 slab
Value mirror_cols(Value map);                        // reverse the width axis
Value shift_down(Value map);                         // row y <- row y-1, top row zero
Value upsample_nearest(Value map, int factor);

// Offsets row r of an f x n x n map to columns [r, r+n) of an
// f x n x (2n-1) map; the off-band positions are zero. unskew removes the
// offsets again and is the exact inverse on skew's image.
Value skew(Value map);
Value unskew(Value map);

// ---- reductions / losses ----
Value sum_all(Value x);

// Total NLL in nats of grouped 256-way softmax logits. logits is
// (groups*classes) x H x W with contiguous class blocks per group; targets
// holds group-major integer sub-pixel values (g, y, x), each in [0,classes).
Value softmax_nll(Value logits, const std::vector<int>& targets, int groups, int classes);

// Total NLL in nats of Bernoulli logits (1 x H x W); targets in {0,1}.
Value bernoulli_nll(Value logits, const std::vector<int>& targets);

}  // namespace pixelseq
