#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pixelseq/mask.hpp"
#include "pixelseq/parameter.hpp"
#include "pixelseq/rng.hpp"
#include "pixelseq/tape.hpp"

namespace pixelseq {

// One recurrence step of hidden/cell maps.
struct RecurrentState {
  Value hidden, cell;
};

// Gate order along the feature axis is [o, f, i, g], each block h wide.
// o, f, i pass through the logistic sigmoid, g through tanh; then
// c = f (*) c_prev + i (*) g and h = o (*) tanh(c).
RecurrentState lstm_step(Value gates_preact, RecurrentState prev);

// Uniform +-(1 / sqrt(fan_in)) initialization.
void init_uniform(Parameter& p, int fan_in, Rng& rng);

// A convolution with bias; masked when the kernel carries a MaskSpec.
struct Conv2dLayer {
  Parameter kernel;  // f_out x f_in x kh x kw
  Parameter bias;    // f_out

  Value forward(Tape& t, Value x) const;  // same spatial resolution
  void collect(std::vector<Parameter*>& out);
  int in_features() const { return kernel.value.extent(1); }
  int out_features() const { return kernel.value.extent(0); }
};

Conv2dLayer make_conv(const std::string& name, int in_f, int out_f, int kh, int kw, Rng& rng);
Conv2dLayer make_masked_conv(const std::string& name, MaskKind kind, int kh, int kw, int in_f,
                             int out_f, int groups, Rng& rng);

// Row LSTM: the input-to-state component is a masked k x 1 row convolution
// precomputed for the whole map; the state-to-state component is an
// unmasked k x 1 row convolution over the previous row's hidden state.
class RowLstm {
 public:
  RowLstm(const std::string& name, int in_features, int h, int side, int groups,
          MaskKind is_kind, int k, Rng& rng);

  Value input_to_state(Tape& t, Value x) const;  // 4h x n x n
  Value forward(Tape& t, Value x, const Value* gate_bias = nullptr) const;
  void collect(std::vector<Parameter*>& out);

  int h() const { return h_; }
  int kernel_width() const { return k_; }
  const MaskSpec& base_mask() const { return base_mask_; }

  Parameter k_is;  // 4h x f_in x k, mask tiled per gate
  Parameter b_is;  // 4h
  Parameter k_ss;  // 4h x h x k, no mask
  Parameter h0, c0;  // h x 1 x n learnable initial row state

 private:
  int h_, in_features_, side_, k_, groups_;
  MaskSpec base_mask_;
};

// Diagonal BiLSTM: per direction, a 1 x 1 masked input-to-state convolution
// and a column-wise 2-tap state-to-state convolution over the skewed map.
// The right direction runs on the mirrored image; its output is mirrored
// back and shifted down one row before the two maps are added.
class DiagBiLstm {
 public:
  struct Direction {
    Parameter k_is;  // 4h x f_in x 1 x 1, mask tiled per gate
    Parameter b_is;  // 4h
    Parameter k_ss;  // 4h x h x 2, no mask; tap d reads row y + d - 1
    Parameter h0, c0;  // h x n x 1 learnable initial column state
  };

  DiagBiLstm(const std::string& name, int in_features, int h, int side, int groups,
             MaskKind is_kind, Rng& rng);

  // Column recurrence over an already-skewed 4h x n x (2n-1) gate map.
  // States at out-of-band positions are pinned to the initial state after
  // every column, so off-band garbage cannot reach valid outputs.
  Value direction_hidden_skewed(Tape& t, Value skewed_gates, const Direction& d) const;

  Value forward(Tape& t, Value x, const Value* gate_bias = nullptr) const;
  void collect(std::vector<Parameter*>& out);

  int h() const { return h_; }
  const MaskSpec& base_mask() const { return base_mask_; }

  Direction left, right;

 private:
  Value direction_output(Tape& t, Value x, const Direction& d, const Value* gate_bias,
                         bool mirrored) const;

  int h_, in_features_, side_, groups_;
  MaskSpec base_mask_;
};

// Residual wrapper: 2h features in and out. The inner layer reduces to h
// features; a 1 x 1 group-masked convolution upsamples back to 2h and the
// block input is added when `residual` is set.
struct Block {
  enum class Inner { masked_conv, row_lstm, diag_bilstm };

  Inner kind = Inner::masked_conv;
  bool residual = true;
  std::unique_ptr<Conv2dLayer> conv;  // 3 x 3 mask B, 2h -> h
  std::unique_ptr<RowLstm> row;
  std::unique_ptr<DiagBiLstm> diag;
  Conv2dLayer upsample;  // 1 x 1 mask B, h -> 2h

  Value forward(Tape& t, Value x, const Value* gate_bias = nullptr) const;
  void collect(std::vector<Parameter*>& out);
};

}  // namespace pixelseq
