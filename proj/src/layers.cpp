#include "pixelseq/layers.hpp"

#include <cmath>

#include "pixelseq/errors.hpp"

namespace pixelseq {

RecurrentState lstm_step(Value gates_preact, RecurrentState prev) {
  const Tensor& g = gates_preact.val();
  if (g.extent(0) % 4 != 0) throw ConfigError("lstm_step: gate features not divisible by 4");
  const int h = g.extent(0) / 4;
  if (prev.hidden.val().extent(0) != h || !prev.hidden.val().same_shape(prev.cell.val())) {
    throw ConfigError("lstm_step: state shape mismatch");
  }
  Value o = sigmoid(slice_features(gates_preact, 0, h));
  Value f = sigmoid(slice_features(gates_preact, h, 2 * h));
  Value i = sigmoid(slice_features(gates_preact, 2 * h, 3 * h));
  Value gg = tanh(slice_features(gates_preact, 3 * h, 4 * h));
  Value c = add(mul(f, prev.cell), mul(i, gg));
  Value hid = mul(o, tanh(c));
  return RecurrentState{hid, c};
}

void init_uniform(Parameter& p, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : p.value.data) v = rng.uniform_in(-bound, bound);
}

Value Conv2dLayer::forward(Tape& t, Value x) const {
  const int kh = kernel.value.extent(2), kw = kernel.value.extent(3);
  Value k = t.param(const_cast<Parameter&>(kernel));
  Value b = t.param(const_cast<Parameter&>(bias));
  return add_bias(conv2d(x, k, same_pad(kh, kw)), b);
}

void Conv2dLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&kernel);
  out.push_back(&bias);
}

Conv2dLayer make_conv(const std::string& name, int in_f, int out_f, int kh, int kw, Rng& rng) {
  Conv2dLayer l;
  l.kernel = Parameter(name + ".kernel", Tensor({out_f, in_f, kh, kw}));
  l.bias = Parameter(name + ".bias", Tensor({out_f}));
  init_uniform(l.kernel, in_f * kh * kw, rng);
  return l;
}

Conv2dLayer make_masked_conv(const std::string& name, MaskKind kind, int kh, int kw, int in_f,
                             int out_f, int groups, Rng& rng) {
  Conv2dLayer l = make_conv(name, in_f, out_f, kh, kw, rng);
  l.kernel.mask = std::make_shared<MaskSpec>(build_mask(kind, kh, kw, in_f, out_f, groups));
  apply_mask(l.kernel);
  return l;
}

// ---- Row LSTM ----

RowLstm::RowLstm(const std::string& name, int in_features, int h, int side, int groups,
                 MaskKind is_kind, int k, Rng& rng)
    : h_(h), in_features_(in_features), side_(side), k_(k), groups_(groups) {
  if (k % 2 == 0) throw ConfigError("RowLstm: state kernel width must be odd");
  base_mask_ = build_mask(is_kind, 1, k, in_features, h, groups);

  k_is = Parameter(name + ".is.kernel", Tensor({4 * h, in_features, k}));
  k_is.mask = std::make_shared<MaskSpec>(tile_gates(base_mask_, 4));
  b_is = Parameter(name + ".is.bias", Tensor({4 * h}));
  k_ss = Parameter(name + ".ss.kernel", Tensor({4 * h, h, k}));
  h0 = Parameter(name + ".h0", Tensor({h, 1, side}));
  c0 = Parameter(name + ".c0", Tensor({h, 1, side}));
  init_uniform(k_is, in_features * k, rng);
  init_uniform(k_ss, h * k, rng);
  apply_mask(k_is);
}

Value RowLstm::input_to_state(Tape& t, Value x) const {
  Value k = t.param(const_cast<Parameter&>(k_is));
  Value b = t.param(const_cast<Parameter&>(b_is));
  return add_bias(conv1d_rows(x, k), b);
}

Value RowLstm::forward(Tape& t, Value x, const Value* gate_bias) const {
  const Tensor& xv = x.val();
  if (xv.rank() != 3 || xv.extent(1) != xv.extent(2)) {
    throw ConfigError("RowLstm: input map must be square");
  }
  if (xv.extent(1) != side_) throw ConfigError("RowLstm: input side mismatch");

  Value is = input_to_state(t, x);
  if (gate_bias) is = add(is, *gate_bias);

  Value kss = t.param(const_cast<Parameter&>(k_ss));
  RecurrentState state{t.param(const_cast<Parameter&>(h0)), t.param(const_cast<Parameter&>(c0))};
  std::vector<Value> rows;
  rows.reserve(static_cast<std::size_t>(side_));
  for (int r = 0; r < side_; ++r) {
    Value gates = add(slice_row(is, r), conv1d_rows(state.hidden, kss));
    state = lstm_step(gates, state);
    rows.push_back(state.hidden);
  }
  return stack_rows(rows);
}

void RowLstm::collect(std::vector<Parameter*>& out) {
  out.push_back(&k_is);
  out.push_back(&b_is);
  out.push_back(&k_ss);
  out.push_back(&h0);
  out.push_back(&c0);
}

// ---- Diagonal BiLSTM ----

DiagBiLstm::DiagBiLstm(const std::string& name, int in_features, int h, int side, int groups,
                       MaskKind is_kind, Rng& rng)
    : h_(h), in_features_(in_features), side_(side), groups_(groups) {
  base_mask_ = build_mask(is_kind, 1, 1, in_features, h, groups);
  auto make_dir = [&](const std::string& dn) {
    Direction d;
    d.k_is = Parameter(name + "." + dn + ".is.kernel", Tensor({4 * h, in_features, 1, 1}));
    d.k_is.mask = std::make_shared<MaskSpec>(tile_gates(base_mask_, 4));
    d.b_is = Parameter(name + "." + dn + ".is.bias", Tensor({4 * h}));
    d.k_ss = Parameter(name + "." + dn + ".ss.kernel", Tensor({4 * h, h, 2}));
    d.h0 = Parameter(name + "." + dn + ".h0", Tensor({h, side, 1}));
    d.c0 = Parameter(name + "." + dn + ".c0", Tensor({h, side, 1}));
    init_uniform(d.k_is, in_features, rng);
    init_uniform(d.k_ss, h * 2, rng);
    apply_mask(d.k_is);
    return d;
  };
  left = make_dir("left");
  right = make_dir("right");
}

Value DiagBiLstm::direction_hidden_skewed(Tape& t, Value skewed_gates,
                                          const Direction& d) const {
  const int n = side_;
  const Tensor& sv = skewed_gates.val();
  if (sv.extent(0) != 4 * h_ || sv.extent(1) != n || sv.extent(2) != 2 * n - 1) {
    throw ConfigError("DiagBiLstm: skewed gate map has wrong shape");
  }
  Value kss = t.param(const_cast<Parameter&>(d.k_ss));
  Value ih = t.param(const_cast<Parameter&>(d.h0));
  Value ic = t.param(const_cast<Parameter&>(d.c0));
  RecurrentState state{ih, ic};

  std::vector<Value> cols;
  cols.reserve(static_cast<std::size_t>(2 * n - 1));
  for (int s = 0; s < 2 * n - 1; ++s) {
    Value gates = add(slice_col(skewed_gates, s), conv1d_cols(state.hidden, kss, 1));
    RecurrentState next = lstm_step(gates, state);

    // Pin rows outside the valid band [max(0, s-n+1), min(n-1, s)] back to
    // the initial state.
    Tensor band({h_, n, 1});
    Tensor off({h_, n, 1});
    const int r0 = std::max(0, s - n + 1), r1 = std::min(n - 1, s);
    for (int i = 0; i < h_; ++i) {
      for (int r = 0; r < n; ++r) {
        const bool in_band = r >= r0 && r <= r1;
        band.at(i, r, 0) = in_band ? 1.0 : 0.0;
        off.at(i, r, 0) = in_band ? 0.0 : 1.0;
      }
    }
    Value bm = t.input(band);
    Value om = t.input(off);
    state.hidden = add(mul(next.hidden, bm), mul(ih, om));
    state.cell = add(mul(next.cell, bm), mul(ic, om));
    cols.push_back(state.hidden);
  }
  return stack_cols(cols);
}

Value DiagBiLstm::direction_output(Tape& t, Value x, const Direction& d, const Value* gate_bias,
                                   bool mirrored) const {
  Value xin = mirrored ? mirror_cols(x) : x;
  Value kis = t.param(const_cast<Parameter&>(d.k_is));
  Value bis = t.param(const_cast<Parameter&>(d.b_is));
  Value is = add_bias(conv2d(xin, kis, Pad2d{}), bis);
  if (gate_bias) is = add(is, mirrored ? mirror_cols(*gate_bias) : *gate_bias);
  Value hidden = unskew(direction_hidden_skewed(t, skew(is), d));
  return mirrored ? mirror_cols(hidden) : hidden;
}

Value DiagBiLstm::forward(Tape& t, Value x, const Value* gate_bias) const {
  const Tensor& xv = x.val();
  if (xv.rank() != 3 || xv.extent(1) != xv.extent(2)) {
    throw ConfigError("DiagBiLstm: input map must be square");
  }
  if (xv.extent(1) != side_) throw ConfigError("DiagBiLstm: input side mismatch");
  Value left_map = direction_output(t, x, left, gate_bias, false);
  Value right_map = direction_output(t, x, right, gate_bias, true);
  return add(left_map, shift_down(right_map));
}

void DiagBiLstm::collect(std::vector<Parameter*>& out) {
  for (Direction* d : {&left, &right}) {
    out.push_back(&d->k_is);
    out.push_back(&d->b_is);
    out.push_back(&d->k_ss);
    out.push_back(&d->h0);
    out.push_back(&d->c0);
  }
}

// ---- residual block ----

Value Block::forward(Tape& t, Value x, const Value* gate_bias) const {
  Value inner{};
  switch (kind) {
    case Inner::masked_conv: {
      Value y = conv->forward(t, relu(x));
      if (gate_bias) y = add(y, *gate_bias);
      inner = relu(y);
      break;
    }
    case Inner::row_lstm:
      inner = row->forward(t, x, gate_bias);
      break;
    case Inner::diag_bilstm:
      inner = diag->forward(t, x, gate_bias);
      break;
  }
  Value up = upsample.forward(t, inner);
  return residual ? add(x, up) : up;
}

void Block::collect(std::vector<Parameter*>& out) {
  switch (kind) {
    case Inner::masked_conv:
      conv->collect(out);
      break;
    case Inner::row_lstm:
      row->collect(out);
      break;
    case Inner::diag_bilstm:
      diag->collect(out);
      break;
  }
  upsample.collect(out);
}

}  // namespace pixelseq
