#include "pixelseq/tape.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "pixelseq/errors.hpp"

namespace pixelseq {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw ConfigError(msg);
}

void require_same_tape(Value a, Value b) {
  require(a.tape != nullptr && a.tape == b.tape, "operands belong to different recordings");
}

void require_finite(const Tape& t, const Tensor& x, const char* op) {
  if (t.check_finite && !x.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite input");
  }
}

}  // namespace

const Tensor& Value::val() const { return tape->value(*this); }

Value Tape::input(Tensor v) { return emit(std::move(v), nullptr); }

Value Tape::param(Parameter& p) {
  Value v = emit(p.value, nullptr);
  bound_.emplace_back(v.id, &p);
  return v;
}

Value Tape::emit(Tensor out, BackFn back) {
  Node n;
  n.value = std::move(out);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(Value v) { return grad_buffer(v.id); }

void Tape::backward(Value loss) {
  require(loss.tape == this, "backward: loss from another recording");
  if (ran_backward_) throw ConfigError("backward: recording already differentiated");
  if (value(loss).numel() != 1) throw ConfigError("backward: loss must be scalar");
  ran_backward_ = true;

  grad_buffer(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.has_grad && n.back) n.back(*this, id);
  }
  for (auto& [id, p] : bound_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) continue;  // unreachable parameter: gradient stays zero
    for (int i = 0; i < n.grad.numel(); ++i) p->grad[i] += n.grad[i];
  }
}

Pad2d same_pad(int kh, int kw) {
  require(kh % 2 == 1 && kw % 2 == 1, "same_pad: kernel extents must be odd");
  return Pad2d{(kh - 1) / 2, (kh - 1) / 2, (kw - 1) / 2, (kw - 1) / 2};
}

// ---- elementwise ----

Value add(Value a, Value b) {
  require_same_tape(a, b);
  const Tensor& va = a.val();
  const Tensor& vb = b.val();
  require(va.same_shape(vb), "add: shape mismatch");
  Tensor out = va;
  for (int i = 0; i < out.numel(); ++i) out[i] += vb[i];
  const int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), [pa, pb](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(pa);
    Tensor& gb = t.grad_buffer(pb);
    for (int i = 0; i < g.numel(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Value sub(Value a, Value b) {
  require_same_tape(a, b);
  const Tensor& va = a.val();
  const Tensor& vb = b.val();
  require(va.same_shape(vb), "sub: shape mismatch");
  Tensor out = va;
  for (int i = 0; i < out.numel(); ++i) out[i] -= vb[i];
  const int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), [pa, pb](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(pa);
    Tensor& gb = t.grad_buffer(pb);
    for (int i = 0; i < g.numel(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

Value mul(Value a, Value b) {
  require_same_tape(a, b);
  const Tensor& va = a.val();
  const Tensor& vb = b.val();
  require(va.same_shape(vb), "mul: shape mismatch");
  Tensor out = va;
  for (int i = 0; i < out.numel(); ++i) out[i] *= vb[i];
  const int pa = a.id, pb = b.id;
  return a.tape->emit(std::move(out), [pa, pb](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& va = t.node_value(pa);
    const Tensor& vb = t.node_value(pb);
    Tensor& ga = t.grad_buffer(pa);
    Tensor& gb = t.grad_buffer(pb);
    for (int i = 0; i < g.numel(); ++i) {
      ga[i] += g[i] * vb[i];
      gb[i] += g[i] * va[i];
    }
  });
}

Value scale(Value a, double c) {
  Tensor out = a.val();
  for (double& v : out.data) v *= c;
  const int pa = a.id;
  return a.tape->emit(std::move(out), [pa, c](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(pa);
    for (int i = 0; i < g.numel(); ++i) ga[i] += c * g[i];
  });
}

Value sigmoid(Value a) {
  Tensor out = a.val();
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  const int pa = a.id;
  return a.tape->emit(std::move(out), [pa](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& s = t.node_value(self);
    Tensor& ga = t.grad_buffer(pa);
    for (int i = 0; i < g.numel(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
  });
}

Value tanh(Value a) {
  Tensor out = a.val();
  for (double& v : out.data) v = std::tanh(v);
  const int pa = a.id;
  return a.tape->emit(std::move(out), [pa](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& y = t.node_value(self);
    Tensor& ga = t.grad_buffer(pa);
    for (int i = 0; i < g.numel(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Value relu(Value a) {
  Tensor out = a.val();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  const int pa = a.id;
  return a.tape->emit(std::move(out), [pa](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& x = t.node_value(pa);
    Tensor& ga = t.grad_buffer(pa);
    for (int i = 0; i < g.numel(); ++i) {
      if (x[i] > 0.0) ga[i] += g[i];
    }
  });
}

// ---- convolutions ----

Value conv2d(Value input, Value kernel, Pad2d pad) {
  require_same_tape(input, kernel);
  const Tensor& x = input.val();
  const Tensor& k = kernel.val();
  require(x.rank() == 3, "conv2d: input must be features x H x W");
  require(k.rank() == 4, "conv2d: kernel must be f_out x f_in x kh x kw");
  if (k.extent(1) != x.extent(0)) throw ConfigError("conv2d: feature count mismatch");
  require_finite(*input.tape, x, "conv2d");
  require_finite(*input.tape, k, "conv2d");

  const int fi = x.extent(0), H = x.extent(1), W = x.extent(2);
  const int fo = k.extent(0), kh = k.extent(2), kw = k.extent(3);
  const int Ho = H + pad.top + pad.bottom - kh + 1;
  const int Wo = W + pad.left + pad.right - kw + 1;
  require(Ho >= 1 && Wo >= 1, "conv2d: kernel larger than padded input");

  Tensor out({fo, Ho, Wo});
  for (int o = 0; o < fo; ++o) {
    for (int i = 0; i < fi; ++i) {
      for (int dy = 0; dy < kh; ++dy) {
        for (int dx = 0; dx < kw; ++dx) {
          const double w = k.at(o, i, dy, dx);
          if (w == 0.0) continue;
          const int y0 = std::max(0, pad.top - dy), y1 = std::min(Ho, H + pad.top - dy);
          const int x0 = std::max(0, pad.left - dx), x1 = std::min(Wo, W + pad.left - dx);
          for (int y = y0; y < y1; ++y) {
            const double* xr = &x.data[static_cast<std::size_t>((i * H + y + dy - pad.top) * W)];
            double* orow = &out.data[static_cast<std::size_t>((o * Ho + y) * Wo)];
            const int shift = dx - pad.left;
            for (int xx = x0; xx < x1; ++xx) orow[xx] += w * xr[xx + shift];
          }
        }
      }
    }
  }

  const int px = input.id, pk = kernel.id;
  return input.tape->emit(std::move(out), [px, pk, pad](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& x = t.node_value(px);
    const Tensor& k = t.node_value(pk);
    Tensor& gx = t.grad_buffer(px);
    Tensor& gk = t.grad_buffer(pk);
    const int fi = x.extent(0), H = x.extent(1), W = x.extent(2);
    const int fo = k.extent(0), kh = k.extent(2), kw = k.extent(3);
    const int Ho = g.extent(1), Wo = g.extent(2);
    for (int o = 0; o < fo; ++o) {
      for (int i = 0; i < fi; ++i) {
        for (int dy = 0; dy < kh; ++dy) {
          for (int dx = 0; dx < kw; ++dx) {
            const double w = k.at(o, i, dy, dx);
            const int y0 = std::max(0, pad.top - dy), y1 = std::min(Ho, H + pad.top - dy);
            const int x0 = std::max(0, pad.left - dx), x1 = std::min(Wo, W + pad.left - dx);
            double wg = 0.0;
            for (int y = y0; y < y1; ++y) {
              const std::size_t xoff = static_cast<std::size_t>((i * H + y + dy - pad.top) * W);
              const double* xr = &x.data[xoff];
              double* gxr = &gx.data[xoff];
              const double* gr = &g.data[static_cast<std::size_t>((o * Ho + y) * Wo)];
              const int shift = dx - pad.left;
              if (w == 0.0) {
                for (int xx = x0; xx < x1; ++xx) wg += xr[xx + shift] * gr[xx];
              } else {
                for (int xx = x0; xx < x1; ++xx) {
                  wg += xr[xx + shift] * gr[xx];
                  gxr[xx + shift] += w * gr[xx];
                }
              }
            }
            gk.at(o, i, dy, dx) += wg;
          }
        }
      }
    }
  });
}

Value conv1d_rows(Value input, Value kernel) {
  require_same_tape(input, kernel);
  const Tensor& x = input.val();
  const Tensor& k = kernel.val();
  require(x.rank() == 3, "conv1d_rows: input must be features x H x W");
  require(k.rank() == 3, "conv1d_rows: kernel must be f_out x f_in x k");
  if (k.extent(1) != x.extent(0)) throw ConfigError("conv1d_rows: feature count mismatch");
  if (k.extent(2) % 2 == 0) throw ConfigError("conv1d_rows: kernel width must be odd");
  require_finite(*input.tape, x, "conv1d_rows");
  require_finite(*input.tape, k, "conv1d_rows");

  const int fi = x.extent(0), H = x.extent(1), W = x.extent(2);
  const int fo = k.extent(0), kw = k.extent(2);
  const int c = (kw - 1) / 2;

  Tensor out({fo, H, W});
  for (int o = 0; o < fo; ++o) {
    for (int i = 0; i < fi; ++i) {
      for (int d = 0; d < kw; ++d) {
        const double w = k.at(o, i, d);
        if (w == 0.0) continue;
        const int shift = d - c;
        const int x0 = std::max(0, -shift), x1 = std::min(W, W - shift);
        for (int y = 0; y < H; ++y) {
          const double* xr = &x.data[static_cast<std::size_t>((i * H + y) * W)];
          double* orow = &out.data[static_cast<std::size_t>((o * H + y) * W)];
          for (int xx = x0; xx < x1; ++xx) orow[xx] += w * xr[xx + shift];
        }
      }
    }
  }

  const int px = input.id, pk = kernel.id;
  return input.tape->emit(std::move(out), [px, pk](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& x = t.node_value(px);
    const Tensor& k = t.node_value(pk);
    Tensor& gx = t.grad_buffer(px);
    Tensor& gk = t.grad_buffer(pk);
    const int fi = x.extent(0), H = x.extent(1), W = x.extent(2);
    const int fo = k.extent(0), kw = k.extent(2);
    const int c = (kw - 1) / 2;
    for (int o = 0; o < fo; ++o) {
      for (int i = 0; i < fi; ++i) {
        for (int d = 0; d < kw; ++d) {
          const double w = k.at(o, i, d);
          const int shift = d - c;
          const int x0 = std::max(0, -shift), x1 = std::min(W, W - shift);
          double wg = 0.0;
          for (int y = 0; y < H; ++y) {
            const std::size_t xoff = static_cast<std::size_t>((i * H + y) * W);
            const double* xr = &x.data[xoff];
            double* gxr = &gx.data[xoff];
            const double* gr = &g.data[static_cast<std::size_t>((o * H + y) * W)];
            if (w == 0.0) {
              for (int xx = x0; xx < x1; ++xx) wg += xr[xx + shift] * gr[xx];
            } else {
              for (int xx = x0; xx < x1; ++xx) {
                wg += xr[xx + shift] * gr[xx];
                gxr[xx + shift] += w * gr[xx];
              }
            }
          }
          gk.at(o, i, d) += wg;
        }
      }
    }
  });
}

Value conv1d_cols(Value input, Value kernel, int pad_top) {
  require_same_tape(input, kernel);
  const Tensor& x = input.val();
  const Tensor& k = kernel.val();
  require(x.rank() == 3, "conv1d_cols: input must be features x H x W");
  require(k.rank() == 3, "conv1d_cols: kernel must be f_out x f_in x k");
  if (k.extent(1) != x.extent(0)) throw ConfigError("conv1d_cols: feature count mismatch");
  require_finite(*input.tape, x, "conv1d_cols");
  require_finite(*input.tape, k, "conv1d_cols");

  const int fi = x.extent(0), H = x.extent(1), W = x.extent(2);
  const int fo = k.extent(0), kh = k.extent(2);

  Tensor out({fo, H, W});
  for (int o = 0; o < fo; ++o) {
    for (int i = 0; i < fi; ++i) {
      for (int d = 0; d < kh; ++d) {
        const double w = k.at(o, i, d);
        if (w == 0.0) continue;
        const int shift = d - pad_top;
        const int y0 = std::max(0, -shift), y1 = std::min(H, H - shift);
        for (int y = y0; y < y1; ++y) {
          const double* xr = &x.data[static_cast<std::size_t>((i * H + y + shift) * W)];
          double* orow = &out.data[static_cast<std::size_t>((o * H + y) * W)];
          for (int xx = 0; xx < W; ++xx) orow[xx] += w * xr[xx];
        }
      }
    }
  }

  const int px = input.id, pk = kernel.id;
  return input.tape->emit(std::move(out), [px, pk, pad_top](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& x = t.node_value(px);
    const Tensor& k = t.node_value(pk);
    Tensor& gx = t.grad_buffer(px);
    Tensor& gk = t.grad_buffer(pk);
    const int fi = x.extent(0), H = x.extent(1), W = x.extent(2);
    const int fo = k.extent(0), kh = k.extent(2);
    for (int o = 0; o < fo; ++o) {
      for (int i = 0; i < fi; ++i) {
        for (int d = 0; d < kh; ++d) {
          const double w = k.at(o, i, d);
          const int shift = d - pad_top;
          const int y0 = std::max(0, -shift), y1 = std::min(H, H - shift);
          double wg = 0.0;
          for (int y = y0; y < y1; ++y) {
            const std::size_t xoff = static_cast<std::size_t>((i * H + y + shift) * W);
            const double* xr = &x.data[xoff];
            double* gxr = &gx.data[xoff];
            const double* gr = &g.data[static_cast<std::size_t>((o * H + y) * W)];
            if (w == 0.0) {
              for (int xx = 0; xx < W; ++xx) wg += xr[xx] * gr[xx];
            } else {
              for (int xx = 0; xx < W; ++xx) {
                wg += xr[xx] * gr[xx];
                gxr[xx] += w * gr[xx];
              }
            }
          }
          gk.at(o, i, d) += wg;
        }
      }
    }
  });
}

Value add_bias(Value input, Value bias) {
  require_same_tape(input, bias);
  const Tensor& x = input.val();
  const Tensor& b = bias.val();
  require(x.rank() >= 1, "add_bias: input must have rank >= 1");
  if (b.numel() != x.extent(0)) throw ConfigError("add_bias: bias length mismatch");
  const int f = x.extent(0);
  const int inner = x.numel() / f;
  Tensor out = x;
  for (int i = 0; i < f; ++i) {
    double* row = &out.data[static_cast<std::size_t>(i * inner)];
    for (int j = 0; j < inner; ++j) row[j] += b[i];
  }
  const int px = input.id, pb = bias.id;
  return input.tape->emit(std::move(out), [px, pb, f, inner](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(px);
    Tensor& gb = t.grad_buffer(pb);
    for (int i = 0; i < f; ++i) {
      const double* gr = &g.data[static_cast<std::size_t>(i * inner)];
      double* gxr = &gx.data[static_cast<std::size_t>(i * inner)];
      double s = 0.0;
      for (int j = 0; j < inner; ++j) {
        gxr[j] += gr[j];
        s += gr[j];
      }
      gb[i] += s;
    }
  });
}

// ---- shape ops ----

Value slice_row(Value map, int row) {
  const Tensor& x = map.val();
  require(x.rank() == 3, "slice_row: input must be rank 3");
  require(row >= 0 && row < x.extent(1), "slice_row: row out of range");
  const int f = x.extent(0), H = x.extent(1), W = x.extent(2);
  Tensor out({f, 1, W});
  for (int i = 0; i < f; ++i) {
    for (int xx = 0; xx < W; ++xx) out.at(i, 0, xx) = x.at(i, row, xx);
  }
  const int px = map.id;
  return map.tape->emit(std::move(out), [px, row, f, H, W](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(px);
    (void)H;
    for (int i = 0; i < f; ++i) {
      for (int xx = 0; xx < W; ++xx) gx.at(i, row, xx) += g.at(i, 0, xx);
    }
  });
}

Value slice_col(Value map, int col) {
  const Tensor& x = map.val();
  require(x.rank() == 3, "slice_col: input must be rank 3");
  require(col >= 0 && col < x.extent(2), "slice_col: column out of range");
  const int f = x.extent(0), H = x.extent(1);
  Tensor out({f, H, 1});
  for (int i = 0; i < f; ++i) {
    for (int y = 0; y < H; ++y) out.at(i, y, 0) = x.at(i, y, col);
  }
  const int px = map.id;
  return map.tape->emit(std::move(out), [px, col, f, H](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(px);
    for (int i = 0; i < f; ++i) {
      for (int y = 0; y < H; ++y) gx.at(i, y, col) += g.at(i, y, 0);
    }
  });
}

Value stack_rows(std::span<const Value> rows) {
  require(!rows.empty(), "stack_rows: no rows");
  Tape* tape = rows[0].tape;
  const int f = rows[0].val().extent(0);
  const int W = rows[0].val().extent(2);
  const int H = static_cast<int>(rows.size());
  std::vector<int> parents;
  for (const Value& r : rows) {
    require(r.tape == tape, "stack_rows: mixed recordings");
    const Tensor& v = r.val();
    require(v.rank() == 3 && v.extent(0) == f && v.extent(1) == 1 && v.extent(2) == W,
            "stack_rows: row shape mismatch");
    parents.push_back(r.id);
  }
  Tensor out({f, H, W});
  for (int y = 0; y < H; ++y) {
    const Tensor& v = tape->node_value(parents[static_cast<std::size_t>(y)]);
    for (int i = 0; i < f; ++i) {
      for (int xx = 0; xx < W; ++xx) out.at(i, y, xx) = v.at(i, 0, xx);
    }
  }
  return tape->emit(std::move(out), [parents, f, H, W](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    for (int y = 0; y < H; ++y) {
      Tensor& gr = t.grad_buffer(parents[static_cast<std::size_t>(y)]);
      for (int i = 0; i < f; ++i) {
        for (int xx = 0; xx < W; ++xx) gr.at(i, 0, xx) += g.at(i, y, xx);
      }
    }
  });
}

Value stack_cols(std::span<const Value> cols) {
  require(!cols.empty(), "stack_cols: no columns");
  Tape* tape = cols[0].tape;
  const int f = cols[0].val().extent(0);
  const int H = cols[0].val().extent(1);
  const int W = static_cast<int>(cols.size());
  std::vector<int> parents;
  for (const Value& c : cols) {
    require(c.tape == tape, "stack_cols: mixed recordings");
    const Tensor& v = c.val();
    require(v.rank() == 3 && v.extent(0) == f && v.extent(1) == H && v.extent(2) == 1,
            "stack_cols: column shape mismatch");
    parents.push_back(c.id);
  }
  Tensor out({f, H, W});
  for (int xx = 0; xx < W; ++xx) {
    const Tensor& v = tape->node_value(parents[static_cast<std::size_t>(xx)]);
    for (int i = 0; i < f; ++i) {
      for (int y = 0; y < H; ++y) out.at(i, y, xx) = v.at(i, y, 0);
    }
  }
  return tape->emit(std::move(out), [parents, f, H, W](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    for (int xx = 0; xx < W; ++xx) {
      Tensor& gc = t.grad_buffer(parents[static_cast<std::size_t>(xx)]);
      for (int i = 0; i < f; ++i) {
        for (int y = 0; y < H; ++y) gc.at(i, y, 0) += g.at(i, y, xx);
      }
    }
  });
}

Value slice_features(Value x, int lo, int hi) {
  const Tensor& v = x.val();
  require(v.rank() >= 1, "slice_features: rank must be >= 1");
  require(0 <= lo && lo < hi && hi <= v.extent(0), "slice_features: bad feature range");
  const int inner = v.numel() / v.extent(0);
  std::vector<int> shape = v.shape;
  shape[0] = hi - lo;
  Tensor out(shape);
  for (int i = 0; i < out.numel(); ++i) out[i] = v[lo * inner + i];
  const int px = x.id;
  return x.tape->emit(std::move(out), [px, lo, inner](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(px);
    for (int i = 0; i < g.numel(); ++i) gx[lo * inner + i] += g[i];
  });
}

Value mirror_cols(Value map) {
  const Tensor& x = map.val();
  require(x.rank() == 3, "mirror_cols: input must be rank 3");
  const int f = x.extent(0), H = x.extent(1), W = x.extent(2);
  Tensor out({f, H, W});
  for (int i = 0; i < f; ++i) {
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) out.at(i, y, xx) = x.at(i, y, W - 1 - xx);
    }
  }
  const int px = map.id;
  return map.tape->emit(std::move(out), [px, f, H, W](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(px);
    for (int i = 0; i < f; ++i) {
      for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) gx.at(i, y, W - 1 - xx) += g.at(i, y, xx);
      }
    }
  });
}

Value shift_down(Value map) {
  const Tensor& x = map.val();
  require(x.rank() == 3, "shift_down: input must be rank 3");
  const int f = x.extent(0), H = x.extent(1), W = x.extent(2);
  Tensor out({f, H, W});
  for (int i = 0; i < f; ++i) {
    for (int y = 1; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) out.at(i, y, xx) = x.at(i, y - 1, xx);
    }
  }
  const int px = map.id;
  return map.tape->emit(std::move(out), [px, f, H, W](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(px);
    for (int i = 0; i < f; ++i) {
      for (int y = 1; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) gx.at(i, y - 1, xx) += g.at(i, y, xx);
      }
    }
  });
}

Value upsample_nearest(Value map, int factor) {
  const Tensor& x = map.val();
  require(x.rank() == 3, "upsample_nearest: input must be rank 3");
  require(factor >= 1, "upsample_nearest: factor must be >= 1");
  const int f = x.extent(0), H = x.extent(1), W = x.extent(2);
  Tensor out({f, H * factor, W * factor});
  for (int i = 0; i < f; ++i) {
    for (int y = 0; y < H * factor; ++y) {
      for (int xx = 0; xx < W * factor; ++xx) {
        out.at(i, y, xx) = x.at(i, y / factor, xx / factor);
      }
    }
  }
  const int px = map.id;
  return map.tape->emit(std::move(out), [px, factor, f, H, W](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(px);
    for (int i = 0; i < f; ++i) {
      for (int y = 0; y < H * factor; ++y) {
        for (int xx = 0; xx < W * factor; ++xx) {
          gx.at(i, y / factor, xx / factor) += g.at(i, y, xx);
        }
      }
    }
  });
}

Value skew(Value map) {
  const Tensor& x = map.val();
  require(x.rank() == 3, "skew: input must be rank 3");
  require(x.extent(1) == x.extent(2), "skew: input must be square");
  const int f = x.extent(0), n = x.extent(1);
  Tensor out({f, n, 2 * n - 1});
  for (int i = 0; i < f; ++i) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) out.at(i, r, r + c) = x.at(i, r, c);
    }
  }
  const int px = map.id;
  return map.tape->emit(std::move(out), [px, f, n](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(px);
    for (int i = 0; i < f; ++i) {
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) gx.at(i, r, c) += g.at(i, r, r + c);
      }
    }
  });
}

Value unskew(Value map) {
  const Tensor& x = map.val();
  require(x.rank() == 3, "unskew: input must be rank 3");
  const int f = x.extent(0), n = x.extent(1);
  if (x.extent(2) != 2 * n - 1) {
    throw ConfigError("unskew: width must be 2n-1");
  }
  Tensor out({f, n, n});
  for (int i = 0; i < f; ++i) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) out.at(i, r, c) = x.at(i, r, r + c);
    }
  }
  const int px = map.id;
  return map.tape->emit(std::move(out), [px, f, n](Tape& t, int self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& gx = t.grad_buffer(px);
    for (int i = 0; i < f; ++i) {
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) gx.at(i, r, r + c) += g.at(i, r, c);
      }
    }
  });
}

// ---- reductions / losses ----

Value sum_all(Value x) {
  const Tensor& v = x.val();
  double s = 0.0;
  for (double d : v.data) s += d;
  const int px = x.id;
  return x.tape->emit(Tensor::scalar(s), [px](Tape& t, int self) {
    const double g = t.grad_buffer(self)[0];
    Tensor& gx = t.grad_buffer(px);
    for (int i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
}

Value softmax_nll(Value logits, const std::vector<int>& targets, int groups, int classes) {
  const Tensor& l = logits.val();
  require(l.rank() == 3, "softmax_nll: logits must be rank 3");
  if (l.extent(0) != groups * classes) {
    throw ConfigError("softmax_nll: logit feature count != groups*classes");
  }
  const int H = l.extent(1), W = l.extent(2);
  if (static_cast<int>(targets.size()) != groups * H * W) {
    throw ConfigError("softmax_nll: target count mismatch");
  }
  for (int v : targets) {
    if (v < 0 || v >= classes) throw DataError("softmax_nll: target value out of range");
  }

  double total = 0.0;
  for (int g = 0; g < groups; ++g) {
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        double m = l.at(g * classes, y, xx);
        for (int c = 1; c < classes; ++c) m = std::max(m, l.at(g * classes + c, y, xx));
        double z = 0.0;
        for (int c = 0; c < classes; ++c) z += std::exp(l.at(g * classes + c, y, xx) - m);
        const int tgt = targets[static_cast<std::size_t>((g * H + y) * W + xx)];
        total += std::log(z) - (l.at(g * classes + tgt, y, xx) - m);
      }
    }
  }

  const int pl = logits.id;
  const std::vector<int> tg = targets;
  return logits.tape->emit(
      Tensor::scalar(total), [pl, tg, groups, classes, H, W](Tape& t, int self) {
        const double gout = t.grad_buffer(self)[0];
        const Tensor& l = t.node_value(pl);
        Tensor& gl = t.grad_buffer(pl);
        for (int g = 0; g < groups; ++g) {
          for (int y = 0; y < H; ++y) {
            for (int xx = 0; xx < W; ++xx) {
              double m = l.at(g * classes, y, xx);
              for (int c = 1; c < classes; ++c) m = std::max(m, l.at(g * classes + c, y, xx));
              double z = 0.0;
              for (int c = 0; c < classes; ++c) z += std::exp(l.at(g * classes + c, y, xx) - m);
              const int tgt = tg[static_cast<std::size_t>((g * H + y) * W + xx)];
              for (int c = 0; c < classes; ++c) {
                const double p = std::exp(l.at(g * classes + c, y, xx) - m) / z;
                gl.at(g * classes + c, y, xx) += gout * (p - (c == tgt ? 1.0 : 0.0));
              }
            }
          }
        }
      });
}

Value bernoulli_nll(Value logits, const std::vector<int>& targets) {
  const Tensor& l = logits.val();
  require(l.rank() == 3, "bernoulli_nll: logits must be rank 3");
  require(l.extent(0) == 1, "bernoulli_nll: logits must have one feature");
  const int H = l.extent(1), W = l.extent(2);
  if (static_cast<int>(targets.size()) != H * W) {
    throw ConfigError("bernoulli_nll: target count mismatch");
  }
  for (int v : targets) {
    if (v != 0 && v != 1) throw DataError("bernoulli_nll: target value not in {0,1}");
  }

  auto softplus = [](double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); };
  double total = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int xx = 0; xx < W; ++xx) {
      const double z = l.at(0, y, xx);
      const int tgt = targets[static_cast<std::size_t>(y * W + xx)];
      // -log p(t) = softplus(-z) + (1-t) * z
      total += softplus(-z) + (tgt == 0 ? z : 0.0);
    }
  }

  const int pl = logits.id;
  const std::vector<int> tg = targets;
  return logits.tape->emit(Tensor::scalar(total), [pl, tg, H, W](Tape& t, int self) {
    const double gout = t.grad_buffer(self)[0];
    const Tensor& l = t.node_value(pl);
    Tensor& gl = t.grad_buffer(pl);
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        const double s = 1.0 / (1.0 + std::exp(-l.at(0, y, xx)));
        const int tgt = tg[static_cast<std::size_t>(y * W + xx)];
        gl.at(0, y, xx) += gout * (s - tgt);
      }
    }
  });
}

}  // namespace pixelseq
