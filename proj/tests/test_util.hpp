#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "pixelseq/rng.hpp"
#include "pixelseq/tensor.hpp"

namespace testutil {

inline pixelseq::Tensor random_tensor(std::vector<int> shape, pixelseq::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
  pixelseq::Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform_in(lo, hi);
  return t;
}

// Independent quadruple-loop cross-correlation with zero padding; the oracle
// for the conv2d op.
inline pixelseq::Tensor conv2d_bruteforce(const pixelseq::Tensor& x, const pixelseq::Tensor& k,
                                          int pad_top, int pad_left) {
  const int fi = x.extent(0), H = x.extent(1), W = x.extent(2);
  const int fo = k.extent(0), kh = k.extent(2), kw = k.extent(3);
  pixelseq::Tensor out({fo, H, W});  // same-resolution case only
  for (int o = 0; o < fo; ++o) {
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        double acc = 0.0;
        for (int i = 0; i < fi; ++i) {
          for (int dy = 0; dy < kh; ++dy) {
            for (int dx = 0; dx < kw; ++dx) {
              const int yi = y + dy - pad_top;
              const int xi = xx + dx - pad_left;
              if (yi < 0 || yi >= H || xi < 0 || xi >= W) continue;
              acc += k.at(o, i, dy, dx) * x.at(i, yi, xi);
            }
          }
        }
        out.at(o, y, xx) = acc;
      }
    }
  }
  return out;
}

// Central finite difference of a freshly re-evaluated scalar function with
// respect to one storage slot.
inline double fd_slot(const std::function<double()>& f, double* slot, double eps = 1e-5) {
  const double saved = *slot;
  *slot = saved + eps;
  const double up = f();
  *slot = saved - eps;
  const double down = f();
  *slot = saved;
  return (up - down) / (2.0 * eps);
}

inline double max_abs_diff(const pixelseq::Tensor& a, const pixelseq::Tensor& b) {
  double m = 0.0;
  for (int i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace testutil
