#include <cmath>
#include <functional>

#include "doctest.h"
#include "pixelseq/errors.hpp"
#include "pixelseq/layers.hpp"
#include "test_util.hpp"

using namespace pixelseq;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

void zero_param(Parameter& p) { p.value.fill(0.0); }

// Max |change| of every output feature at (y, x) under a central input
// perturbation at (ch, py, px).
double sensitivity(const std::function<Tensor(const Tensor&)>& fwd, const Tensor& x, int ch,
                   int py, int px, int oy, int ox, double eps = 1e-4) {
  Tensor hi = x, lo = x;
  hi.at(ch, py, px) += eps;
  lo.at(ch, py, px) -= eps;
  Tensor a = fwd(hi), b = fwd(lo);
  double m = 0.0;
  for (int f = 0; f < a.extent(0); ++f) {
    m = std::max(m, std::fabs(a.at(f, oy, ox) - b.at(f, oy, ox)) / (2.0 * eps));
  }
  return m;
}

}  // namespace

TEST_CASE("lstm_step: zero gates and zero state give exactly zero hidden output") {
  Tape t;
  Value gates = t.input(Tensor({8, 1, 3}));
  RecurrentState prev{t.input(Tensor({2, 1, 3})), t.input(Tensor({2, 1, 3}))};
  RecurrentState next = lstm_step(gates, prev);
  for (double v : next.hidden.val().data) CHECK(v == 0.0);
  for (double v : next.cell.val().data) CHECK(v == 0.0);
}

TEST_CASE("lstm_step: scalar case matches a hand evaluation") {
  const double po = 0.3, pf = -0.7, pi = 1.1, pg = 0.5;
  const double prev_h = 0.2, prev_c = -0.4;
  Tape t;
  Tensor g({4, 1, 1});
  g[0] = po;
  g[1] = pf;
  g[2] = pi;
  g[3] = pg;
  RecurrentState prev{t.input(Tensor::full({1, 1, 1}, prev_h)),
                      t.input(Tensor::full({1, 1, 1}, prev_c))};
  RecurrentState next = lstm_step(t.input(g), prev);

  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double c = sig(pf) * prev_c + sig(pi) * std::tanh(pg);
  const double h = sig(po) * std::tanh(c);
  CHECK(std::fabs(next.cell.val()[0] - c) < 1e-12);
  CHECK(std::fabs(next.hidden.val()[0] - h) < 1e-12);
}

TEST_CASE("lstm_step: saturated forget gate with closed input gate preserves the cell") {
  Tape t;
  Tensor g({4, 1, 2});
  g.at(1, 0, 0) = 50.0;  // f-gate saturated open
  g.at(1, 0, 1) = 50.0;
  g.at(2, 0, 0) = -50.0;  // i-gate closed
  g.at(2, 0, 1) = -50.0;
  g.at(3, 0, 0) = 0.9;
  Tensor c0({1, 1, 2});
  c0[0] = 0.37;
  c0[1] = -1.25;
  RecurrentState prev{t.input(Tensor({1, 1, 2})), t.input(c0)};
  RecurrentState next = lstm_step(t.input(g), prev);
  CHECK(std::fabs(next.cell.val()[0] - 0.37) < 1e-6);
  CHECK(std::fabs(next.cell.val()[1] + 1.25) < 1e-6);
}

TEST_CASE("lstm_step rejects mismatched state shapes") {
  Tape t;
  Value gates = t.input(Tensor({8, 1, 3}));
  RecurrentState prev{t.input(Tensor({3, 1, 3})), t.input(Tensor({3, 1, 3}))};
  CHECK_THROWS_AS(lstm_step(gates, prev), ConfigError);
}

TEST_CASE("row LSTM: input-to-state precompute is 4h x n x n") {
  Rng rng(31);
  RowLstm layer("row", 4, 3, 5, 1, MaskKind::B, 3, rng);
  Tape t;
  Value is = layer.input_to_state(t, t.input(random_tensor({4, 5, 5}, rng)));
  CHECK(is.val().shape == std::vector<int>{12, 5, 5});
}

TEST_CASE("row LSTM: all-zero parameters and state give an all-zero output map") {
  Rng rng(32);
  RowLstm layer("row", 2, 2, 4, 1, MaskKind::B, 3, rng);
  zero_param(layer.k_is);
  zero_param(layer.b_is);
  zero_param(layer.k_ss);
  Tape t;
  Value y = layer.forward(t, t.input(random_tensor({2, 4, 4}, rng)));
  REQUIRE(y.val().shape == std::vector<int>{2, 4, 4});
  for (double v : y.val().data) CHECK(v == 0.0);
}

TEST_CASE("row LSTM: n=1 equals one directly evaluated step") {
  Rng rng(33);
  RowLstm layer("row", 1, 1, 1, 1, MaskKind::B, 3, rng);
  Tensor x = random_tensor({1, 1, 1}, rng);
  Tape t;
  Value y = layer.forward(t, t.input(x));

  // direct Eq.-style evaluation: all kernels collapse to center taps
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double h0 = layer.h0.value[0], c0 = layer.c0.value[0];
  double gate[4];
  for (int gi = 0; gi < 4; ++gi) {
    gate[gi] = layer.k_is.value.at(gi, 0, 1) * x[0] + layer.b_is.value[gi] +
               layer.k_ss.value.at(gi, 0, 1) * h0;
  }
  const double c = sig(gate[1]) * c0 + sig(gate[2]) * std::tanh(gate[3]);
  const double h = sig(gate[0]) * std::tanh(c);
  CHECK(std::fabs(y.val()[0] - h) < 1e-12);
}

TEST_CASE("row LSTM rejects non-square input") {
  Rng rng(34);
  RowLstm layer("row", 2, 2, 4, 1, MaskKind::B, 3, rng);
  Tape t;
  CHECK_THROWS_AS(layer.forward(t, t.input(Tensor({2, 4, 5}))), ConfigError);
}

TEST_CASE("skew: n=3 offsets each row by its index into a width-5 map") {
  Rng rng(35);
  Tensor x = random_tensor({1, 3, 3}, rng);
  Tape t;
  Value s = skew(t.input(x));
  REQUIRE(s.val().shape == std::vector<int>{1, 3, 5});
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 5; ++c) {
      const double v = s.val().at(0, r, c);
      if (c >= r && c - r < 3) {
        CHECK(v == x.at(0, r, c - r));
      } else {
        CHECK(v == 0.0);
      }
    }
  }
}

TEST_CASE("skew/unskew: bit-exact round trip for n in 1..8, f in 1..4") {
  Rng rng(36);
  for (int n = 1; n <= 8; ++n) {
    for (int f = 1; f <= 4; ++f) {
      Tensor x = random_tensor({f, n, n}, rng);
      Tape t;
      Value y = unskew(skew(t.input(x)));
      REQUIRE(y.val().shape == x.shape);
      for (int i = 0; i < x.numel(); ++i) CHECK(y.val()[i] == x[i]);
    }
  }
}

TEST_CASE("skew: n=1 is a pass-through") {
  Tape t;
  Tensor x = Tensor::full({3, 1, 1}, 0.5);
  Value s = skew(t.input(x));
  CHECK(s.val().shape == x.shape);
  CHECK(max_abs_diff(s.val(), x) == 0.0);
}

TEST_CASE("unskew: n=2 picks columns (0,1) of row 0 and (1,2) of row 1") {
  Tensor sk({1, 2, 3});
  sk.at(0, 0, 0) = 1.0;
  sk.at(0, 0, 1) = 2.0;
  sk.at(0, 0, 2) = -9.0;
  sk.at(0, 1, 0) = -9.0;
  sk.at(0, 1, 1) = 3.0;
  sk.at(0, 1, 2) = 4.0;
  Tape t;
  Value y = unskew(t.input(sk));
  CHECK(y.val().at(0, 0, 0) == 1.0);
  CHECK(y.val().at(0, 0, 1) == 2.0);
  CHECK(y.val().at(0, 1, 0) == 3.0);
  CHECK(y.val().at(0, 1, 1) == 4.0);
}

TEST_CASE("unskew rejects widths other than 2n-1") {
  Tape t;
  CHECK_THROWS_AS(unskew(t.input(Tensor({1, 3, 4}))), ConfigError);
}

TEST_CASE("diagonal BiLSTM: output shape and square-input requirement") {
  Rng rng(37);
  DiagBiLstm layer("diag", 2, 3, 4, 1, MaskKind::B, rng);
  Tape t;
  Value y = layer.forward(t, t.input(random_tensor({2, 4, 4}, rng)));
  CHECK(y.val().shape == std::vector<int>{3, 4, 4});
  CHECK_THROWS_AS(layer.forward(t, t.input(Tensor({2, 4, 5}))), ConfigError);
}

TEST_CASE("diagonal BiLSTM: top row gets zero contribution from the right direction") {
  Rng rng(38);
  DiagBiLstm layer("diag", 2, 2, 4, 1, MaskKind::B, rng);
  // silence the left direction so only the shifted right map remains
  zero_param(layer.left.k_is);
  zero_param(layer.left.b_is);
  zero_param(layer.left.k_ss);
  zero_param(layer.left.h0);
  zero_param(layer.left.c0);
  Tape t;
  Value y = layer.forward(t, t.input(random_tensor({2, 4, 4}, rng)));
  bool some_nonzero = false;
  for (int f = 0; f < 2; ++f) {
    for (int c = 0; c < 4; ++c) CHECK(y.val().at(f, 0, c) == 0.0);
    for (int r = 1; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) some_nonzero |= y.val().at(f, r, c) != 0.0;
    }
  }
  CHECK(some_nonzero);
}

TEST_CASE("diagonal BiLSTM single layer (mask A) sees exactly the preceding raster set") {
  Rng rng(39);
  const int n = 4;
  DiagBiLstm layer("diag", 1, 2, n, 1, MaskKind::A, rng);
  // boost weights so long dependency chains stay well above the threshold
  for (Parameter* p : {&layer.left.k_ss, &layer.right.k_ss}) {
    for (double& v : p->value.data) v *= 3.0;
  }
  Tensor x = random_tensor({1, n, n}, rng);
  auto fwd = [&](const Tensor& in) {
    Tape t;
    return layer.forward(t, t.input(in)).val();
  };
  for (int oy = 0; oy < n; ++oy) {
    for (int ox = 0; ox < n; ++ox) {
      for (int py = 0; py < n; ++py) {
        for (int px = 0; px < n; ++px) {
          const double s = sensitivity(fwd, x, 0, py, px, oy, ox);
          const bool preceding = py < oy || (py == oy && px < ox);
          if (preceding) {
            CHECK(s > 1e-9);
          } else {
            CHECK(s <= 1e-9);
          }
        }
      }
    }
  }
}

TEST_CASE("diagonal BiLSTM: off-band garbage in the skewed gate map cannot reach valid outputs") {
  Rng rng(40);
  const int n = 3;
  DiagBiLstm layer("diag", 2, 2, n, 1, MaskKind::B, rng);
  Tensor x = random_tensor({2, n, n}, rng);

  auto run_direction = [&](const Tensor& skewed_gates) {
    Tape t;
    return unskew(layer.direction_hidden_skewed(t, t.input(skewed_gates), layer.left)).val();
  };

  // reference skewed gate map: input-to-state then skew
  Tensor skewed;
  {
    Tape t;
    Value is = add_bias(conv2d(t.input(x), t.param(layer.left.k_is), Pad2d{}),
                        t.param(layer.left.b_is));
    skewed = skew(is).val();
  }
  Tensor reference = run_direction(skewed);

  Tensor garbled = skewed;
  for (int f = 0; f < garbled.extent(0); ++f) {
    for (int r = 0; r < n; ++r) {
      for (int s = 0; s < 2 * n - 1; ++s) {
        if (s - r < 0 || s - r >= n) garbled.at(f, r, s) = rng.uniform_in(-50.0, 50.0);
      }
    }
  }
  Tensor poked = run_direction(garbled);
  for (int i = 0; i < reference.numel(); ++i) CHECK(poked[i] == reference[i]);
}

TEST_CASE("residual block: zeroed upsample passes the input through bit-exactly") {
  Rng rng(41);
  Block b;
  b.kind = Block::Inner::masked_conv;
  b.residual = true;
  b.conv = std::make_unique<Conv2dLayer>(
      make_masked_conv("b.conv", MaskKind::B, 3, 3, 4, 2, 1, rng));
  b.upsample = make_masked_conv("b.up", MaskKind::B, 1, 1, 2, 4, 1, rng);
  zero_param(b.upsample.kernel);
  zero_param(b.upsample.bias);

  Tensor x = random_tensor({4, 5, 5}, rng);
  Tape t;
  Value y = b.forward(t, t.input(x));
  REQUIRE(y.val().shape == x.shape);  // 2h features in and out
  for (int i = 0; i < x.numel(); ++i) CHECK(y.val()[i] == x[i]);
}

TEST_CASE("residual block: identity shows up on the Jacobian diagonal with a zeroed inner path") {
  Rng rng(42);
  Block b;
  b.kind = Block::Inner::masked_conv;
  b.residual = true;
  b.conv = std::make_unique<Conv2dLayer>(
      make_masked_conv("b.conv", MaskKind::B, 3, 3, 2, 1, 1, rng));
  b.upsample = make_masked_conv("b.up", MaskKind::B, 1, 1, 1, 2, 1, rng);
  zero_param(b.conv->kernel);
  zero_param(b.conv->bias);

  Tensor x = random_tensor({2, 3, 3}, rng);
  auto fwd = [&](const Tensor& in) {
    Tape t;
    return b.forward(t, t.input(in)).val();
  };
  for (int f = 0; f < 2; ++f) {
    Tensor hi = x, lo = x;
    hi.at(f, 1, 1) += 1e-4;
    lo.at(f, 1, 1) -= 1e-4;
    const double d = (fwd(hi).at(f, 1, 1) - fwd(lo).at(f, 1, 1)) / 2e-4;
    CHECK(d >= 1.0 - 1e-9);
  }
}

TEST_CASE("masked conv, first-layer mask A: output (0,0) is blind to the whole image") {
  Rng rng(43);
  Conv2dLayer layer = make_masked_conv("first", MaskKind::A, 3, 3, 1, 2, 1, rng);
  Tensor x = random_tensor({1, 3, 3}, rng);
  auto fwd = [&](const Tensor& in) {
    Tape t;
    return layer.forward(t, t.input(in)).val();
  };
  for (int py = 0; py < 3; ++py) {
    for (int px = 0; px < 3; ++px) {
      CHECK(sensitivity(fwd, x, 0, py, px, 0, 0) == 0.0);
    }
  }
}

TEST_CASE("masked conv equals plain conv2d after apply_mask") {
  Rng rng(44);
  Conv2dLayer layer = make_masked_conv("mc", MaskKind::B, 3, 3, 3, 6, 3, rng);
  Tensor x = random_tensor({3, 4, 4}, rng);
  Tape t;
  Value a = layer.forward(t, t.input(x));
  Value b = add_bias(conv2d(t.input(x), t.input(layer.kernel.value), same_pad(3, 3)),
                     t.input(layer.bias.value));
  CHECK(max_abs_diff(a.val(), b.val()) == 0.0);
}

TEST_CASE("masked conv, mask B center-only kernel: per-pixel linear map over allowed groups") {
  Rng rng(45);
  Conv2dLayer layer = make_masked_conv("mc", MaskKind::B, 1, 1, 3, 3, 3, rng);
  zero_param(layer.bias);
  Tensor x = random_tensor({3, 2, 2}, rng);
  Tape t;
  Value y = layer.forward(t, t.input(x));
  for (int go = 0; go < 3; ++go) {
    for (int p = 0; p < 4; ++p) {
      double expect = 0.0;
      for (int gi = 0; gi <= go; ++gi) {
        expect += layer.kernel.value.at(go, gi, 0, 0) * x[gi * 4 + p];
      }
      CHECK(y.val()[go * 4 + p] == doctest::Approx(expect).epsilon(1e-14));
    }
  }
}
