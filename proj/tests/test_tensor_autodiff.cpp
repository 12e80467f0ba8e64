#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "pixelseq/checkpoint.hpp"
#include "pixelseq/errors.hpp"
#include "pixelseq/tape.hpp"
#include "test_util.hpp"

using namespace pixelseq;
using testutil::conv2d_bruteforce;
using testutil::fd_slot;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  Rng rng(1);
  Tensor x = random_tensor({3, 5, 5}, rng);
  Tensor k({3, 3, 1, 1});
  for (int i = 0; i < 3; ++i) k.at(i, i, 0, 0) = 1.0;
  Tape t;
  Value y = conv2d(t.input(x), t.input(k), same_pad(1, 1));
  CHECK(y.val().shape == x.shape);
  CHECK(max_abs_diff(y.val(), x) == 0.0);
}

TEST_CASE("conv2d: all-zero kernel gives an all-zero map of the right shape") {
  Rng rng(2);
  Tensor x = random_tensor({2, 4, 6}, rng);
  Tensor k({5, 2, 3, 3});
  Tape t;
  Value y = conv2d(t.input(x), t.input(k), same_pad(3, 3));
  REQUIRE(y.val().shape == std::vector<int>{5, 4, 6});
  for (double v : y.val().data) CHECK(v == 0.0);
}

TEST_CASE("conv2d matches the quadruple-loop oracle") {
  Rng rng(3);
  Tensor x = random_tensor({2, 4, 4}, rng);
  Tensor k = random_tensor({3, 2, 3, 3}, rng);
  Tape t;
  Value y = conv2d(t.input(x), t.input(k), same_pad(3, 3));
  Tensor ref = conv2d_bruteforce(x, k, 1, 1);
  CHECK(max_abs_diff(y.val(), ref) < 1e-12);
}

TEST_CASE("conv2d is linear in each argument") {
  Rng rng(4);
  Tensor x = random_tensor({2, 4, 4}, rng);
  Tensor yv = random_tensor({2, 4, 4}, rng);
  Tensor k = random_tensor({3, 2, 3, 3}, rng);
  const double a = 1.7, b = -0.4;

  Tensor mix({2, 4, 4});
  for (int i = 0; i < mix.numel(); ++i) mix[i] = a * x[i] + b * yv[i];

  Tape t;
  Value kk = t.input(k);
  Value lhs = conv2d(t.input(mix), kk, same_pad(3, 3));
  Value rhs = add(scale(conv2d(t.input(x), kk, same_pad(3, 3)), a),
                  scale(conv2d(t.input(yv), kk, same_pad(3, 3)), b));
  CHECK(max_abs_diff(lhs.val(), rhs.val()) < 1e-12);
}

TEST_CASE("conv2d rejects mismatched features and non-finite input") {
  Tape t;
  Value x = t.input(Tensor({2, 4, 4}));
  Value k = t.input(Tensor({3, 5, 3, 3}));
  CHECK_THROWS_AS(conv2d(x, k, same_pad(3, 3)), ConfigError);

  Tensor bad({1, 2, 2});
  bad[3] = std::numeric_limits<double>::quiet_NaN();
  Value xb = t.input(bad);
  Value kk = t.input(Tensor::full({1, 1, 1, 1}, 1.0));
  CHECK_THROWS_AS(conv2d(xb, kk, same_pad(1, 1)), NumericError);
}

TEST_CASE("conv1d_rows: k=1 identity kernel leaves the input unchanged") {
  Rng rng(5);
  Tensor x = random_tensor({2, 3, 7}, rng);
  Tensor k({2, 2, 1});
  k.at(0, 0, 0) = 1.0;
  k.at(1, 1, 0) = 1.0;
  Tape t;
  Value y = conv1d_rows(t.input(x), t.input(k));
  CHECK(max_abs_diff(y.val(), x) == 0.0);
}

TEST_CASE("conv1d_rows: width-1 input only sees the center tap") {
  Rng rng(6);
  Tensor x = random_tensor({1, 4, 1}, rng);
  Tensor k = random_tensor({1, 1, 3}, rng);
  Tape t;
  Value y = conv1d_rows(t.input(x), t.input(k));
  for (int r = 0; r < 4; ++r) {
    CHECK(y.val().at(0, r, 0) == doctest::Approx(k.at(0, 0, 1) * x.at(0, r, 0)).epsilon(1e-14));
  }
}

TEST_CASE("conv1d_rows reduces to conv2d with a 1xk kernel") {
  Rng rng(7);
  Tensor x = random_tensor({3, 5, 6}, rng);
  Tensor k1 = random_tensor({4, 3, 5}, rng);
  Tensor k2({4, 3, 1, 5});
  k2.data = k1.data;
  Tape t;
  Value a = conv1d_rows(t.input(x), t.input(k1));
  Value b = conv2d(t.input(x), t.input(k2), same_pad(1, 5));
  CHECK(max_abs_diff(a.val(), b.val()) == 0.0);
}

TEST_CASE("conv1d_rows rejects even kernel widths") {
  Tape t;
  Value x = t.input(Tensor({1, 2, 4}));
  Value k = t.input(Tensor({1, 1, 2}));
  CHECK_THROWS_AS(conv1d_rows(x, k), ConfigError);
}

TEST_CASE("pointwise basics") {
  Tape t;
  Value z = t.input(Tensor({2, 2}));
  CHECK(sigmoid(z).val()[0] == 0.5);
  CHECK(sigmoid(z).val()[3] == 0.5);
  CHECK(pixelseq::tanh(z).val()[2] == 0.0);

  Rng rng(8);
  Value x = t.input(random_tensor({2, 2}, rng));
  Value zero = t.input(Tensor({2, 2}));
  for (double v : mul(x, zero).val().data) CHECK(v == 0.0);

  Value other = t.input(Tensor({3}));
  CHECK_THROWS_AS(add(x, other), ConfigError);
}

TEST_CASE("backward: sum gives all-ones gradient") {
  Parameter p("p", Tensor::full({4}, 2.0));
  Tape t;
  t.backward(sum_all(t.param(p)));
  for (int i = 0; i < 4; ++i) CHECK(p.grad[i] == 1.0);
}

TEST_CASE("backward: d/dx sum(x*x) = 2x") {
  Parameter p("p", Tensor({3}));
  p.value[0] = 1.0;
  p.value[1] = 2.0;
  p.value[2] = 3.0;
  Tape t;
  Value x = t.param(p);
  t.backward(sum_all(mul(x, x)));
  CHECK(p.grad[0] == doctest::Approx(2.0));
  CHECK(p.grad[1] == doctest::Approx(4.0));
  CHECK(p.grad[2] == doctest::Approx(6.0));
}

TEST_CASE("backward: non-scalar loss and double backward are errors") {
  Parameter p("p", Tensor::full({3}, 1.0));
  Tape t;
  Value x = t.param(p);
  CHECK_THROWS_AS(t.backward(x), ConfigError);
  Value s = sum_all(x);
  t.backward(s);
  CHECK_THROWS_AS(t.backward(s), ConfigError);
}

TEST_CASE("backward: unreachable parameters keep a zero gradient") {
  Parameter used("used", Tensor::full({2}, 1.0));
  Parameter unused("unused", Tensor::full({2}, 1.0));
  Tape t;
  Value a = t.param(used);
  t.param(unused);
  t.backward(sum_all(mul(a, a)));
  CHECK(used.grad[0] == doctest::Approx(2.0));
  CHECK(unused.grad[0] == 0.0);
  CHECK(unused.grad[1] == 0.0);
}

// Composite graph exercising every op family against central differences.
TEST_CASE("backward matches finite differences on a composite graph") {
  Rng rng(9);
  Parameter kern("k", random_tensor({2, 2, 3, 3}, rng));
  Parameter kern_row("kr", random_tensor({2, 2, 3}, rng));
  Parameter kern_col("kc", random_tensor({2, 2, 2}, rng));
  Parameter bias("b", random_tensor({2}, rng));
  Tensor x = random_tensor({2, 4, 4}, rng);
  Tensor w = random_tensor({2, 4, 4}, rng, 0.1, 1.0);  // fixed projection

  auto build = [&](Tape& t) {
    Value v = t.input(x);
    Value c = add_bias(conv2d(v, t.param(kern), same_pad(3, 3)), t.param(bias));
    Value r = conv1d_rows(relu(c), t.param(kern_row));
    Value d = conv1d_cols(sigmoid(r), t.param(kern_col), 1);
    Value s = unskew(skew(pixelseq::tanh(d)));
    Value m = shift_down(mirror_cols(s));
    Value g = mul(add(m, scale(s, 0.3)), t.input(w));
    return sum_all(g);
  };

  {
    Tape t;
    Value loss = build(t);
    for (Parameter* p : {&kern, &kern_row, &kern_col, &bias}) p->zero_grad();
    t.backward(loss);
  }

  auto f = [&]() {
    Tape t;
    return build(t).val()[0];
  };
  for (Parameter* p : {&kern, &kern_row, &kern_col, &bias}) {
    Rng pick(17);
    for (int trial = 0; trial < 10; ++trial) {
      const int idx = static_cast<int>(pick.below(static_cast<std::uint64_t>(p->value.numel())));
      const double fd = fd_slot(f, &p->value.data[static_cast<std::size_t>(idx)]);
      const double ad = p->grad[idx];
      CHECK(std::fabs(ad - fd) < 1e-6 * std::max(1.0, std::fabs(fd)));
    }
  }
}

TEST_CASE("graph replay determinism: identical inputs give bit-identical outputs") {
  Rng rng(10);
  Tensor x = random_tensor({2, 5, 5}, rng);
  Tensor k = random_tensor({3, 2, 3, 3}, rng);
  auto run = [&]() {
    Tape t;
    Value y = sigmoid(conv2d(t.input(x), t.input(k), same_pad(3, 3)));
    return y.val();
  };
  Tensor a = run();
  Tensor b = run();
  REQUIRE(a.numel() == b.numel());
  for (int i = 0; i < a.numel(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Rng rng(11);
  Parameter a("layer.weight", random_tensor({3, 2, 3, 3}, rng));
  Parameter b("layer.bias", random_tensor({3}, rng));
  a.value[5] = -0.0;  // sign of zero must survive
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "pixelseq_ckpt_test.pxsq";

  const Parameter* params[] = {&a, &b};
  save_checkpoint(path.string(), "note = roundtrip\n", params);

  LoadedCheckpoint ck = read_checkpoint(path.string());
  CHECK(ck.header.at("note") == "roundtrip");
  REQUIRE(ck.tensors.count("layer.weight") == 1);
  const Tensor& w = ck.tensors.at("layer.weight");
  REQUIRE(w.shape == a.value.shape);
  for (int i = 0; i < w.numel(); ++i) {
    std::uint64_t raw0, raw1;
    std::memcpy(&raw0, &a.value.data[static_cast<std::size_t>(i)], 8);
    std::memcpy(&raw1, &w.data[static_cast<std::size_t>(i)], 8);
    CHECK(raw0 == raw1);
  }

  Parameter a2("layer.weight", Tensor({3, 2, 3, 3}));
  Parameter b2("layer.bias", Tensor({3}));
  Parameter* dst[] = {&a2, &b2};
  load_parameters(ck, dst);
  CHECK(max_abs_diff(a2.value, a.value) == 0.0);

  Parameter stranger("other", Tensor({3}));
  Parameter* bad[] = {&stranger};
  CHECK_THROWS_AS(load_parameters(ck, bad), DataError);
  std::filesystem::remove(path);
}
