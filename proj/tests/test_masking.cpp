#include <set>
#include <utility>

#include "doctest.h"
#include "pixelseq/errors.hpp"
#include "pixelseq/mask.hpp"
#include "pixelseq/parameter.hpp"
#include "test_util.hpp"

using namespace pixelseq;

namespace {

// Allowed (in,out) group pairs at the kernel center of a 1x1 mask.
std::set<std::pair<int, int>> center_pairs(const MaskSpec& m) {
  std::set<std::pair<int, int>> pairs;
  const int cy = (m.kh - 1) / 2, cx = (m.kw - 1) / 2;
  for (int go = 0; go < m.groups; ++go) {
    for (int gi = 0; gi < m.groups; ++gi) {
      if (m.allows(go, gi, cy, cx)) pairs.insert({gi, go});
    }
  }
  return pairs;
}

}  // namespace

TEST_CASE("mask A 1x1 over RGB allows exactly R->G, R->B, G->B") {
  MaskSpec m = build_mask(MaskKind::A, 1, 1, 3, 3, 3);
  std::set<std::pair<int, int>> expect = {{0, 1}, {0, 2}, {1, 2}};
  CHECK(center_pairs(m) == expect);
}

TEST_CASE("mask B 1x1 over RGB additionally allows self connections") {
  MaskSpec m = build_mask(MaskKind::B, 1, 1, 3, 3, 3);
  std::set<std::pair<int, int>> expect = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
  CHECK(center_pairs(m) == expect);
}

TEST_CASE("mask B 3x3 single group activates exactly 5 of 9 spatial positions") {
  MaskSpec m = build_mask(MaskKind::B, 3, 3, 1, 1, 1);
  int active = 0;
  for (int dy = 0; dy < 3; ++dy) {
    for (int dx = 0; dx < 3; ++dx) active += m.pattern.at(0, 0, dy, dx) != 0.0 ? 1 : 0;
  }
  CHECK(active == 5);
  // the three above, the one left, and the center
  CHECK(m.pattern.at(0, 0, 0, 0) == 1.0);
  CHECK(m.pattern.at(0, 0, 0, 1) == 1.0);
  CHECK(m.pattern.at(0, 0, 0, 2) == 1.0);
  CHECK(m.pattern.at(0, 0, 1, 0) == 1.0);
  CHECK(m.pattern.at(0, 0, 1, 1) == 1.0);
  CHECK(m.pattern.at(0, 0, 1, 2) == 0.0);
  CHECK(m.pattern.at(0, 0, 2, 1) == 0.0);
}

TEST_CASE("mask A pattern is contained in mask B; difference is the center diagonal blocks") {
  for (int kh : {1, 3}) {
    MaskSpec a = build_mask(MaskKind::A, kh, kh, 6, 6, 3);
    MaskSpec b = build_mask(MaskKind::B, kh, kh, 6, 6, 3);
    const int cy = (kh - 1) / 2;
    for (int fo = 0; fo < 6; ++fo) {
      for (int fi = 0; fi < 6; ++fi) {
        for (int dy = 0; dy < kh; ++dy) {
          for (int dx = 0; dx < kh; ++dx) {
            const double va = a.pattern.at(fo, fi, dy, dx);
            const double vb = b.pattern.at(fo, fi, dy, dx);
            CHECK(va <= vb);
            const bool center = dy == cy && dx == cy;
            const bool same_group = a.out_group(fo) == a.in_group(fi);
            CHECK(vb - va == (center && same_group ? 1.0 : 0.0));
          }
        }
      }
    }
  }
}

TEST_CASE("build_mask rejects feature counts not divisible by the group count") {
  CHECK_THROWS_AS(build_mask(MaskKind::B, 1, 1, 4, 6, 3), ConfigError);
  CHECK_THROWS_AS(build_mask(MaskKind::B, 1, 1, 6, 4, 3), ConfigError);
  CHECK_THROWS_AS(build_mask(MaskKind::B, 2, 3, 3, 3, 3), ConfigError);
}

TEST_CASE("apply_mask zeroes the masked positions of an all-ones kernel") {
  Parameter p("w", Tensor::full({3, 3, 1, 1}, 1.0));
  p.mask = std::make_shared<MaskSpec>(build_mask(MaskKind::A, 1, 1, 3, 3, 3));
  apply_mask(p);
  int nonzero = 0;
  for (double v : p.value.data) nonzero += v != 0.0 ? 1 : 0;
  CHECK(nonzero == 3);  // exactly the allowed pairs R->G, R->B, G->B
}

TEST_CASE("apply_mask is idempotent, bit for bit") {
  Rng rng(21);
  Parameter p("w", testutil::random_tensor({6, 6, 3, 3}, rng));
  p.mask = std::make_shared<MaskSpec>(build_mask(MaskKind::B, 3, 3, 6, 6, 3));
  apply_mask(p);
  Tensor once = p.value;
  apply_mask(p);
  for (int i = 0; i < once.numel(); ++i) CHECK(p.value[i] == once[i]);
  for (int i = 0; i < once.numel(); ++i) {
    if (p.mask->pattern[i] == 0.0) CHECK(p.value[i] == 0.0);
  }
}

TEST_CASE("apply_mask leaves fully-allowed positions untouched") {
  Rng rng(22);
  Parameter p("w", testutil::random_tensor({2, 2, 3, 3}, rng));
  Tensor orig = p.value;
  p.mask = std::make_shared<MaskSpec>(build_mask(MaskKind::B, 3, 3, 2, 2, 1));
  apply_mask(p);
  for (int fo = 0; fo < 2; ++fo) {
    for (int fi = 0; fi < 2; ++fi) {
      for (int dx = 0; dx < 3; ++dx) {  // the row above the center is fully allowed
        CHECK(p.value.at(fo, fi, 0, dx) == orig.at(fo, fi, 0, dx));
      }
    }
  }
}

TEST_CASE("apply_mask rejects a mask of the wrong size") {
  Parameter p("w", Tensor({4, 4, 1, 1}));
  p.mask = std::make_shared<MaskSpec>(build_mask(MaskKind::B, 1, 1, 3, 3, 3));
  CHECK_THROWS_AS(apply_mask(p), ConfigError);
}

TEST_CASE("tile_gates repeats the pattern along the output axis") {
  MaskSpec base = build_mask(MaskKind::B, 1, 3, 6, 3, 3);
  MaskSpec tiled = tile_gates(base, 4);
  CHECK(tiled.out_features == 12);
  for (int c = 0; c < 4; ++c) {
    for (int fo = 0; fo < 3; ++fo) {
      for (int fi = 0; fi < 6; ++fi) {
        for (int dx = 0; dx < 3; ++dx) {
          CHECK(tiled.pattern.at(c * 3 + fo, fi, 0, dx) == base.pattern.at(fo, fi, 0, dx));
        }
      }
    }
  }
}
