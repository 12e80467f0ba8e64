#pragma once

#include <cstdint>
#include <vector>

#include "pixelseq/network.hpp"

namespace pixelseq {

// Per-pixel observation map for completions; true = pixel kept.
struct OcclusionMask {
  int side = 0;
  std::vector<std::uint8_t> keep;  // row-major side*side

  // True when the observed set is exactly the pixels before some raster
  // index, the shape for which completion conditioning is exact.
  bool is_raster_prefix() const;
};

enum class CompletionMode { exact, clamp };

struct SampleOptions {
  int count = 1;
  std::uint64_t seed = 0;
  double temperature = 1.0;
  bool poison_future = false;         // fill not-yet-sampled canvas slots with NaN
  bool record_distributions = false;  // keep each drawn sub-pixel's categorical table
};

struct SampledImage {
  int channels = 1;
  int side = 0;
  int max_value = 255;
  std::vector<std::uint8_t> values;             // planar c x n x n
  std::vector<std::vector<double>> step_probs;  // drawn sub-pixels, raster order
};

// Raster-order generation, R then G then B within a pixel, one network
// forward per sub-pixel; each value is drawn from softmax(logits /
// temperature). Deterministic for a fixed seed.
std::vector<SampledImage> sample(const Network& net, const SampleOptions& opts);

// As sample(), with per-block conditioning bias maps added to each block's
// gate preactivations (the multi-scale biasing path).
std::vector<SampledImage> sample_with_bias(const Network& net,
                                           const std::vector<Tensor>& bias_maps,
                                           const SampleOptions& opts);

// Observed pixels are copied bit-exactly; the rest are sampled conditioned
// on everything preceding them. Exact mode requires a raster-prefix
// occlusion; clamp mode accepts any occlusion and overwrites observed
// pixels as generation passes them (approximate conditioning).
std::vector<SampledImage> complete(const Network& net, const std::vector<std::uint8_t>& image,
                                   const OcclusionMask& occlusion, CompletionMode mode,
                                   const SampleOptions& opts);

// Small image sampled unconditionally (stream seeded with opts.seed), then
// the large image from the conditional network biased by the upsampled
// small image (stream seeded with opts.seed + 1).
struct MultiScaleSample {
  SampledImage small, large;
};
MultiScaleSample multiscale_sample(const MultiScaleNetwork& net, const SampleOptions& opts);

}  // namespace pixelseq
