#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pixelseq/tensor.hpp"

namespace pixelseq {

// Integer-valued image corpus. Images are stored planar: channel-major
// (c, y, x) bytes, values in [0, max_value].
struct Dataset {
  int channels = 1;
  int side = 0;
  int max_value = 255;
  std::vector<std::vector<std::uint8_t>> images;

  int count() const { return static_cast<int>(images.size()); }
  long dims_per_image() const { return static_cast<long>(channels) * side * side; }
};

enum class BinarizeMode { stochastic, threshold };

// Stochastic: pixel ~ Bernoulli(intensity / max) drawn once at load with the
// given seed. Threshold: intensity >= (max+1)/2. Grayscale input only.
Dataset binarize(const Dataset& d, BinarizeMode mode, std::uint64_t seed);

// Deterministic top-left point sampling with the given stride.
Dataset subsample(const Dataset& d, int factor);
std::vector<std::uint8_t> subsample_image(const std::vector<std::uint8_t>& img, int channels,
                                          int side, int factor);

// Affine input map (value/max - 0.5) * 2 onto [-1, 1]; targets stay raw.
double preprocess_value(int v, int max_value);
int deprocess_value(double x, int max_value);
Tensor preprocess_image(const std::vector<std::uint8_t>& img, int channels, int side,
                        int max_value);
Tensor preprocess_batch(const Dataset& d, const std::vector<int>& indices);

std::vector<int> targets_of(const std::vector<std::uint8_t>& img);

// Deterministic shuffled split; the second part holds ceil(frac * count).
std::pair<Dataset, Dataset> split_train_val(const Dataset& d, double val_fraction,
                                            std::uint64_t seed);

}  // namespace pixelseq
