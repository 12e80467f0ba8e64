#include "pixelseq/dataset.hpp"

#include <cmath>

#include "pixelseq/errors.hpp"
#include "pixelseq/rng.hpp"

namespace pixelseq {

Dataset binarize(const Dataset& d, BinarizeMode mode, std::uint64_t seed) {
  if (d.channels != 1) throw ConfigError("binarize: grayscale input required");
  Dataset out = d;
  out.max_value = 1;
  Rng rng(seed);
  const double denom = static_cast<double>(d.max_value);
  const int thresh = (d.max_value + 1) / 2;
  for (auto& img : out.images) {
    for (std::uint8_t& v : img) {
      if (mode == BinarizeMode::stochastic) {
        v = rng.uniform() < static_cast<double>(v) / denom ? 1 : 0;
      } else {
        v = v >= thresh ? 1 : 0;
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> subsample_image(const std::vector<std::uint8_t>& img, int channels,
                                          int side, int factor) {
  if (factor < 1 || side % factor != 0) {
    throw ConfigError("subsample: factor must divide the image side");
  }
  const int s = side / factor;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(channels) * s * s);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        out[static_cast<std::size_t>((c * s + y) * s + x)] =
            img[static_cast<std::size_t>((c * side + y * factor) * side + x * factor)];
      }
    }
  }
  return out;
}

Dataset subsample(const Dataset& d, int factor) {
  Dataset out;
  out.channels = d.channels;
  out.side = d.side / factor;
  out.max_value = d.max_value;
  if (factor < 1 || d.side % factor != 0) {
    throw ConfigError("subsample: factor must divide the image side");
  }
  out.images.reserve(d.images.size());
  for (const auto& img : d.images) {
    out.images.push_back(subsample_image(img, d.channels, d.side, factor));
  }
  return out;
}

double preprocess_value(int v, int max_value) {
  return (static_cast<double>(v) / static_cast<double>(max_value) - 0.5) * 2.0;
}

int deprocess_value(double x, int max_value) {
  const double v = (x / 2.0 + 0.5) * static_cast<double>(max_value);
  long r = std::lround(v);
  if (r < 0) r = 0;
  if (r > max_value) r = max_value;
  return static_cast<int>(r);
}

Tensor preprocess_image(const std::vector<std::uint8_t>& img, int channels, int side,
                        int max_value) {
  Tensor t({channels, side, side});
  for (std::size_t i = 0; i < img.size(); ++i) {
    t.data[i] = preprocess_value(img[i], max_value);
  }
  return t;
}

Tensor preprocess_batch(const Dataset& d, const std::vector<int>& indices) {
  Tensor out({static_cast<int>(indices.size()), d.channels, d.side, d.side});
  const std::size_t per = static_cast<std::size_t>(d.dims_per_image());
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& img = d.images[static_cast<std::size_t>(indices[b])];
    for (std::size_t i = 0; i < per; ++i) {
      out.data[b * per + i] = preprocess_value(img[i], d.max_value);
    }
  }
  return out;
}

std::vector<int> targets_of(const std::vector<std::uint8_t>& img) {
  return std::vector<int>(img.begin(), img.end());
}

std::pair<Dataset, Dataset> split_train_val(const Dataset& d, double val_fraction,
                                            std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("split: validation fraction must be in [0,1)");
  }
  std::vector<int> order(static_cast<std::size_t>(d.count()));
  for (int i = 0; i < d.count(); ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const int val_count = static_cast<int>(std::ceil(val_fraction * d.count()));
  Dataset train, val;
  train.channels = val.channels = d.channels;
  train.side = val.side = d.side;
  train.max_value = val.max_value = d.max_value;
  for (int i = 0; i < d.count(); ++i) {
    const auto& img = d.images[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    (i < val_count ? val : train).images.push_back(img);
  }
  return {std::move(train), std::move(val)};
}

}  // namespace pixelseq
