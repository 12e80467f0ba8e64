#include "pixelseq/sampling.hpp"

#include <cmath>
#include <limits>

#include "pixelseq/dataset.hpp"
#include "pixelseq/errors.hpp"
#include "pixelseq/likelihood.hpp"
#include "pixelseq/rng.hpp"

namespace pixelseq {

bool OcclusionMask::is_raster_prefix() const {
  bool seen_unobserved = false;
  for (std::uint8_t k : keep) {
    if (!k) {
      seen_unobserved = true;
    } else if (seen_unobserved) {
      return false;
    }
  }
  return true;
}

namespace {

int draw_categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    acc += probs[c];
    if (u < acc) return static_cast<int>(c);
  }
  return static_cast<int>(probs.size()) - 1;
}

// One generation chain. ref/occ, when given, supply observed pixel values
// that are copied instead of drawn.
SampledImage run_chain(const Network& net, Rng& rng, const SampleOptions& opts,
                       const std::vector<Tensor>* bias_maps,
                       const std::vector<std::uint8_t>* ref, const OcclusionMask* occ) {
  const int n = net.side();
  const int C = net.spec().channels();
  const int classes = net.spec().classes();
  const bool softmax_head = net.spec().head == HeadKind::softmax256x3;
  const int max_value = softmax_head ? 255 : 1;

  SampledImage out;
  out.channels = C;
  out.side = n;
  out.max_value = max_value;
  out.values.assign(static_cast<std::size_t>(C) * n * n, 0);

  Tensor canvas({C, n, n});
  if (opts.poison_future) canvas.fill(std::numeric_limits<double>::quiet_NaN());

  auto write_value = [&](int g, int y, int x, int v) {
    out.values[static_cast<std::size_t>((g * n + y) * n + x)] = static_cast<std::uint8_t>(v);
    canvas.at(g, y, x) = preprocess_value(v, max_value);
  };

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (occ && occ->keep[static_cast<std::size_t>(y * n + x)]) {
        for (int g = 0; g < C; ++g) {
          write_value(g, y, x, (*ref)[static_cast<std::size_t>((g * n + y) * n + x)]);
        }
        continue;
      }
      for (int g = 0; g < C; ++g) {
        Tape t;
        t.check_finite = !opts.poison_future;
        std::vector<Value> biases;
        if (bias_maps) {
          biases.reserve(bias_maps->size());
          for (const Tensor& b : *bias_maps) biases.push_back(t.input(b));
        }
        Value logits = net.forward_image(t, canvas, bias_maps ? &biases : nullptr);
        const Tensor& lv = logits.val();

        std::vector<double> raw;
        if (softmax_head) {
          raw.resize(256);
          for (int c = 0; c < 256; ++c) raw[static_cast<std::size_t>(c)] = lv.at(g * 256 + c, y, x);
        } else {
          raw = {0.0, lv.at(0, y, x)};
        }
        for (double v : raw) {
          if (!std::isfinite(v)) {
            throw NumericError("sample: non-finite logits at the generated position");
          }
        }
        std::vector<double> probs = softmax_probs(raw, opts.temperature);
        const int v = draw_categorical(probs, rng);
        write_value(g, y, x, v);
        if (opts.record_distributions) out.step_probs.push_back(std::move(probs));
      }
    }
  }
  (void)classes;
  return out;
}

std::vector<SampledImage> run_chains(const Network& net, const SampleOptions& opts,
                                     const std::vector<Tensor>* bias_maps,
                                     const std::vector<std::uint8_t>* ref,
                                     const OcclusionMask* occ) {
  if (opts.temperature <= 0.0) throw ConfigError("sample: temperature must be positive");
  if (opts.count < 1) throw ConfigError("sample: count must be >= 1");
  Rng rng(opts.seed);
  std::vector<SampledImage> out;
  out.reserve(static_cast<std::size_t>(opts.count));
  for (int i = 0; i < opts.count; ++i) {
    out.push_back(run_chain(net, rng, opts, bias_maps, ref, occ));
  }
  return out;
}

}  // namespace

std::vector<SampledImage> sample(const Network& net, const SampleOptions& opts) {
  return run_chains(net, opts, nullptr, nullptr, nullptr);
}

std::vector<SampledImage> sample_with_bias(const Network& net,
                                           const std::vector<Tensor>& bias_maps,
                                           const SampleOptions& opts) {
  return run_chains(net, opts, &bias_maps, nullptr, nullptr);
}

std::vector<SampledImage> complete(const Network& net, const std::vector<std::uint8_t>& image,
                                   const OcclusionMask& occlusion, CompletionMode mode,
                                   const SampleOptions& opts) {
  const int n = net.side();
  if (occlusion.side != n ||
      occlusion.keep.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw ConfigError("complete: occlusion mask shape mismatch");
  }
  if (image.size() != static_cast<std::size_t>(net.spec().channels()) * n * n) {
    throw ConfigError("complete: image shape mismatch");
  }
  if (mode == CompletionMode::exact && !occlusion.is_raster_prefix()) {
    throw ConfigError(
        "complete: exact conditioning requires a raster-prefix occlusion (use clamp mode)");
  }
  return run_chains(net, opts, nullptr, &image, &occlusion);
}

MultiScaleSample multiscale_sample(const MultiScaleNetwork& net, const SampleOptions& opts) {
  MultiScaleSample out;
  SampleOptions small_opts = opts;
  small_opts.count = 1;
  out.small = sample(net.unconditional(), small_opts)[0];

  // conditioning maps depend only on the finished small image
  Tape t;
  Value cmap = net.conditioning_map(
      t, preprocess_image(out.small.values, out.small.channels, out.small.side,
                          out.small.max_value));
  std::vector<Tensor> bias_maps;
  for (Value b : net.gate_biases(t, cmap)) bias_maps.push_back(b.val());

  SampleOptions large_opts = opts;
  large_opts.count = 1;
  large_opts.seed = opts.seed + 1;
  out.large = sample_with_bias(net.conditional(), bias_maps, large_opts)[0];
  return out;
}

}  // namespace pixelseq
