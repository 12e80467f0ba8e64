#include "pixelseq/likelihood.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "pixelseq/errors.hpp"

namespace pixelseq {

std::vector<double> softmax_probs(std::span<const double> logits, double temperature) {
  if (temperature <= 0.0) throw ConfigError("softmax: temperature must be positive");
  std::vector<double> p(logits.begin(), logits.end());
  double m = -std::numeric_limits<double>::infinity();
  for (double& v : p) {
    v /= temperature;
    m = std::max(m, v);
  }
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

double nll_nats_map(const Tensor& logits, const std::vector<int>& targets, int groups,
                    int classes) {
  const int H = logits.extent(1), W = logits.extent(2);
  if (static_cast<int>(targets.size()) != groups * H * W) {
    throw ConfigError("nll_nats_map: target count mismatch");
  }
  double total = 0.0;
  if (classes == 2 && logits.extent(0) == 1) {
    // Bernoulli head: implicit logit pair {0, l}
    auto softplus = [](double z) {
      return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
    };
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const double z = logits.at(0, y, x);
        const int t = targets[static_cast<std::size_t>(y * W + x)];
        if (t != 0 && t != 1) throw DataError("nll_nats_map: binary target not in {0,1}");
        total += softplus(-z) + (t == 0 ? z : 0.0);
      }
    }
    return total;
  }
  if (logits.extent(0) != groups * classes) {
    throw ConfigError("nll_nats_map: logit feature count mismatch");
  }
  for (int g = 0; g < groups; ++g) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const int t = targets[static_cast<std::size_t>((g * H + y) * W + x)];
        if (t < 0 || t >= classes) throw DataError("nll_nats_map: target out of range");
        double m = logits.at(g * classes, y, x);
        for (int c = 1; c < classes; ++c) m = std::max(m, logits.at(g * classes + c, y, x));
        double z = 0.0;
        for (int c = 0; c < classes; ++c) z += std::exp(logits.at(g * classes + c, y, x) - m);
        total += std::log(z) - (logits.at(g * classes + t, y, x) - m);
      }
    }
  }
  return total;
}

double bits_per_dim(double total_nll_nats, long image_count, long dims_per_image) {
  if (image_count <= 0 || dims_per_image <= 0) {
    throw ConfigError("bits_per_dim: counts must be positive");
  }
  return total_nll_nats /
         (static_cast<double>(image_count) * static_cast<double>(dims_per_image) * std::log(2.0));
}

ContinuousEquivalenceReport continuous_equivalence_check(std::span<const double> probs,
                                                         int target_value, int mc_samples,
                                                         Rng& rng) {
  if (target_value < 0 || target_value >= static_cast<int>(probs.size())) {
    throw ConfigError("continuous_equivalence_check: target out of range");
  }
  ContinuousEquivalenceReport rep;
  rep.samples = mc_samples;
  const double discrete_lp = std::log(probs[static_cast<std::size_t>(target_value)]);
  for (int i = 0; i < mc_samples; ++i) {
    // dequantize: z = v + u lands in [v, v+1), where the continuous density
    // is the constant probs[v]
    const double z = static_cast<double>(target_value) + rng.uniform();
    const int cell = static_cast<int>(std::floor(z));
    const double continuous_lp = std::log(probs[static_cast<std::size_t>(cell)]);
    if (std::isinf(discrete_lp) || std::isinf(continuous_lp)) {
      rep.infinite_case = true;
      if (std::isinf(discrete_lp) != std::isinf(continuous_lp)) {
        rep.pass = false;
        return rep;
      }
      continue;
    }
    rep.max_abs_diff = std::max(rep.max_abs_diff, std::fabs(continuous_lp - discrete_lp));
  }
  rep.pass = rep.max_abs_diff <= 1e-12;
  return rep;
}

void write_eval_csv(const std::string& path, std::span<const EvalRow> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "split,images,nats_total,nats_per_image,bits_per_dim\n";
  out.precision(12);
  for (const EvalRow& r : rows) {
    out << r.split << ',' << r.images << ',' << r.nats_total << ',' << r.nats_per_image << ','
        << r.bits_per_dim << '\n';
  }
}

}  // namespace pixelseq
