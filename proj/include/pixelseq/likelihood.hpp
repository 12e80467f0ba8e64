#pragma once

#include <span>
#include <string>
#include <vector>

#include "pixelseq/rng.hpp"
#include "pixelseq/tensor.hpp"

namespace pixelseq {

// Numerically stabilized softmax (max subtraction) of logits / temperature.
std::vector<double> softmax_probs(std::span<const double> logits, double temperature = 1.0);

// Total NLL in nats of one image's logit map against integer sub-pixel
// targets, matching the taped loss ops bit for bit. logits is
// (groups*classes) x H x W with contiguous class blocks (classes == 2 means
// a Bernoulli map of 1 x H x W with implicit logit pair {0, l}).
double nll_nats_map(const Tensor& logits, const std::vector<int>& targets, int groups,
                    int classes);

// total / (images * dims * ln 2).
double bits_per_dim(double total_nll_nats, long image_count, long dims_per_image);

// Checks that the piecewise-uniform continuous density obtained by
// dequantizing a discrete table gives, per noise draw, exactly the discrete
// log-probability. Zero-probability targets are flagged as the infinite
// case and count as consistent (-inf on both routes).
struct ContinuousEquivalenceReport {
  bool pass = false;
  int samples = 0;
  double max_abs_diff = 0.0;
  bool infinite_case = false;
};

ContinuousEquivalenceReport continuous_equivalence_check(std::span<const double> probs,
                                                         int target_value, int mc_samples,
                                                         Rng& rng);

// One row of the evaluation report CSV.
struct EvalRow {
  std::string split;
  long images = 0;
  double nats_total = 0.0;
  double nats_per_image = 0.0;
  double bits_per_dim = 0.0;
};

void write_eval_csv(const std::string& path, std::span<const EvalRow> rows);

}  // namespace pixelseq
