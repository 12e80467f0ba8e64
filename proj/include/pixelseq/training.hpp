#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "pixelseq/dataset.hpp"
#include "pixelseq/network.hpp"

namespace pixelseq {

struct RunConfig {
  double learning_rate = 1e-3;
  double rms_decay = 0.95;
  double rms_epsilon = 1e-8;
  int batch_size = 16;
  int epochs = 2;
  std::uint64_t seed = 1;
  int eval_every = 0;          // validation cadence in steps; 0 = once per epoch
  double lr_epoch_decay = 1.0;  // optional per-epoch step decay, off by default

  void validate() const;
  void apply_overrides(const std::map<std::string, std::string>& kv);
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double train_nll_per_image = 0.0;
  double seconds = 0.0;
};

struct EvalRecord {
  int step = 0;
  int epoch = 0;
  double val_nll_per_image = 0.0;
  double val_bits_per_dim = 0.0;
};

struct Metrics {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
  double best_val_nll = std::numeric_limits<double>::infinity();
  int best_step = -1;
  bool aborted = false;
};

struct TrainOptions {
  std::string metrics_csv;      // streamed per-step/per-eval rows when set
  std::string best_checkpoint;  // written whenever validation NLL improves
  bool verbose = false;
};

// Total NLL in nats of the dataset under the network (teacher-forced).
double dataset_nll_nats(const Network& net, const Dataset& data);

// Mean per-image NLL gradient step loop with per-epoch shuffling. Loss is
// the mean per-image NLL over each mini-batch. Deterministic for a fixed
// seed; aborts (keeping the last good checkpoint) on a non-finite loss.
Metrics train(Network& net, const Dataset& train_data, const Dataset& val_data,
              const RunConfig& cfg, const TrainOptions& opts = {});

// Table-2/3-style harness at desk scale: 2x2 residual x skip grid plus a
// depth sweep, each cell trained from scratch. Emits complete CSVs.
struct AblationCell {
  bool residual = false, skip = false;
  double val_nll_per_image = 0.0, val_bits_per_dim = 0.0;
};
struct DepthPoint {
  int depth = 0;
  double val_nll_per_image = 0.0, val_bits_per_dim = 0.0;
};
struct AblationResult {
  std::vector<AblationCell> grid;   // 4 cells
  std::vector<DepthPoint> sweep;
};

AblationResult ablation_grid(const NetworkSpec& base, const std::vector<int>& depths,
                             const Dataset& train_data, const Dataset& val_data,
                             const RunConfig& cfg, const std::string& out_dir);

}  // namespace pixelseq
