#include "pixelseq/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "pixelseq/errors.hpp"
#include "pixelseq/likelihood.hpp"
#include "pixelseq/model_io.hpp"
#include "pixelseq/optimizer.hpp"
#include "pixelseq/rng.hpp"
#include "pixelseq/tape.hpp"

namespace pixelseq {

void RunConfig::validate() const {
  if (learning_rate < 0.0) throw ConfigError("RunConfig: learning_rate must be >= 0");
  if (rms_decay <= 0.0 || rms_decay >= 1.0) throw ConfigError("RunConfig: rms_decay in (0,1)");
  if (rms_epsilon <= 0.0) throw ConfigError("RunConfig: rms_epsilon must be positive");
  if (batch_size < 1) throw ConfigError("RunConfig: batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("RunConfig: epochs must be >= 0");
  if (eval_every < 0) throw ConfigError("RunConfig: eval_every must be >= 0");
  if (lr_epoch_decay <= 0.0 || lr_epoch_decay > 1.0) {
    throw ConfigError("RunConfig: lr_epoch_decay in (0,1]");
  }
}

void RunConfig::apply_overrides(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    try {
      if (key == "learning_rate") {
        learning_rate = std::stod(value);
      } else if (key == "rms_decay") {
        rms_decay = std::stod(value);
      } else if (key == "rms_epsilon") {
        rms_epsilon = std::stod(value);
      } else if (key == "batch_size") {
        batch_size = std::stoi(value);
      } else if (key == "epochs") {
        epochs = std::stoi(value);
      } else if (key == "seed") {
        seed = std::stoull(value);
      } else if (key == "eval_every") {
        eval_every = std::stoi(value);
      } else if (key == "lr_epoch_decay") {
        lr_epoch_decay = std::stod(value);
      }
      // unknown keys are left for the caller (CLI flags use the same map)
    } catch (const std::exception&) {
      throw ConfigError("bad value for config key " + key + ": " + value);
    }
  }
}

namespace {

double image_nll(const Network& net, const Dataset& data, int index) {
  Tape t;
  const auto& img = data.images[static_cast<std::size_t>(index)];
  Value logits =
      net.forward_image(t, preprocess_image(img, data.channels, data.side, data.max_value));
  return nll_nats_map(logits.val(), targets_of(img), net.spec().groups(), net.spec().classes());
}

void check_compatible(const Network& net, const Dataset& data, const char* where) {
  if (data.count() == 0) throw ConfigError(std::string(where) + ": empty dataset");
  if (data.channels != net.spec().channels() || data.side != net.side()) {
    throw ConfigError(std::string(where) + ": dataset does not match the network layout");
  }
}

}  // namespace

double dataset_nll_nats(const Network& net, const Dataset& data) {
  check_compatible(net, data, "dataset_nll_nats");
  double total = 0.0;
  for (int i = 0; i < data.count(); ++i) total += image_nll(net, data, i);
  return total;
}

Metrics train(Network& net, const Dataset& train_data, const Dataset& val_data,
              const RunConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  check_compatible(net, train_data, "train");
  if (val_data.count() > 0) check_compatible(net, val_data, "train(validation)");

  Metrics metrics;
  RmsProp opt;
  std::vector<Parameter*> params = net.parameters();
  Rng order_rng(cfg.seed);
  const int groups = net.spec().groups();
  const int classes = net.spec().classes();
  const long dims = train_data.dims_per_image();

  std::ofstream csv;
  if (!opts.metrics_csv.empty()) {
    csv.open(opts.metrics_csv);
    if (!csv) throw DataError("cannot open for writing: " + opts.metrics_csv);
    csv << "kind,step,epoch,nll_per_image,bits_per_dim,seconds\n";
    csv.precision(12);
  }

  int step = 0;
  double lr = cfg.learning_rate;

  auto run_eval = [&](int epoch) {
    if (val_data.count() == 0) return;
    const double total = dataset_nll_nats(net, val_data);
    EvalRecord rec;
    rec.step = step;
    rec.epoch = epoch;
    rec.val_nll_per_image = total / val_data.count();
    rec.val_bits_per_dim = bits_per_dim(total, val_data.count(), val_data.dims_per_image());
    metrics.evals.push_back(rec);
    if (csv.is_open()) {
      csv << "val," << rec.step << ',' << rec.epoch << ',' << rec.val_nll_per_image << ','
          << rec.val_bits_per_dim << ",0\n";
    }
    if (rec.val_nll_per_image < metrics.best_val_nll) {
      metrics.best_val_nll = rec.val_nll_per_image;
      metrics.best_step = step;
      if (!opts.best_checkpoint.empty()) save_network(opts.best_checkpoint, net);
    }
    if (opts.verbose) {
      std::printf("step %d: val nll/image %.4f (%.4f bits/dim)\n", rec.step,
                  rec.val_nll_per_image, rec.val_bits_per_dim);
    }
  };

  std::vector<int> order(static_cast<std::size_t>(train_data.count()));
  for (int i = 0; i < train_data.count(); ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < cfg.epochs && !metrics.aborted; ++epoch) {
    order_rng.shuffle(order);
    for (int start = 0; start < train_data.count(); start += cfg.batch_size) {
      const int end = std::min(start + cfg.batch_size, train_data.count());
      const int bsz = end - start;
      const auto t0 = std::chrono::steady_clock::now();

      for (Parameter* p : params) p->zero_grad();
      double batch_nll = 0.0;
      for (int b = start; b < end; ++b) {
        const auto& img = train_data.images[static_cast<std::size_t>(order[static_cast<std::size_t>(b)])];
        Tape t;
        Value logits = net.forward_image(
            t, preprocess_image(img, train_data.channels, train_data.side, train_data.max_value));
        Value nll = net.spec().head == HeadKind::softmax256x3
                        ? softmax_nll(logits, targets_of(img), groups, classes)
                        : bernoulli_nll(logits, targets_of(img));
        batch_nll += nll.val()[0];
        t.backward(scale(nll, 1.0 / bsz));
      }

      if (!std::isfinite(batch_nll)) {
        metrics.aborted = true;  // the best checkpoint on disk stays valid
        break;
      }
      opt.step(params, lr, cfg.rms_decay, cfg.rms_epsilon);
      ++step;

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.train_nll_per_image = batch_nll / bsz;
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      metrics.steps.push_back(rec);
      if (csv.is_open()) {
        csv << "train," << rec.step << ',' << rec.epoch << ',' << rec.train_nll_per_image << ','
            << bits_per_dim(rec.train_nll_per_image, 1, dims) << ',' << rec.seconds << '\n';
      }
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) run_eval(epoch);
    }
    if (!metrics.aborted && cfg.eval_every == 0) run_eval(epoch);
    lr *= cfg.lr_epoch_decay;
  }
  return metrics;
}

AblationResult ablation_grid(const NetworkSpec& base, const std::vector<int>& depths,
                             const Dataset& train_data, const Dataset& val_data,
                             const RunConfig& cfg, const std::string& out_dir) {
  if (val_data.count() == 0) throw ConfigError("ablation_grid: needs a validation split");
  std::filesystem::create_directories(out_dir);
  AblationResult result;

  auto run_cell = [&](const NetworkSpec& spec) {
    Network net(spec, train_data.side, cfg.seed);
    Metrics m = train(net, train_data, val_data, cfg);
    if (m.aborted || m.evals.empty()) {
      throw NumericError("ablation_grid: training aborted before any evaluation");
    }
    return m.best_val_nll;
  };

  {
    std::ofstream csv(out_dir + "/residual_skip_grid.csv");
    if (!csv) throw DataError("cannot open for writing: " + out_dir + "/residual_skip_grid.csv");
    csv << "residual,skip,val_nll_per_image,val_bits_per_dim\n";
    csv.precision(12);
    for (int res = 0; res <= 1; ++res) {
      for (int skip = 0; skip <= 1; ++skip) {
        NetworkSpec spec = base;
        spec.use_residual = res != 0;
        spec.use_skip = skip != 0;
        AblationCell cell;
        cell.residual = spec.use_residual;
        cell.skip = spec.use_skip;
        cell.val_nll_per_image = run_cell(spec);
        cell.val_bits_per_dim =
            bits_per_dim(cell.val_nll_per_image, 1, val_data.dims_per_image());
        result.grid.push_back(cell);
        csv << res << ',' << skip << ',' << cell.val_nll_per_image << ','
            << cell.val_bits_per_dim << '\n';
      }
    }
  }

  {
    std::ofstream csv(out_dir + "/depth_sweep.csv");
    if (!csv) throw DataError("cannot open for writing: " + out_dir + "/depth_sweep.csv");
    csv << "depth,val_nll_per_image,val_bits_per_dim\n";
    csv.precision(12);
    for (int depth : depths) {
      NetworkSpec spec = base;
      spec.depth = depth;
      DepthPoint pt;
      pt.depth = depth;
      pt.val_nll_per_image = run_cell(spec);
      pt.val_bits_per_dim = bits_per_dim(pt.val_nll_per_image, 1, val_data.dims_per_image());
      result.sweep.push_back(pt);
      csv << depth << ',' << pt.val_nll_per_image << ',' << pt.val_bits_per_dim << '\n';
    }
  }
  return result;
}

}  // namespace pixelseq
