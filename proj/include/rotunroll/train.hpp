// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>

#include "rotunroll/data.hpp"
#include "rotunroll/network.hpp"

namespace rotunroll {

enum class ModelKind { Baseline, R90, R60, DenseBaseline, DenseR90, DenseR60 };
enum class DatasetKind { Mnist, RotMnist, Cifar10 };
enum class OptimizerKind { Adam, SgdMomentum };

ModelKind parse_model(const std::string& name);      // throws UsageError
DatasetKind parse_dataset(const std::string& name);  // throws UsageError
OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(ModelKind m);
std::string to_string(DatasetKind d);
std::string to_string(OptimizerKind o);

struct TrainConfig {
  ModelKind model = ModelKind::Baseline;
  DatasetKind dataset = DatasetKind::Mnist;
  int epochs = 30;
  int batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::optional<DatasetKind> eval_dataset;  // cross-evaluation override
  // Stops as soon as test accuracy reaches this value, when set.
  std::optional<double> target_test_acc;
};

// Model geometry implied by (model, dataset); input_gain keeps the fixed
// lambda/alpha pair productive on [0,1] pixels.
NetworkConfig network_config_for(ModelKind model, DatasetKind dataset);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double sparsity = 0.0;          // fraction of exactly-zero final-layer entries
  double stability_margin = 0.0;  // max over layers of alpha * sigma_max(W^T W)
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  double mean_sparsity = 0.0;
};

struct TrainResult {
  UnrolledNetwork net;
  std::vector<EpochMetrics> log;
};

// Seeded, single-threaded, deterministic end to end. Throws
// TrainingDiverged on NaN loss with the offending batch index and
// parameter norms in the message.
TrainResult train(const TrainConfig& cfg, const Dataset& train_data,
                  const Dataset& test_data,
                  const std::function<void(const EpochMetrics&)>& on_epoch = nullptr);

// Eval-mode forward only; argmax ties resolve to the lowest class index.
EvalResult evaluate(UnrolledNetwork& net, const Dataset& data, int batch_size = 256);

void write_metrics_csv(const std::vector<EpochMetrics>& log, const std::string& path);

struct Checkpoint {
  TrainConfig config;
  UnrolledNetwork net;
  int epoch = 0;
  std::string rng_state;
};

// Versioned little-endian container; load(save(net)) reproduces eval-mode
// outputs bit-exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// alpha * sigma_max(W^T W) for the worst layer (power iteration estimate).
double stability_margin(const UnrolledNetwork& net, int iters = 30);

}  // namespace rotunroll
