#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfd/net/network.hpp"

namespace mfd::net {

struct TrainConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  int epochs = 1;
  int batch_size = 1;           // gradients are averaged over the batch
  std::uint64_t seed = 0;
  LossMode mode = LossMode::mean;
  long lr_step = 0;             // multiply lr by lr_gamma every lr_step iterations (0 = constant)
  double lr_gamma = 0.1;
  long max_iterations = 0;      // 0 = no cap
  double max_seconds = 0.0;     // wall-clock budget, 0 = none; a budget stop is not reproducible

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
/// Strict: unknown keys are rejected, missing keys keep defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainSample {
  Image blurred;
  MotionFlow flow;
};

struct EpochStats {
  int epoch = 0;
  long iterations = 0;   // total so far
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  NetworkParams<float> params;     // last parameters with a finite loss
  std::vector<double> loss;        // per iteration
  std::vector<EpochStats> epochs;
  long iterations = 0;
  bool diverged = false;
  std::string stop_reason;         // "completed", "max_iterations", "time_budget", "diverged"
};

/// Called after every epoch with the current parameters.
using EpochCallback = std::function<void(const EpochStats&, const NetworkParams<float>&)>;

/// SGD with momentum over samples visited in a seeded order per epoch.
/// Stops on a non-finite loss or gradient and returns the last finite
/// parameters with diverged = true.
TrainResult train(const std::vector<TrainSample>& samples, const ArchSpec& arch, const TrainConfig& cfg,
                  const NetworkParams<float>* init = nullptr, const EpochCallback& on_epoch = {});

/// Seed used to order epoch e.
std::uint64_t epoch_seed(std::uint64_t seed, int epoch);

}  // namespace mfd::net
