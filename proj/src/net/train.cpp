#include "mfd/net/train.hpp"

#include <chrono>
#include <cmath>

#include "mfd/errors.hpp"
#include "mfd/random.hpp"

namespace mfd::net {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("train: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("train: momentum must lie in [0, 1)");
  if (epochs < 1) throw ParameterError("train: epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("train: batch size must be >= 1");
  if (lr_step < 0) throw ParameterError("train: lr_step must be >= 0");
  if (!(lr_gamma > 0.0 && lr_gamma <= 1.0)) throw ParameterError("train: lr_gamma must lie in (0, 1]");
  if (max_iterations < 0) throw ParameterError("train: max_iterations must be >= 0");
  if (!(max_seconds >= 0.0)) throw ParameterError("train: max_seconds must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},
       {"momentum", c.momentum},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"seed", c.seed},
       {"loss", c.mode == LossMode::mean ? "mean" : "sum"},
       {"lr_step", c.lr_step},
       {"lr_gamma", c.lr_gamma},
       {"max_iterations", c.max_iterations},
       {"max_seconds", c.max_seconds}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParameterError("train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "lr") c.lr = v.get<double>();
      else if (key == "momentum") c.momentum = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "loss") {
        const auto s = v.get<std::string>();
        if (s == "mean") c.mode = LossMode::mean;
        else if (s == "sum") c.mode = LossMode::sum;
        else throw ParameterError("train.loss must be \"mean\" or \"sum\"");
      } else if (key == "lr_step") c.lr_step = v.get<long>();
      else if (key == "lr_gamma") c.lr_gamma = v.get<double>();
      else if (key == "max_iterations") c.max_iterations = v.get<long>();
      else if (key == "max_seconds") c.max_seconds = v.get<double>();
      else throw ParameterError("train config: unknown key \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return derive_seed(seed, {0x65706f6368ull, static_cast<std::uint64_t>(epoch)});
}

namespace {

void accumulate(NetworkParams<float>& acc, const NetworkParams<float>& g, float w) {
  for (std::size_t k = 0; k < acc.layers.size(); ++k) {
    acc.layers[k].weight += w * g.layers[k].weight;
    acc.layers[k].bias += w * g.layers[k].bias;
  }
}

}  // namespace

TrainResult train(const std::vector<TrainSample>& samples, const ArchSpec& arch, const TrainConfig& cfg,
                  const NetworkParams<float>* init, const EpochCallback& on_epoch) {
  cfg.validate();
  arch.validate();
  if (samples.empty()) throw ParameterError("train: dataset is empty");
  if (init && !(init->arch == arch)) throw ParameterError("train: initial parameters use a different architecture");

  TrainResult res;
  res.params = init ? *init : init_params<float>(arch, derive_seed(cfg.seed, {0x696e6974ull}));
  res.params.check_shapes();
  NetworkParams<float> velocity = res.params.zeros_like();
  NetworkParams<float> batch = res.params.zeros_like();
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  res.stop_reason = "completed";

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = seeded_permutation(samples.size(), epoch_seed(cfg.seed, epoch));
    double epoch_loss = 0.0;
    long epoch_count = 0;
    bool stop = false;
    for (std::size_t start_k = 0; start_k < order.size() && !stop; start_k += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end_k = std::min(order.size(), start_k + static_cast<std::size_t>(cfg.batch_size));
      const float w = 1.0f / static_cast<float>(end_k - start_k);
      batch = res.params.zeros_like();
      double loss = 0.0;
      for (std::size_t k = start_k; k < end_k; ++k) {
        const TrainSample& s = samples[order[k]];
        const LossGrad<float> lg = loss_and_grad(res.params, s.blurred, s.flow, cfg.mode);
        loss += lg.loss / static_cast<double>(end_k - start_k);
        accumulate(batch, lg.grad, w);
      }
      if (!std::isfinite(loss) || !batch.all_finite()) {
        res.diverged = true;
        res.stop_reason = "diverged";
        stop = true;
        break;
      }
      double lr = cfg.lr;
      if (cfg.lr_step > 0) lr *= std::pow(cfg.lr_gamma, static_cast<double>(res.iterations / cfg.lr_step));
      NetworkParams<float> next = res.params;
      NetworkParams<float> next_velocity = velocity;
      sgd_step(next, batch, next_velocity, lr, cfg.momentum);
      if (!next.all_finite()) {
        res.diverged = true;
        res.stop_reason = "diverged";
        stop = true;
        break;
      }
      res.params = std::move(next);
      velocity = std::move(next_velocity);
      res.loss.push_back(loss);
      epoch_loss += loss;
      ++epoch_count;
      ++res.iterations;
      if (cfg.max_iterations > 0 && res.iterations >= cfg.max_iterations) {
        res.stop_reason = "max_iterations";
        stop = true;
      } else if (cfg.max_seconds > 0.0 && elapsed() >= cfg.max_seconds) {
        res.stop_reason = "time_budget";
        stop = true;
      }
    }
    if (epoch_count > 0) {
      EpochStats st{epoch, res.iterations, epoch_loss / static_cast<double>(epoch_count), elapsed()};
      res.epochs.push_back(st);
      if (on_epoch) on_epoch(st, res.params);
    }
    if (stop) break;
  }
  return res;
}

}  // namespace mfd::net
