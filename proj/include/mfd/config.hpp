#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "mfd/dataset.hpp"
#include "mfd/deconv.hpp"
#include "mfd/flowsim.hpp"
#include "mfd/net/arch.hpp"
#include "mfd/net/train.hpp"

namespace mfd {

inline constexpr int kConfigSchemaVersion = 1;

void to_json(nlohmann::json& j, const DeconvConfig& cfg);
/// Strict; missing keys keep defaults.
DeconvConfig deconv_config_from_json(const nlohmann::json& j);

/// Everything a pipeline run needs. Loading validates every section and
/// rejects unknown keys; the sim section's defaults follow the domain.
struct PipelineConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  FlowDomain dom{8, 8};
  SimConfig sim = SimConfig::defaults(FlowDomain(8, 8));
  double noise_sigma = 0.005;
  int flows_per_image = 50;
  bool include_sharp = true;
  int crop = 0;
  std::string arch_preset = "toy";
  net::TrainConfig train;
  DeconvConfig deconv;

  void validate() const;

  /// Seeds of the individual stages, all derived from `seed`.
  SimConfig sim_for_run() const;
  net::TrainConfig train_for_run() const;
  DatasetConfig dataset_for_run() const;
  net::ArchSpec arch() const { return net::preset_arch(arch_preset, dom); }

  bool operator==(const PipelineConfig&) const = default;
};

void to_json(nlohmann::json& j, const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

}  // namespace mfd
