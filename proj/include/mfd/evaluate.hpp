#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfd/dataset.hpp"
#include "mfd/deconv.hpp"
#include "mfd/net/network.hpp"

namespace mfd {

/// Supplies the estimated flow for record k given its blurred image.
using FlowEstimator = std::function<MotionFlow(std::size_t k, const ManifestRecord&, const Image& blurred)>;

FlowEstimator network_estimator(const net::NetworkParams<float>& params);
/// Reads <flows_dir>/<basename of the record's flow_path>.
FlowEstimator directory_estimator(const std::filesystem::path& flows_dir);

struct EvalOptions {
  DeconvConfig deconv;
  bool deblur = true;            // deconvolve with the estimated flow
  bool gt_reference = true;      // and with the ground-truth flow
  std::size_t limit = 0;         // evaluate only the first `limit` records (0 = all)
  bool skip_zero_flow = false;   // ignore records whose ground truth is all zero
  std::filesystem::path outputs_dir;  // optional: write estimated flows and deblurred images here
};

struct EvalRecord {
  std::size_t index = 0;
  std::string blurred_path;
  bool missing = false;
  std::string error;
  double flow_mse = 0.0;
  double zero_flow_mse = 0.0;   // MSE of the all-zero estimate
  double psnr_blurred = 0.0;    // blurred input vs sharp
  double ssim_blurred = 0.0;
  double psnr_db = 0.0;         // deblurred with the estimated flow
  double ssim = 0.0;
  double psnr_gt_db = 0.0;      // deblurred with the ground-truth flow
  double ssim_gt = 0.0;
  double max_objective_increase = 0.0;  // over both deconvolutions
};

struct EvalMeans {
  double flow_mse = 0.0, zero_flow_mse = 0.0;
  double psnr_blurred = 0.0, ssim_blurred = 0.0;
  double psnr_db = 0.0, ssim = 0.0;
  double psnr_gt_db = 0.0, ssim_gt = 0.0;
};

struct EvalReport {
  std::vector<EvalRecord> records;
  EvalMeans means;   // over records that are not missing
  std::size_t missing = 0;
  std::string config_digest;
  nlohmann::json config;
  double max_objective_increase = 0.0;

  /// Recomputes the means from the records.
  EvalMeans recompute_means() const;
};

nlohmann::json to_json(const EvalReport& report);

/// Per-record flow MSE, PSNR and SSIM plus the ground-truth-flow reference.
/// Records that cannot be loaded are flagged, not fatal. Throws
/// ParameterError for an empty manifest.
EvalReport evaluate(const DatasetManifest& manifest, const FlowEstimator& estimator, const EvalOptions& options);

}  // namespace mfd
