#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfd/blur.hpp"
#include "mfd/flowsim.hpp"
#include "mfd/net/train.hpp"

namespace mfd {

struct GeneratedPair {
  Image blurred;   // with noise
  Image clean;     // blurred, before noise
  MotionFlow flow;
  SimDraw draw;
};

/// Smallest side an image needs for the kernels of `dom` to fit.
inline int min_pair_side(const FlowDomain& dom) { return 2 * (dom.u_max() + dom.v_max()); }

/// Draws a flow from `rng`, blurs x with it and adds noise. Throws ShapeError
/// when min(H, W) < min_pair_side(dom).
GeneratedPair generate_pair(const Image& x, const FlowDomain& dom, const SimConfig& cfg, const NoiseSpec& noise,
                            Rng& rng);

struct DatasetConfig {
  FlowDomain dom{8, 8};
  SimConfig sim = SimConfig::defaults(FlowDomain(8, 8));
  double noise_sigma = 0.005;
  int flows_per_image = 50;
  bool include_sharp = true;   // one zero-flow record per image
  int stride = 16;             // crops are multiples of this
  int crop = 0;                // center-crop side (0 = largest multiple of stride)
  std::uint64_t seed = 0;
  int spot_checks = 10;        // records re-verified from disk after writing

  void validate() const;
};

void to_json(nlohmann::json& j, const DatasetConfig& cfg);

struct ManifestRecord {
  std::string blurred_path;  // relative to the manifest directory
  std::string flow_path;
  std::string sharp_path;
  std::uint64_t seed = 0;
  std::string sim_params_digest;

  bool operator==(const ManifestRecord&) const = default;
};

/// manifest.jsonl: a header line, then one JSON object per record.
struct DatasetManifest {
  std::filesystem::path root;  // directory holding manifest.jsonl
  FlowDomain dom;
  double noise_sigma = 0.0;
  std::string config_digest;
  nlohmann::json config;
  std::vector<ManifestRecord> records;

  std::filesystem::path manifest_path() const { return root / "manifest.jsonl"; }
  std::filesystem::path resolve(const std::string& rel) const { return root / rel; }

  void save() const;
  static DatasetManifest load(const std::filesystem::path& manifest_or_dir);

  /// Throws ParameterError on duplicate (sharp_path, seed) pairs.
  void check_unique() const;
};

inline constexpr int kManifestVersion = 1;

/// PNG files in corpus_dir, sorted by name.
std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& corpus_dir);

/// Emits flows_per_image blurred pairs per corpus image plus (optionally)
/// one zero-flow record per image, then writes manifest.jsonl.
DatasetManifest build_dataset(const std::filesystem::path& corpus_dir, const std::filesystem::path& out_dir,
                              const DatasetConfig& cfg);

/// Number of manifest records a corpus of `images` scenes produces.
inline long expected_record_count(long images, long flows_per_image, bool include_sharp) {
  return images * flows_per_image + (include_sharp ? images : 0);
}

/// Order in which an epoch visits the records.
std::vector<std::size_t> iteration_order(const DatasetManifest& manifest, std::uint64_t epoch_seed);

/// Loads record k; IoError/FormatError messages name the record.
net::TrainSample load_record(const DatasetManifest& manifest, std::size_t k);

/// Visits every record once in the epoch's order.
void iterate(const DatasetManifest& manifest, std::uint64_t epoch_seed,
             const std::function<void(std::size_t, const net::TrainSample&)>& visit);

std::vector<net::TrainSample> load_samples(const DatasetManifest& manifest);

/// Writes `count` synthetic sharp scenes of size h x w as PNGs.
std::vector<std::filesystem::path> write_synthetic_corpus(const std::filesystem::path& dir, int count, int height,
                                                          int width, std::uint64_t seed);

}  // namespace mfd
