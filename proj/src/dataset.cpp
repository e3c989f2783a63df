#include "mfd/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "mfd/digest.hpp"
#include "mfd/io.hpp"
#include "mfd/parallel.hpp"
#include "mfd/synth.hpp"

namespace mfd {

namespace fs = std::filesystem;

GeneratedPair generate_pair(const Image& x, const FlowDomain& dom, const SimConfig& cfg, const NoiseSpec& noise,
                            Rng& rng) {
  const int side = min_pair_side(dom);
  if (std::min(x.height(), x.width()) < side)
    throw ShapeError("image " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                     " is too small for the flow domain (min side " + std::to_string(side) + ")");
  GeneratedPair p;
  SimResult sim = simulate_flow_detailed(x.height(), x.width(), dom, cfg, rng);
  p.flow = std::move(sim.flow);
  p.draw = sim.draw;
  p.clean = apply_blur(x, p.flow);
  p.blurred = add_noise(p.clean, noise);
  return p;
}

void DatasetConfig::validate() const {
  if (flows_per_image < 0) throw ParameterError("dataset: flows_per_image must be >= 0");
  if (flows_per_image == 0 && !include_sharp) throw ParameterError("dataset: configuration emits no records");
  if (!(noise_sigma >= 0.0)) throw ParameterError("dataset: noise sigma must be >= 0");
  if (stride < 1) throw ParameterError("dataset: stride must be >= 1");
  if (crop < 0 || crop % stride != 0) throw ParameterError("dataset: crop must be a nonnegative multiple of the stride");
  if (spot_checks < 0) throw ParameterError("dataset: spot_checks must be >= 0");
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  j = {{"u_max", c.dom.u_max()},   {"v_max", c.dom.v_max()},
       {"sim", c.sim},              {"noise_sigma", c.noise_sigma},
       {"flows_per_image", c.flows_per_image}, {"include_sharp", c.include_sharp},
       {"stride", c.stride},        {"crop", c.crop},
       {"seed", c.seed}};
}

void DatasetManifest::check_unique() const {
  std::set<std::pair<std::string, std::uint64_t>> seen;
  for (const auto& r : records)
    if (!seen.emplace(r.sharp_path, r.seed).second)
      throw ParameterError("manifest: duplicate record for " + r.sharp_path + " seed " + std::to_string(r.seed));
}

void DatasetManifest::save() const {
  std::ofstream out(manifest_path(), std::ios::trunc);
  if (!out) throw IoError("cannot write " + manifest_path().string());
  const nlohmann::json header = {{"format", "mfd-manifest"},    {"version", kManifestVersion},
                                 {"u_max", dom.u_max()},        {"v_max", dom.v_max()},
                                 {"noise_sigma", noise_sigma},  {"config_digest", config_digest},
                                 {"config", config},            {"records", records.size()}};
  out << header.dump() << '\n';
  for (const auto& r : records) {
    const nlohmann::json line = {{"blurred_path", r.blurred_path},
                                 {"flow_path", r.flow_path},
                                 {"sharp_path", r.sharp_path},
                                 {"seed", r.seed},
                                 {"sim_params_digest", r.sim_params_digest}};
    out << line.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + manifest_path().string());
}

DatasetManifest DatasetManifest::load(const fs::path& manifest_or_dir) {
  const fs::path path = fs::is_directory(manifest_or_dir) ? manifest_or_dir / "manifest.jsonl" : manifest_or_dir;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.root = path.parent_path();
  std::string line;
  long line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("format", "") != "mfd-manifest") throw IoError(where + ": missing manifest header");
        if (j.at("version").get<int>() != kManifestVersion)
          throw IoError(where + ": unsupported manifest version " + j.at("version").dump());
        m.dom = FlowDomain(j.at("u_max").get<int>(), j.at("v_max").get<int>());
        m.noise_sigma = j.at("noise_sigma").get<double>();
        m.config_digest = j.at("config_digest").get<std::string>();
        m.config = j.at("config");
        have_header = true;
        continue;
      }
      ManifestRecord r;
      r.blurred_path = j.at("blurred_path").get<std::string>();
      r.flow_path = j.at("flow_path").get<std::string>();
      r.sharp_path = j.at("sharp_path").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.sim_params_digest = j.at("sim_params_digest").get<std::string>();
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(where + ": " + e.what());
    }
  }
  if (!have_header) throw IoError(path.string() + ": empty manifest");
  m.check_unique();
  return m;
}

std::vector<fs::path> list_corpus(const fs::path& corpus_dir) {
  if (!fs::is_directory(corpus_dir)) throw IoError("corpus directory not found: " + corpus_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(corpus_dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (e.is_regular_file() && ext == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("corpus " + corpus_dir.string() + " contains no PNG images");
  return files;
}

namespace {

Image center_crop(const Image& x, const DatasetConfig& cfg, const fs::path& src) {
  int h = x.height() / cfg.stride * cfg.stride;
  int w = x.width() / cfg.stride * cfg.stride;
  if (cfg.crop > 0) {
    h = std::min(h, cfg.crop);
    w = std::min(w, cfg.crop);
  }
  if (h < 1 || w < 1) throw ShapeError(src.string() + " is smaller than the stride " + std::to_string(cfg.stride));
  return x.crop((x.height() - h) / 2, (x.width() - w) / 2, h, w);
}

// Gray inputs are expanded so every record has three channels.
Image as_rgb(const Image& x) {
  if (x.channels() == 3) return x;
  return Image::from_planes({x.plane(0), x.plane(0), x.plane(0)});
}

std::uint64_t noise_seed(std::uint64_t record_seed) { return derive_seed(record_seed, {0x6e6f697365ull}); }

}  // namespace

DatasetManifest build_dataset(const fs::path& corpus_dir, const fs::path& out_dir, const DatasetConfig& cfg) {
  cfg.validate();
  const auto files = list_corpus(corpus_dir);
  std::error_code ec;
  fs::create_directories(out_dir / "sharp", ec);
  fs::create_directories(out_dir / "blurred", ec);
  fs::create_directories(out_dir / "flow", ec);
  if (ec || !fs::is_directory(out_dir / "flow"))
    throw IoError("cannot create output directory " + out_dir.string() + (ec ? ": " + ec.message() : ""));

  const nlohmann::json config = cfg;
  DatasetManifest m;
  m.root = out_dir;
  m.dom = cfg.dom;
  m.noise_sigma = cfg.noise_sigma;
  m.config = config;
  m.config_digest = json_digest(config);

  // Each image is an independent job writing only its own files and slot.
  std::vector<std::vector<ManifestRecord>> per_image(files.size());
  parallel_for(0, static_cast<std::ptrdiff_t>(files.size()), [&](std::ptrdiff_t n) {
    const auto idx = static_cast<std::size_t>(n);
    const Image x = as_rgb(center_crop(load_image(files[idx]), cfg, files[idx]));
    char stem[32];
    std::snprintf(stem, sizeof stem, "%05zu", idx);
    const std::string sharp_rel = "sharp/" + std::string(stem) + ".png";
    save_image(x, out_dir / sharp_rel);
    auto& out = per_image[idx];
    for (int k = 0; k < cfg.flows_per_image + (cfg.include_sharp ? 1 : 0); ++k) {
      const bool zero = k == cfg.flows_per_image;
      const std::uint64_t seed = derive_seed(cfg.seed, {idx, static_cast<std::uint64_t>(k)});
      char name[48];
      std::snprintf(name, sizeof name, "%s_%03d", stem, k);
      ManifestRecord r;
      r.sharp_path = sharp_rel;
      r.blurred_path = "blurred/" + std::string(name) + ".png";
      r.flow_path = "flow/" + std::string(name) + ".mflw";
      r.seed = seed;
      Rng rng(seed);
      SimConfig sim = cfg.sim;
      sim.seed = seed;
      if (zero) {
        sim.zero_flow_probability = 1.0;
      }
      const GeneratedPair pair = generate_pair(x, cfg.dom, sim, {cfg.noise_sigma, noise_seed(seed)}, rng);
      r.sim_params_digest = json_digest(to_json(pair.draw));
      save_image(pair.blurred, out_dir / r.blurred_path);
      write_flow(pair.flow, out_dir / r.flow_path);
      out.push_back(std::move(r));
    }
  });
  for (auto& v : per_image)
    for (auto& r : v) m.records.push_back(std::move(r));
  m.check_unique();

  // Spot-check: re-blurring the stored sharp image with the stored flow and
  // the record's noise stream reproduces the stored blurred image.
  const auto order = seeded_permutation(m.records.size(), derive_seed(cfg.seed, {0x636865636bull}));
  for (std::size_t t = 0; t < std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.spot_checks)); ++t) {
    const ManifestRecord& r = m.records[order[t]];
    const Image x = load_image(out_dir / r.sharp_path);
    const MotionFlow flow = read_flow(out_dir / r.flow_path);
    const Image y = add_noise(apply_blur(x, flow), {cfg.noise_sigma, noise_seed(r.seed)});
    const Image stored = load_image(out_dir / r.blurred_path);
    for (int ch = 0; ch < y.channels(); ++ch)
      if (((y.plane(ch) * 255.0).round() != (stored.plane(ch) * 255.0).round()).any())
        throw IoError("self-consistency check failed for record " + r.blurred_path);
  }
  m.save();
  return m;
}

std::vector<std::size_t> iteration_order(const DatasetManifest& manifest, std::uint64_t epoch_seed) {
  return seeded_permutation(manifest.records.size(), epoch_seed);
}

net::TrainSample load_record(const DatasetManifest& manifest, std::size_t k) {
  if (k >= manifest.records.size()) throw ParameterError("manifest record index out of range");
  const ManifestRecord& r = manifest.records[k];
  try {
    net::TrainSample s{as_rgb(load_image(manifest.resolve(r.blurred_path))), read_flow(manifest.resolve(r.flow_path))};
    if (s.blurred.height() != s.flow.height() || s.blurred.width() != s.flow.width())
      throw ShapeError("image and flow sizes differ");
    s.flow.require_domain(manifest.dom);
    return s;
  } catch (const std::exception& e) {
    throw IoError("manifest record " + std::to_string(k) + " (" + r.blurred_path + "): " + e.what());
  }
}

void iterate(const DatasetManifest& manifest, std::uint64_t epoch_seed,
             const std::function<void(std::size_t, const net::TrainSample&)>& visit) {
  for (const std::size_t k : iteration_order(manifest, epoch_seed)) visit(k, load_record(manifest, k));
}

std::vector<net::TrainSample> load_samples(const DatasetManifest& manifest) {
  std::vector<net::TrainSample> out(manifest.records.size());
  parallel_for(0, static_cast<std::ptrdiff_t>(out.size()),
               [&](std::ptrdiff_t k) { out[static_cast<std::size_t>(k)] = load_record(manifest, k); });
  return out;
}

std::vector<fs::path> write_synthetic_corpus(const fs::path& dir, int count, int height, int width,
                                             std::uint64_t seed) {
  if (count < 1) throw ParameterError("synthetic corpus needs at least one image");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> paths(static_cast<std::size_t>(count));
  parallel_for(0, count, [&](std::ptrdiff_t k) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05td.png", k);
    paths[static_cast<std::size_t>(k)] = dir / name;
    save_image(synth_scene(height, width, rng), dir / name);
  });
  return paths;
}

}  // namespace mfd
