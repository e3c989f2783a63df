#include "mfd/config.hpp"

#include <fstream>

#include "mfd/errors.hpp"

namespace mfd {

namespace {

using json = nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParameterError(where + ": expected a JSON object");
}

template <typename T>
T get_as(const json& v, const std::string& where) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ParameterError(where + ": expected a boolean");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw ParameterError(where + ": expected a nonnegative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ParameterError(where + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ParameterError(where + ": expected a number");
    } else {
      if (!v.is_string()) throw ParameterError(where + ": expected a string");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ParameterError(where + ": " + e.what());
  }
}

}  // namespace

void to_json(json& j, const DeconvConfig& c) {
  j = {{"alpha", c.alpha},
       {"lambda", c.lambda},
       {"beta0", c.beta0},
       {"beta_multiplier", c.beta_multiplier},
       {"beta_max", c.beta_max},
       {"cg_tol", c.cg_tol},
       {"cg_max_iters", c.cg_max_iters},
       {"channels", c.channels == ChannelStrategy::luminance ? "luminance" : "per_channel"}};
}

DeconvConfig deconv_config_from_json(const json& j) {
  require_object(j, "deconv");
  DeconvConfig c;
  for (const auto& [key, v] : j.items()) {
    const std::string where = "deconv." + key;
    if (key == "alpha") c.alpha = get_as<double>(v, where);
    else if (key == "lambda") c.lambda = get_as<double>(v, where);
    else if (key == "beta0") c.beta0 = get_as<double>(v, where);
    else if (key == "beta_multiplier") c.beta_multiplier = get_as<double>(v, where);
    else if (key == "beta_max") c.beta_max = get_as<double>(v, where);
    else if (key == "cg_tol") c.cg_tol = get_as<double>(v, where);
    else if (key == "cg_max_iters") c.cg_max_iters = get_as<int>(v, where);
    else if (key == "channels") {
      const auto s = get_as<std::string>(v, where);
      if (s == "per_channel") c.channels = ChannelStrategy::per_channel;
      else if (s == "luminance") c.channels = ChannelStrategy::luminance;
      else throw ParameterError(where + ": expected \"per_channel\" or \"luminance\"");
    } else {
      throw ParameterError("deconv: unknown key \"" + key + "\"");
    }
  }
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  sim.validate(dom, std::max(1, 2 * (dom.u_max() + dom.v_max())), std::max(1, 2 * (dom.u_max() + dom.v_max())));
  if (!(noise_sigma >= 0.0)) throw ParameterError("noise.sigma must be >= 0");
  dataset_for_run().validate();
  train.validate();
  deconv.validate();
  (void)arch();
}

SimConfig PipelineConfig::sim_for_run() const {
  SimConfig s = sim;
  s.seed = derive_seed(seed, {0x73696dull});
  return s;
}

net::TrainConfig PipelineConfig::train_for_run() const {
  net::TrainConfig t = train;
  t.seed = derive_seed(seed, {0x747261696eull});
  return t;
}

DatasetConfig PipelineConfig::dataset_for_run() const {
  DatasetConfig d;
  d.dom = dom;
  d.sim = sim;
  d.noise_sigma = noise_sigma;
  d.flows_per_image = flows_per_image;
  d.include_sharp = include_sharp;
  d.crop = crop;
  d.seed = derive_seed(seed, {0x64617461ull});
  return d;
}

void to_json(json& j, const PipelineConfig& c) {
  json train = c.train;
  train.erase("seed");  // derived from the global seed
  json sim = c.sim;
  sim.erase("seed");
  j = {{"schema_version", kConfigSchemaVersion},
       {"seed", c.seed},
       {"threads", c.threads},
       {"domain", {{"u_max", c.dom.u_max()}, {"v_max", c.dom.v_max()}}},
       {"sim", sim},
       {"noise", {{"sigma", c.noise_sigma}}},
       {"dataset", {{"flows_per_image", c.flows_per_image}, {"include_sharp", c.include_sharp}, {"crop", c.crop}}},
       {"net", {{"preset", c.arch_preset}}},
       {"train", train},
       {"deconv", c.deconv}};
}

PipelineConfig pipeline_config_from_json(const json& j) {
  require_object(j, "config");
  PipelineConfig c;
  if (!j.contains("schema_version")) throw ParameterError("config: missing schema_version");
  const int version = get_as<int>(j.at("schema_version"), "schema_version");
  if (version != kConfigSchemaVersion)
    throw ParameterError("config: unsupported schema_version " + std::to_string(version) + " (expected " +
                         std::to_string(kConfigSchemaVersion) + ")");

  // The domain shapes the sim defaults, so it is read first.
  if (j.contains("domain")) {
    const json& d = j.at("domain");
    require_object(d, "domain");
    int u = c.dom.u_max(), v = c.dom.v_max();
    for (const auto& [key, val] : d.items()) {
      if (key == "u_max") u = get_as<int>(val, "domain.u_max");
      else if (key == "v_max") v = get_as<int>(val, "domain.v_max");
      else throw ParameterError("domain: unknown key \"" + key + "\"");
    }
    c.dom = FlowDomain(u, v);
  }
  c.sim = SimConfig::defaults(c.dom);

  for (const auto& [key, v] : j.items()) {
    if (key == "schema_version" || key == "domain") continue;
    if (key == "seed") c.seed = get_as<std::uint64_t>(v, "seed");
    else if (key == "threads") c.threads = get_as<unsigned>(v, "threads");
    else if (key == "sim") {
      require_object(v, "sim");
      if (v.contains("seed")) throw ParameterError("sim.seed: set the global seed instead");
      c.sim = sim_config_from_json(v, c.dom);
    } else if (key == "noise") {
      require_object(v, "noise");
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "sigma") c.noise_sigma = get_as<double>(v2, "noise.sigma");
        else throw ParameterError("noise: unknown key \"" + k2 + "\"");
      }
    } else if (key == "dataset") {
      require_object(v, "dataset");
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "flows_per_image") c.flows_per_image = get_as<int>(v2, "dataset.flows_per_image");
        else if (k2 == "include_sharp") c.include_sharp = get_as<bool>(v2, "dataset.include_sharp");
        else if (k2 == "crop") c.crop = get_as<int>(v2, "dataset.crop");
        else throw ParameterError("dataset: unknown key \"" + k2 + "\"");
      }
    } else if (key == "net") {
      require_object(v, "net");
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "preset") c.arch_preset = get_as<std::string>(v2, "net.preset");
        else throw ParameterError("net: unknown key \"" + k2 + "\"");
      }
    } else if (key == "train") {
      require_object(v, "train");
      if (v.contains("seed")) throw ParameterError("train.seed: set the global seed instead");
      c.train = net::train_config_from_json(v);
    } else if (key == "deconv") {
      c.deconv = deconv_config_from_json(v);
    } else {
      throw ParameterError("config: unknown key \"" + key + "\"");
    }
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParameterError("config " + path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

}  // namespace mfd
