#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "checks.hpp"
#include "mfd/blur.hpp"
#include "mfd/config.hpp"
#include "mfd/dataset.hpp"
#include "mfd/deconv.hpp"
#include "mfd/digest.hpp"
#include "mfd/errors.hpp"
#include "mfd/evaluate.hpp"
#include "mfd/flowsim.hpp"
#include "mfd/io.hpp"
#include "mfd/metrics.hpp"
#include "mfd/net/checkpoint.hpp"
#include "mfd/net/train.hpp"
#include "mfd/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised for invalid user input found after argument parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("mfd");
  logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("MFD_LOG")) {
    const std::string s = env;
    const auto level = spdlog::level::from_str(s);
    if (level == spdlog::level::off && s != "off")
      spdlog::warn("MFD_LOG: unknown level '{}', keeping info", s);
    else
      spdlog::set_level(level);
  }
}

mfd::PipelineConfig resolve_config(const Globals& g) {
  mfd::PipelineConfig cfg;
  if (!g.config.empty()) {
    try {
      cfg = mfd::load_pipeline_config(g.config);
    } catch (const mfd::ParameterError& e) {
      throw UsageError(e.what());
    }
    spdlog::debug("config {} loaded", g.config);
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  mfd::set_thread_count(cfg.threads);
  spdlog::debug("seed {} threads {}", cfg.seed, cfg.threads);
  return cfg;
}

const std::string& require_out(const Globals& g) {
  if (g.out.empty()) throw UsageError("--out is required");
  return g.out;
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw mfd::IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw mfd::IoError("cannot write " + path.string());
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

struct SimulateArgs {
  int height = 256;
  int width = 256;
  std::uint64_t index = 0;
  std::string png;
};

int run_simulate(const Globals& g, const SimulateArgs& a) {
  const auto cfg = resolve_config(g);
  const fs::path out = require_out(g);
  const mfd::MotionFlow flow =
      mfd::simulate_flow_indexed(a.height, a.width, cfg.dom, cfg.sim_for_run(), a.index);
  ensure_parent(out);
  mfd::write_flow(flow, out);
  const fs::path png = a.png.empty() ? fs::path(out).replace_extension(".png") : fs::path(a.png);
  mfd::save_image(mfd::colorize_flow(flow, cfg.dom), png);
  spdlog::info("flow {}x{} written to {} and {}", a.width, a.height, out.string(), png.string());
  return 0;
}

struct RenderArgs {
  std::string in;
  std::string flow;
  double noise = 0.0;
};

int run_render(const Globals& g, const RenderArgs& a) {
  const auto cfg = resolve_config(g);
  const fs::path out = require_out(g);
  const mfd::Image x = mfd::load_image(a.in);
  const mfd::MotionFlow flow = mfd::read_flow(a.flow);
  mfd::Image y = mfd::apply_blur(x, flow);
  if (a.noise > 0.0) y = mfd::add_noise(y, {a.noise, mfd::derive_seed(cfg.seed, {0x6e6f697365ull})});
  ensure_parent(out);
  mfd::save_image(y, out);
  spdlog::info("blurred image written to {}", out.string());
  return 0;
}

struct DatasetArgs {
  std::string corpus;
  int synthetic = 0;
  int size = 64;
};

int run_gen_dataset(const Globals& g, const DatasetArgs& a) {
  const auto cfg = resolve_config(g);
  const fs::path out = require_out(g);
  fs::path corpus = a.corpus;
  if (a.synthetic > 0) {
    if (!a.corpus.empty()) throw UsageError("--corpus and --synthetic are exclusive");
    corpus = out / "corpus";
    mfd::write_synthetic_corpus(corpus, a.synthetic, a.size, a.size, mfd::derive_seed(cfg.seed, {0x636f72707573ull}));
    spdlog::info("{} synthetic scenes written to {}", a.synthetic, corpus.string());
  } else if (a.corpus.empty()) {
    throw UsageError("gen-dataset needs --corpus or --synthetic");
  }
  const mfd::DatasetManifest m = mfd::build_dataset(corpus, out, cfg.dataset_for_run());
  spdlog::info("{} records written to {}", m.records.size(), (out / "manifest.jsonl").string());
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string init;
  std::string report;
};

int run_train(const Globals& g, const TrainArgs& a) {
  const auto cfg = resolve_config(g);
  const fs::path out = require_out(g);
  const mfd::DatasetManifest manifest = mfd::DatasetManifest::load(a.data);
  const mfd::net::ArchSpec arch = mfd::net::preset_arch(cfg.arch_preset, manifest.dom);
  if (!(manifest.dom == cfg.dom)) spdlog::warn("using the dataset's flow domain, not the configured one");
  const auto samples = mfd::load_samples(manifest);
  std::optional<mfd::net::NetworkParams<float>> init;
  if (!a.init.empty()) init = mfd::net::load_checkpoint(a.init, &arch);
  const auto tcfg = cfg.train_for_run();
  spdlog::info("training {} preset on {} samples", cfg.arch_preset, samples.size());
  const auto result = mfd::net::train(samples, arch, tcfg, init ? &*init : nullptr,
                                      [](const mfd::net::EpochStats& s, const mfd::net::NetworkParams<float>&) {
                                        spdlog::info("epoch {} iterations {} mean loss {:.5f} ({:.1f} s)", s.epoch,
                                                     s.iterations, s.mean_loss, s.seconds);
                                      });
  ensure_parent(out);
  mfd::net::save_checkpoint(result.params, out);
  spdlog::info("checkpoint written to {} ({})", out.string(), result.stop_reason);
  if (!a.report.empty()) {
    json epochs = json::array();
    for (const auto& e : result.epochs)
      epochs.push_back({{"epoch", e.epoch}, {"iterations", e.iterations}, {"mean_loss", e.mean_loss}});
    write_json({{"format", "mfd-train-report"},
                {"version", 1},
                {"config", tcfg},
                {"arch_digest", arch.digest()},
                {"manifest_config_digest", manifest.config_digest},
                {"iterations", result.iterations},
                {"stop_reason", result.stop_reason},
                {"diverged", result.diverged},
                {"epochs", epochs}},
               a.report);
  }
  if (result.diverged) {
    spdlog::error("training diverged after {} iterations", result.iterations);
    return 2;
  }
  return 0;
}

struct EstimateArgs {
  std::string model;
  std::string in;
  std::string png;
};

int run_estimate(const Globals& g, const EstimateArgs& a) {
  const auto cfg = resolve_config(g);
  const fs::path out = require_out(g);
  const auto params = mfd::net::load_checkpoint(a.model);
  const mfd::Image y = mfd::load_image(a.in);
  const mfd::MotionFlow flow = mfd::net::estimate_flow(params, y, params.arch.domain);
  ensure_parent(out);
  mfd::write_flow(flow, out);
  if (!a.png.empty()) mfd::save_image(mfd::colorize_flow(flow, params.arch.domain), a.png);
  spdlog::info("flow estimate written to {}", out.string());
  (void)cfg;
  return 0;
}

struct DeblurArgs {
  std::string in;
  std::string flow;
  std::string report;
};

int run_deblur(const Globals& g, const DeblurArgs& a) {
  const auto cfg = resolve_config(g);
  const fs::path out = require_out(g);
  const mfd::Image y = mfd::load_image(a.in);
  const mfd::MotionFlow flow = mfd::read_flow(a.flow);
  const mfd::DeblurReport rep = mfd::deblur_detailed(y, flow, cfg.deconv);
  ensure_parent(out);
  mfd::save_image(rep.image, out);
  spdlog::info("deblurred image written to {} after {} outer iterations", out.string(), rep.outer_iterations);
  if (!a.report.empty())
    write_json({{"format", "mfd-deblur-report"},
                {"version", 1},
                {"config", cfg.deconv},
                {"outer_iterations", rep.outer_iterations},
                {"cg_iterations", rep.cg_iterations},
                {"objective", rep.objective}},
               a.report);
  return 0;
}

struct EvaluateArgs {
  std::string data;
  std::string model;
  std::string flows;
  std::string outputs;
  std::size_t limit = 0;
  bool skip_zero = false;
  bool no_deblur = false;
};

int run_evaluate(const Globals& g, const EvaluateArgs& a) {
  const auto cfg = resolve_config(g);
  const fs::path out = require_out(g);
  if (a.model.empty() == a.flows.empty()) throw UsageError("evaluate needs exactly one of --model and --flows");
  const mfd::DatasetManifest manifest = mfd::DatasetManifest::load(a.data);
  std::optional<mfd::net::NetworkParams<float>> params;
  mfd::FlowEstimator estimator;
  if (!a.model.empty()) {
    params = mfd::net::load_checkpoint(a.model);
    estimator = mfd::network_estimator(*params);
  } else {
    estimator = mfd::directory_estimator(a.flows);
  }
  mfd::EvalOptions opt;
  opt.deconv = cfg.deconv;
  opt.deblur = !a.no_deblur;
  opt.limit = a.limit;
  opt.skip_zero_flow = a.skip_zero;
  opt.outputs_dir = a.outputs;
  const mfd::EvalReport report = mfd::evaluate(manifest, estimator, opt);
  write_json(mfd::to_json(report), out);
  const auto& m = report.means;
  spdlog::info("{} records ({} missing): flow mse {:.4f} (zero flow {:.4f}), psnr {:.2f} dB -> {:.2f} dB "
               "(ground truth {:.2f} dB)",
               report.records.size() - report.missing, report.missing, m.flow_mse, m.zero_flow_mse,
               m.psnr_blurred, m.psnr_db, m.psnr_gt_db);
  return report.missing == 0 ? 0 : 2;
}

int run_selftest(const Globals& g) {
  resolve_config(g);
  bool ok = true;
  for (const auto& r : mfd::checks::quick_suite()) {
    std::cout << mfd::checks::format(r) << std::endl;
    ok = ok && r.passed;
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Heterogeneous motion blur: flow simulation, estimation and non-blind deblurring", "mfd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mfd 1.0");
  Globals g;
  app.add_option("--config", g.config, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Global seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads, 0 = all cores; 1 is bit-deterministic");
  app.add_option("--out", g.out, "Output file or directory");

  auto* sim = app.add_subcommand("simulate-flow", "Simulate a motion flow (MFLW plus colorized PNG)");
  sim->fallthrough();
  SimulateArgs sa;
  sim->add_option("--height", sa.height)->check(CLI::PositiveNumber);
  sim->add_option("--width", sa.width)->check(CLI::PositiveNumber);
  sim->add_option("--index", sa.index, "Draw index within the seeded sequence");
  sim->add_option("--png", sa.png, "Colorized flow (default: --out with .png)");

  auto* render = app.add_subcommand("render-blur", "Blur a sharp image with a motion flow");
  render->fallthrough();
  RenderArgs ra;
  render->add_option("--in", ra.in, "Sharp PNG")->required()->check(CLI::ExistingFile);
  render->add_option("--flow", ra.flow, "MFLW flow")->required()->check(CLI::ExistingFile);
  render->add_option("--noise", ra.noise, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);

  auto* gen = app.add_subcommand("gen-dataset", "Generate blurred/flow pairs and manifest.jsonl");
  gen->fallthrough();
  DatasetArgs da;
  gen->add_option("--corpus", da.corpus, "Directory of sharp PNGs")->check(CLI::ExistingDirectory);
  gen->add_option("--synthetic", da.synthetic, "Write this many synthetic scenes and use them")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--size", da.size, "Side of synthetic scenes")->check(CLI::PositiveNumber);

  auto* tr = app.add_subcommand("train", "Train the flow network on a dataset");
  tr->fallthrough();
  TrainArgs ta;
  tr->add_option("--data", ta.data, "Dataset directory or manifest")->required();
  tr->add_option("--init", ta.init, "Starting checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--report", ta.report, "Training report JSON");

  auto* est = app.add_subcommand("estimate-flow", "Estimate the motion flow of a blurred image");
  est->fallthrough();
  EstimateArgs ea;
  est->add_option("--model", ea.model, "MFNN checkpoint")->required()->check(CLI::ExistingFile);
  est->add_option("--in", ea.in, "Blurred PNG")->required()->check(CLI::ExistingFile);
  est->add_option("--png", ea.png, "Colorized flow");

  auto* deb = app.add_subcommand("deblur", "Non-blind deconvolution with a given flow");
  deb->fallthrough();
  DeblurArgs dba;
  deb->add_option("--in", dba.in, "Blurred PNG")->required()->check(CLI::ExistingFile);
  deb->add_option("--flow", dba.flow, "MFLW flow")->required()->check(CLI::ExistingFile);
  deb->add_option("--report", dba.report, "Solver report JSON");

  auto* ev = app.add_subcommand("evaluate", "Score flow estimates and deblurring on a dataset");
  ev->fallthrough();
  EvaluateArgs eva;
  ev->add_option("--data", eva.data, "Dataset directory or manifest")->required();
  ev->add_option("--model", eva.model, "MFNN checkpoint")->check(CLI::ExistingFile);
  ev->add_option("--flows", eva.flows, "Directory of precomputed MFLW flows")->check(CLI::ExistingDirectory);
  ev->add_option("--outputs", eva.outputs, "Write estimated flows and deblurred images here");
  ev->add_option("--limit", eva.limit, "Evaluate only the first N records");
  ev->add_flag("--skip-zero-flow", eva.skip_zero, "Ignore records whose ground truth is the zero flow");
  ev->add_flag("--no-deblur", eva.no_deblur, "Score flows only");

  auto* self = app.add_subcommand("selftest", "Run the operator, kernel, simulation, gradient, solver and metric checks");
  self->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*sim) return run_simulate(g, sa);
    if (*render) return run_render(g, ra);
    if (*gen) return run_gen_dataset(g, da);
    if (*tr) return run_train(g, ta);
    if (*est) return run_estimate(g, ea);
    if (*deb) return run_deblur(g, dba);
    if (*ev) return run_evaluate(g, eva);
    if (*self) return run_selftest(g);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    std::cerr << app.help() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
