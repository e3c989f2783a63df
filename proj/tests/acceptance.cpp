// End-to-end acceptance: prints one PASS/FAIL line per criterion.
// Usage: acceptance <path to the mfd CLI> [--skip-training]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "checks.hpp"
#include "mfd/dataset.hpp"
#include "mfd/evaluate.hpp"
#include "mfd/metrics.hpp"
#include "mfd/net/train.hpp"
#include "mfd/parallel.hpp"
#include "support.hpp"

using namespace mfd;
namespace fs = std::filesystem;

namespace {

using checks::Result;
using Clock = std::chrono::steady_clock;

constexpr int kTrainPairs = 200;
constexpr int kHeldOutPairs = 20;
constexpr int kSide = 64;
constexpr double kTrainBudgetSeconds = 30 * 60;

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void report(const Result& r) { std::cout << checks::format(r) << std::endl; }

// One synthetic scene per pair, one simulated flow per scene.
DatasetManifest make_split(const fs::path& root, const std::string& name, int count, std::uint64_t seed) {
  const fs::path corpus = root / (name + "_corpus");
  write_synthetic_corpus(corpus, count, kSide, kSide, derive_seed(seed, {1}));
  DatasetConfig cfg;
  cfg.dom = FlowDomain(8, 8);
  cfg.sim = SimConfig::defaults(cfg.dom);
  cfg.noise_sigma = 0.005;
  cfg.flows_per_image = 1;
  cfg.include_sharp = false;
  cfg.seed = derive_seed(seed, {2});
  return build_dataset(corpus, root / name, cfg);
}

struct LearningOutcome {
  Result result;
  net::NetworkParams<float> params;
};

LearningOutcome learning_check(const DatasetManifest& train_set, const DatasetManifest& held_out) {
  Result r{5, "learning signal on desk-scale synthetic pairs", false, {}, 0.0};
  const auto t0 = Clock::now();
  const auto samples = load_samples(train_set);
  const net::ArchSpec arch = net::toy_arch(train_set.dom);
  net::TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.momentum = 0.9;
  cfg.epochs = 60;
  cfg.lr_step = 9000;
  cfg.lr_gamma = 0.2;
  cfg.seed = 1;
  cfg.max_seconds = kTrainBudgetSeconds;
  const std::clock_t c0 = std::clock();
  const net::TrainResult tr = net::train(samples, arch, cfg, nullptr, [](const net::EpochStats& s, const auto&) {
    if (s.epoch % 10 == 9)
      std::cerr << "  epoch " << s.epoch + 1 << ", " << s.iterations << " iterations, mean loss " << s.mean_loss
                << ", " << static_cast<long>(s.seconds) << " s" << std::endl;
  });
  const double cpu_minutes = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC / 60.0;

  double est = 0.0, zero = 0.0;
  for (std::size_t k = 0; k < held_out.records.size(); ++k) {
    const net::TrainSample s = load_record(held_out, k);
    est += flow_mse(net::estimate_flow(tr.params, s.blurred, held_out.dom), s.flow);
    zero += flow_mse(MotionFlow(s.flow.height(), s.flow.width()), s.flow);
  }
  est /= static_cast<double>(held_out.records.size());
  zero /= static_cast<double>(held_out.records.size());
  r.seconds = seconds_since(t0);
  r.passed = !tr.diverged && cpu_minutes <= 30.0 && est <= 0.5 * zero;
  r.detail = fmt("held-out flow mse %.3f", est) + fmt(" vs zero flow %.3f", zero) + fmt(", ratio %.3f", est / zero) +
             ", " + std::to_string(tr.iterations) + " iterations (" + tr.stop_reason + ")" +
             fmt(", %.1f CPU-minutes", cpu_minutes);
  return {r, tr.params};
}

Result deblurring_check(const EvalReport& rep) {
  Result r{6, "deblurring gain with ground-truth flow", false, {}, 0.0};
  const EvalMeans& m = rep.means;
  const double psnr_gain = m.psnr_gt_db - m.psnr_blurred;
  const double ssim_gain = m.ssim_gt - m.ssim_blurred;
  r.passed = rep.missing == 0 && rep.records.size() == static_cast<std::size_t>(kHeldOutPairs) && psnr_gain >= 3.0 &&
             ssim_gain >= 0.05 && m.psnr_gt_db >= m.psnr_db;
  r.detail = fmt("psnr %.2f dB", m.psnr_blurred) + fmt(" -> %.2f dB", m.psnr_gt_db) + fmt(" (+%.2f)", psnr_gain) +
             fmt(", ssim gain %+.3f", ssim_gain) + fmt(", estimated-flow deblur %.2f dB", m.psnr_db) + " over " +
             std::to_string(rep.records.size() - rep.missing) + " pairs";
  return r;
}

std::vector<std::uint8_t> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs every CLI stage twice with the same seed and --threads 1 and compares
// all artifacts byte for byte.
Result determinism_check(const std::string& cli, const fs::path& root) {
  Result r{9, "bit-identical artifacts across re-runs", false, {}, 0.0};
  const auto t0 = Clock::now();
  fs::create_directories(root);
  const fs::path config = root / "config.json";
  {
    std::ofstream os(config);
    os << R"({"schema_version": 1, "seed": 3, "dataset": {"flows_per_image": 2, "include_sharp": true},)"
       << R"( "train": {"epochs": 1, "max_iterations": 4, "lr": 0.01}})";
  }
  int failures = 0;
  std::vector<fs::path> dirs;
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    dirs.push_back(d);
    const std::string common = " --config " + config.string() + " --seed 11 --threads 1";
    const std::vector<std::string> steps = {
        "simulate-flow --height 64 --width 64 --index 2 --out " + (d / "flow.mflw").string(),
        "gen-dataset --synthetic 3 --size 64 --out " + (d / "data").string(),
        "render-blur --in " + (d / "data/corpus/scene_00000.png").string() + " --flow " + (d / "flow.mflw").string() +
            " --noise 0.01 --out " + (d / "blurred.png").string(),
        "train --data " + (d / "data").string() + " --report " + (d / "train.json").string() + " --out " +
            (d / "model.mfnn").string(),
        "estimate-flow --model " + (d / "model.mfnn").string() + " --in " + (d / "blurred.png").string() +
            " --png " + (d / "estimate.png").string() + " --out " + (d / "estimate.mflw").string(),
        "deblur --in " + (d / "blurred.png").string() + " --flow " + (d / "flow.mflw").string() + " --report " +
            (d / "deblur.json").string() + " --out " + (d / "deblurred.png").string(),
        "evaluate --data " + (d / "data").string() + " --model " + (d / "model.mfnn").string() +
            " --limit 3 --out " + (d / "report.json").string(),
    };
    for (const auto& s : steps) {
      const std::string cmd = "MFD_LOG=warn \"" + cli + "\" " + s + common;
      if (std::system(cmd.c_str()) != 0) {
        std::cerr << "  command failed: " << cmd << std::endl;
        ++failures;
      }
    }
  }
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::recursive_directory_iterator(dirs[0])) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path other = dirs[1] / fs::relative(e.path(), dirs[0]);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
      std::cerr << "  differs: " << fs::relative(e.path(), dirs[0]).string() << std::endl;
      ++differ;
    }
  }
  std::size_t files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(dirs[1])) files_b += e.is_regular_file();
  r.seconds = seconds_since(t0);
  r.passed = failures == 0 && differ == 0 && files == files_b && files >= 10;
  r.detail = std::to_string(files) + " artifacts from 7 stages, " + std::to_string(differ) + " differ, " +
             std::to_string(failures) + " failed commands";
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <mfd cli> [--skip-training]" << std::endl;
    return 1;
  }
  const std::string cli = argv[1];
  const bool skip_training = argc > 2 && std::string(argv[2]) == "--skip-training";
  set_thread_count(1);
  testing::TempDir tmp("mfd-acceptance");
  std::vector<Result> results;
  const auto run = [&](Result r) {
    report(r);
    results.push_back(std::move(r));
  };

  run(checks::operator_check());
  run(checks::kernel_check());
  run(checks::simulation_check());
  run(checks::gradient_check());

  const DatasetManifest train_set = make_split(tmp.path(), "train", kTrainPairs, 101);
  const DatasetManifest held_out = make_split(tmp.path(), "held_out", kHeldOutPairs, 202);
  std::optional<net::NetworkParams<float>> params;
  if (skip_training) {
    run({5, "learning signal on desk-scale synthetic pairs", false, "skipped", 0.0});
    params = net::init_params<float>(net::toy_arch(held_out.dom), 1);
  } else {
    LearningOutcome lo = learning_check(train_set, held_out);
    run(lo.result);
    params = std::move(lo.params);
  }

  const auto t6 = Clock::now();
  EvalOptions opt;
  const EvalReport rep = evaluate(held_out, network_estimator(*params), opt);
  Result r6 = deblurring_check(rep);
  r6.seconds = seconds_since(t6);
  run(r6);
  run(checks::solver_check(rep.max_objective_increase, 2 * (rep.records.size() - rep.missing)));
  run(checks::metrics_check());
  run(determinism_check(cli, tmp.path() / "determinism"));

  std::sort(results.begin(), results.end(), [](const Result& a, const Result& b) { return a.criterion < b.criterion; });
  int failed = 0;
  std::cout << "summary:";
  for (const auto& r : results) {
    std::cout << ' ' << r.criterion << '=' << (r.passed ? "PASS" : "FAIL");
    failed += !r.passed;
  }
  std::cout << std::endl;
  return failed == 0 ? 0 : 1;
}
