#include "mfd/evaluate.hpp"

#include <algorithm>

#include "mfd/config.hpp"
#include "mfd/digest.hpp"
#include "mfd/io.hpp"
#include "mfd/metrics.hpp"
#include "mfd/parallel.hpp"

namespace mfd {

namespace fs = std::filesystem;

FlowEstimator network_estimator(const net::NetworkParams<float>& params) {
  return [params](std::size_t, const ManifestRecord&, const Image& blurred) {
    return net::estimate_flow(params, blurred, params.arch.domain);
  };
}

FlowEstimator directory_estimator(const fs::path& flows_dir) {
  return [flows_dir](std::size_t, const ManifestRecord& r, const Image&) {
    return read_flow(flows_dir / fs::path(r.flow_path).filename());
  };
}

namespace {

double objective_increase(const DeblurReport& rep) {
  double worst = 0.0;
  for (const auto& obj : rep.objective)
    for (std::size_t k = 1; k < obj.size(); ++k) worst = std::max(worst, obj[k] - obj[k - 1]);
  return worst;
}

}  // namespace

EvalMeans EvalReport::recompute_means() const {
  EvalMeans m;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (r.missing) continue;
    ++n;
    m.flow_mse += r.flow_mse;
    m.zero_flow_mse += r.zero_flow_mse;
    m.psnr_blurred += r.psnr_blurred;
    m.ssim_blurred += r.ssim_blurred;
    m.psnr_db += r.psnr_db;
    m.ssim += r.ssim;
    m.psnr_gt_db += r.psnr_gt_db;
    m.ssim_gt += r.ssim_gt;
  }
  if (n == 0) return m;
  for (double* v : {&m.flow_mse, &m.zero_flow_mse, &m.psnr_blurred, &m.ssim_blurred, &m.psnr_db, &m.ssim,
                    &m.psnr_gt_db, &m.ssim_gt})
    *v /= static_cast<double>(n);
  return m;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json j = {{"index", r.index}, {"blurred_path", r.blurred_path}, {"missing", r.missing}};
    if (r.missing) {
      j["error"] = r.error;
    } else {
      j["flow_mse"] = r.flow_mse;
      j["zero_flow_mse"] = r.zero_flow_mse;
      j["psnr_blurred_db"] = r.psnr_blurred;
      j["ssim_blurred"] = r.ssim_blurred;
      j["psnr_db"] = r.psnr_db;
      j["ssim"] = r.ssim;
      j["psnr_gt_db"] = r.psnr_gt_db;
      j["ssim_gt"] = r.ssim_gt;
      j["max_objective_increase"] = r.max_objective_increase;
    }
    recs.push_back(std::move(j));
  }
  const EvalMeans& m = report.means;
  return {{"format", "mfd-eval-report"},
          {"version", 1},
          {"config_digest", report.config_digest},
          {"config", report.config},
          {"count", report.records.size() - report.missing},
          {"missing", report.missing},
          {"max_objective_increase", report.max_objective_increase},
          {"means",
           {{"flow_mse", m.flow_mse},
            {"zero_flow_mse", m.zero_flow_mse},
            {"psnr_blurred_db", m.psnr_blurred},
            {"ssim_blurred", m.ssim_blurred},
            {"psnr_db", m.psnr_db},
            {"ssim", m.ssim},
            {"psnr_gt_db", m.psnr_gt_db},
            {"ssim_gt", m.ssim_gt}}},
          {"records", recs}};
}

EvalReport evaluate(const DatasetManifest& manifest, const FlowEstimator& estimator, const EvalOptions& options) {
  if (manifest.records.empty()) throw ParameterError("evaluate: manifest has no records");
  options.deconv.validate();
  std::size_t n = manifest.records.size();
  if (options.limit > 0) n = std::min(n, options.limit);
  if (!options.outputs_dir.empty()) fs::create_directories(options.outputs_dir);

  EvalReport report;
  report.config = {{"deconv", options.deconv},
                   {"deblur", options.deblur},
                   {"gt_reference", options.gt_reference},
                   {"limit", options.limit},
                   {"skip_zero_flow", options.skip_zero_flow},
                   {"manifest_config_digest", manifest.config_digest}};
  report.config_digest = json_digest(report.config);
  report.records.resize(n);
  std::vector<char> skip(n, 0);

  parallel_for(0, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t kk) {
    const auto k = static_cast<std::size_t>(kk);
    const ManifestRecord& rec = manifest.records[k];
    EvalRecord& out = report.records[k];
    out.index = k;
    out.blurred_path = rec.blurred_path;
    try {
      const net::TrainSample s = load_record(manifest, k);
      if (options.skip_zero_flow && (s.flow.u() == 0).all() && (s.flow.v() == 0).all()) {
        skip[k] = 1;
        return;
      }
      Image sharp = load_image(manifest.resolve(rec.sharp_path));
      if (sharp.channels() == 1) sharp = Image::from_planes({sharp.plane(0), sharp.plane(0), sharp.plane(0)});
      const MotionFlow est = estimator(k, rec, s.blurred);
      out.flow_mse = flow_mse(est, s.flow);
      out.zero_flow_mse = flow_mse(MotionFlow(s.flow.height(), s.flow.width()), s.flow);
      out.psnr_blurred = report_psnr(psnr(s.blurred, sharp));
      out.ssim_blurred = ssim(s.blurred, sharp);
      const std::string stem = fs::path(rec.blurred_path).stem().string();
      if (!options.outputs_dir.empty()) write_flow(est, options.outputs_dir / (stem + ".mflw"));
      if (options.deblur) {
        const DeblurReport d = deblur_detailed(s.blurred, est, options.deconv);
        out.psnr_db = report_psnr(psnr(d.image, sharp));
        out.ssim = ssim(d.image, sharp);
        out.max_objective_increase = std::max(out.max_objective_increase, objective_increase(d));
        if (!options.outputs_dir.empty()) save_image(d.image, options.outputs_dir / (stem + "_deblurred.png"));
      }
      if (options.gt_reference) {
        const DeblurReport d = deblur_detailed(s.blurred, s.flow, options.deconv);
        out.psnr_gt_db = report_psnr(psnr(d.image, sharp));
        out.ssim_gt = ssim(d.image, sharp);
        out.max_objective_increase = std::max(out.max_objective_increase, objective_increase(d));
      }
    } catch (const std::exception& e) {
      out.missing = true;
      out.error = e.what();
    }
  });

  std::vector<EvalRecord> kept;
  for (std::size_t k = 0; k < n; ++k)
    if (!skip[k]) kept.push_back(std::move(report.records[k]));
  report.records = std::move(kept);
  for (const auto& r : report.records) {
    report.missing += r.missing;
    report.max_objective_increase = std::max(report.max_objective_increase, r.max_objective_increase);
  }
  if (report.records.empty()) throw ParameterError("evaluate: no records left to evaluate");
  report.means = report.recompute_means();
  return report;
}

}  // namespace mfd
