#pragma once

#include <string>
#include <vector>

#include "mfd/deconv.hpp"

namespace mfd::checks {

struct Result {
  int criterion = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Adjoint identity on random 16x16 instances and dense-matrix equivalence on 12x12.
Result operator_check();
/// Unit mass, symmetry under negation and folding, analytic horizontal cases
/// and the sub-sampling reference over dom(8,8).
Result kernel_check();
/// Closed forms of every generator, domain closure and fold properties.
Result simulation_check();
/// Finite differences for every layer type and the full toy network.
Result gradient_check();
/// CG against dense direct solves plus a monotone objective: `max_rise` is
/// the largest single-step objective increase seen over `runs` deconvolutions.
Result solver_check(double max_rise, std::size_t runs);
/// Analytic PSNR, SSIM and flow MSE cases.
Result metrics_check();

/// Small deconvolution runs used when no end-to-end runs are available.
std::vector<DeblurReport> small_deblur_runs();

/// Largest single-step rise of the objective over all channels of all runs.
double max_objective_increase(const std::vector<DeblurReport>& runs);

/// Criteria that finish in seconds to a few minutes.
std::vector<Result> quick_suite();

std::string format(const Result& r);

}  // namespace mfd::checks
