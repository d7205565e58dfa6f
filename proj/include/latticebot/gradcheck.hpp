#pragma once

#include "latticebot/sim.hpp"
#include "latticebot/verify.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace latticebot {

struct GradCheckConfig {
  int theta_coords = 20;
  int z_coords = 10;
  double h_theta = 1e-5;
  double h_z = 1e-4;
  /// Reject coordinates whose contact branches differ at x +- h.
  bool skip_grazing = true;
  int max_attempts_factor = 20;
  double abs_floor = 1e-10;  // denominators below this count as zero gradient
  std::uint64_t seed = 1;
};

struct GradCheckEntry {
  std::string kind;  // "theta" or "z"
  Eigen::Index index = 0;
  double adjoint = 0.0;
  double finite_diff = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double loss = 0.0;
  std::vector<GradCheckEntry> entries;
  int rejected_grazing = 0;
  long contact_events = 0;

  double max_rel_error(const std::string& kind = "") const;
};

/// |a - f| / max(|a|, |f|, floor).
double relative_error(double a, double f, double floor);

/// Compares rollout_grad against central differences of the rollout loss on
/// randomly sampled controller and design coordinates.
GradCheckReport gradient_check(const Robot& robot, const DesignMatrix& z, const Projection& projection,
                               const ControllerParams& theta, const SimConfig& cfg, const GradCheckConfig& gc);

}  // namespace latticebot
