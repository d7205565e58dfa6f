#pragma once

#include <Eigen/Core>

#include <array>
#include <string>

namespace latticebot {

using Vec4 = std::array<double, 4>;

/// Augmented Lagrangian bookkeeping for the four binarization constraints.
struct ALState {
  Vec4 lambda{};
  Vec4 tau{0.3, 0.3, 0.3, 0.3};
  double anneal = 1.01;
  Vec4 prev_violations{};

  static ALState initial(double tau0 = 0.3, double anneal = 1.01);
  void validate() const;
};

struct ALObjective {
  double value = 0.0;
  Vec4 d_violation{};  // dL/dv_k = -lambda_k + tau_k v_k
};

/// L = L_disp + sum_k (-lambda_k v_k + tau_k v_k^2 / 2).
ALObjective augmented_objective(double l_disp, const Vec4& v, const ALState& al);

/// lambda <- lambda - tau v; tau scaled by a (or 1/a) when v grew (or shrank).
ALState update_al(const ALState& al, const Vec4& v);

/// Clamps raw constraint values to violations max(0, g).
Vec4 violations(const Vec4& g);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(Eigen::Index n, double lr = 3e-3);
};

/// Bias-corrected Adam; advances `adam` and returns the new parameters.
Eigen::VectorXd adam_step(AdamState& adam, const Eigen::VectorXd& grad, const Eigen::VectorXd& theta);

enum class PassKind { controller, performance, stability };

std::string to_string(PassKind kind);
PassKind pass_from_string(const std::string& s);

struct VolumeBounds {
  double v_min = 0.5;
  double v_max = 0.5;
  double act_min = 0.20;
  double act_max = 0.22;
};

struct ScheduleConfig {
  int total_iters = 300;
  int attraction_start = 170;
  int snap_iter = 240;

  int grad_ramp_start = 80;
  int grad_ramp_end = 150;
  int grad_min = 2048;
  int grad_max = 4096;

  int vol_relax_start = 110;
  int vol_relax_end = 150;
  double delta_v_max = 0.03;

  int design_passes = 3;      // per cycle
  int controller_passes = 2;  // per cycle
  int stability_cadence = 3;  // every k-th design pass; 0 disables
  double stability_blend = 0.5;

  VolumeBounds bounds;

  double nudge_tau_start = 0.90;
  double nudge_tau_end = 0.55;
  double nudge_gamma_start = 0.01;
  double nudge_gamma_end = 0.05;

  /// Default schedule with every iteration mark scaled by total_iters / 300.
  static ScheduleConfig scaled(int total_iters);
  void validate() const;
};

PassKind schedule_pass(int iter, const ScheduleConfig& cfg);

double delta_v(int iter, const ScheduleConfig& cfg);

/// Bounds widened by delta_v(iter) on each side.
VolumeBounds effective_bounds(int iter, const ScheduleConfig& cfg);

int grad_window(int iter, const ScheduleConfig& cfg);

struct NudgeParams {
  bool active = false;
  double tau_conf = 0.0;
  double gamma = 0.0;
};

/// Linear annealing over [attraction_start, snap_iter).
NudgeParams nudge_schedule(int iter, const ScheduleConfig& cfg);

}  // namespace latticebot
