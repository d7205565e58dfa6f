#include "latticebot/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace latticebot {

ALState ALState::initial(double tau0, double anneal) {
  ALState al;
  al.tau.fill(tau0);
  al.anneal = anneal;
  al.validate();
  return al;
}

void ALState::validate() const {
  for (double t : tau) {
    if (!(t > 0.0)) throw std::invalid_argument("AL penalty weights must be positive");
  }
  if (!(anneal > 1.0)) throw std::invalid_argument("AL anneal factor must exceed 1");
}

ALObjective augmented_objective(double l_disp, const Vec4& v, const ALState& al) {
  ALObjective out;
  out.value = l_disp;
  for (int k = 0; k < 4; ++k) {
    out.value += -al.lambda[k] * v[k] + 0.5 * al.tau[k] * v[k] * v[k];
    out.d_violation[k] = -al.lambda[k] + al.tau[k] * v[k];
  }
  return out;
}

ALState update_al(const ALState& al, const Vec4& v) {
  ALState out = al;
  for (int k = 0; k < 4; ++k) {
    out.lambda[k] = al.lambda[k] - al.tau[k] * v[k];
    if (v[k] > al.prev_violations[k]) out.tau[k] = al.tau[k] * al.anneal;
    else if (v[k] < al.prev_violations[k]) out.tau[k] = al.tau[k] / al.anneal;
    out.prev_violations[k] = v[k];
  }
  return out;
}

Vec4 violations(const Vec4& g) {
  Vec4 v;
  for (int k = 0; k < 4; ++k) v[k] = std::max(0.0, g[k]);
  return v;
}

AdamState AdamState::zeros(Eigen::Index n, double lr) {
  AdamState a;
  a.m = Eigen::VectorXd::Zero(n);
  a.v = Eigen::VectorXd::Zero(n);
  a.lr = lr;
  return a;
}

Eigen::VectorXd adam_step(AdamState& adam, const Eigen::VectorXd& grad, const Eigen::VectorXd& theta) {
  if (grad.size() != theta.size() || adam.m.size() != theta.size() || adam.v.size() != theta.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++adam.step;
  adam.m = adam.beta1 * adam.m + (1.0 - adam.beta1) * grad;
  adam.v = adam.beta2 * adam.v + (1.0 - adam.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  Eigen::VectorXd out(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double mh = adam.m(i) / c1;
    const double vh = adam.v(i) / c2;
    out(i) = theta(i) - adam.lr * mh / (std::sqrt(vh) + adam.eps);
  }
  return out;
}

std::string to_string(PassKind kind) {
  switch (kind) {
    case PassKind::controller: return "controller";
    case PassKind::performance: return "performance";
    case PassKind::stability: return "stability";
  }
  return "unknown";
}

PassKind pass_from_string(const std::string& s) {
  if (s == "controller") return PassKind::controller;
  if (s == "performance") return PassKind::performance;
  if (s == "stability") return PassKind::stability;
  throw std::invalid_argument("unknown pass kind: " + s);
}

ScheduleConfig ScheduleConfig::scaled(int total_iters) {
  ScheduleConfig c;
  if (total_iters < 0) throw std::invalid_argument("total_iters must be non-negative");
  const double f = total_iters / 300.0;
  auto sc = [f](int it) { return static_cast<int>(std::lround(it * f)); };
  c.total_iters = total_iters;
  c.attraction_start = sc(c.attraction_start);
  c.snap_iter = sc(c.snap_iter);
  c.grad_ramp_start = sc(c.grad_ramp_start);
  c.grad_ramp_end = sc(c.grad_ramp_end);
  c.vol_relax_start = sc(c.vol_relax_start);
  c.vol_relax_end = sc(c.vol_relax_end);
  return c;
}

void ScheduleConfig::validate() const {
  if (total_iters < 0) throw std::invalid_argument("total_iters must be non-negative");
  if (total_iters > 0 && !(attraction_start <= snap_iter && snap_iter <= total_iters)) {
    throw std::invalid_argument("schedule requires attraction_start <= snap_iter <= total_iters");
  }
  if (grad_ramp_end < grad_ramp_start || vol_relax_end < vol_relax_start) {
    throw std::invalid_argument("ramp intervals must be ordered");
  }
  if (grad_min < 1 || grad_max < grad_min) throw std::invalid_argument("invalid gradient window range");
  if (delta_v_max < 0.0) throw std::invalid_argument("delta_v_max must be non-negative");
  if (design_passes < 0 || controller_passes < 0 || design_passes + controller_passes < 1) {
    throw std::invalid_argument("pass cycle must contain at least one pass");
  }
  if (stability_cadence < 0) throw std::invalid_argument("stability_cadence must be non-negative");
  if (stability_blend < 0.0 || stability_blend > 1.0) throw std::invalid_argument("stability_blend must lie in [0,1]");
  if (bounds.v_min > bounds.v_max || bounds.act_min > bounds.act_max) {
    throw std::invalid_argument("volume bounds must satisfy min <= max");
  }
}

PassKind schedule_pass(int iter, const ScheduleConfig& cfg) {
  if (iter >= cfg.snap_iter) return PassKind::controller;
  const int cycle = cfg.design_passes + cfg.controller_passes;
  const int pos = iter % cycle;
  if (pos >= cfg.design_passes) return PassKind::controller;
  const int zpass = (iter / cycle) * cfg.design_passes + pos;
  if (cfg.stability_cadence > 0 && (zpass + 1) % cfg.stability_cadence == 0) return PassKind::stability;
  return PassKind::performance;
}

namespace {
double ramp(int iter, int start, int end) {
  if (iter <= start) return 0.0;
  if (iter >= end) return 1.0;
  return static_cast<double>(iter - start) / static_cast<double>(end - start);
}
}  // namespace

double delta_v(int iter, const ScheduleConfig& cfg) {
  return cfg.delta_v_max * ramp(iter, cfg.vol_relax_start, cfg.vol_relax_end);
}

VolumeBounds effective_bounds(int iter, const ScheduleConfig& cfg) {
  const double d = delta_v(iter, cfg);
  VolumeBounds b = cfg.bounds;
  b.v_min -= d;
  b.v_max += d;
  b.act_min -= d;
  b.act_max += d;
  return b;
}

int grad_window(int iter, const ScheduleConfig& cfg) {
  const double r = ramp(iter, cfg.grad_ramp_start, cfg.grad_ramp_end);
  return static_cast<int>(std::lround(cfg.grad_min + r * (cfg.grad_max - cfg.grad_min)));
}

NudgeParams nudge_schedule(int iter, const ScheduleConfig& cfg) {
  NudgeParams p;
  if (iter < cfg.attraction_start || iter >= cfg.snap_iter) return p;
  p.active = true;
  const int span = cfg.snap_iter - 1 - cfg.attraction_start;
  const double r = span > 0 ? static_cast<double>(iter - cfg.attraction_start) / span : 1.0;
  p.tau_conf = cfg.nudge_tau_start + r * (cfg.nudge_tau_end - cfg.nudge_tau_start);
  p.gamma = cfg.nudge_gamma_start + r * (cfg.nudge_gamma_end - cfg.nudge_gamma_start);
  return p;
}

}  // namespace latticebot
