#include "latticebot/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace latticebot {

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be at least 1");
  if (grad_steps < 1) throw std::invalid_argument("grad_steps must be positive");
  if (damping < 0.0) throw std::invalid_argument("damping must be non-negative");
  if (friction.mu < 0.0) throw std::invalid_argument("friction coefficient must be non-negative");
  if (checkpoint_stride < 1) throw std::invalid_argument("checkpoint_stride must be at least 1");
  if (!(slack_stiffness >= 0.0)) throw std::invalid_argument("slack_stiffness must be non-negative");
  if (!(adjoint_clip >= 0.0)) throw std::invalid_argument("adjoint_clip must be non-negative");
  ground.validate();
}

PhysicalDesign make_physical_design(const Robot& robot, const StateRatios& ztilde) {
  const auto& lat = robot.lattice;
  if (ztilde.rows() != lat.num_edges()) throw std::invalid_argument("state ratio rows must match edge count");
  PhysicalDesign d;
  d.stiffness = ztilde * robot.lib.psi().col(MaterialLibrary::kStiffness);
  d.actuation = ztilde.col(kActuator) * robot.lib.actuator_strain();
  d.mass = node_masses(lat, ztilde, robot.lib, robot.mass);
  return d;
}

SimState rest_state(const LatticeSpec& lattice) {
  SimState s;
  s.x = lattice.nodes;
  s.v.assign(lattice.nodes.size(), Vec2::Zero());
  s.t = 0.0;
  return s;
}

namespace {

struct NodeTrace {
  bool contact = false;
  bool clamped = false;
  bool sliding = false;
  bool projected = false;
  Vec2 normal = Vec2::Zero();
  Vec2 tangent = Vec2::Zero();
  Vec2 vstar = Vec2::Zero();
  Vec2 v_post = Vec2::Zero();
  Vec2 end_normal = Vec2::Zero();
  double d_prev = 0.0;
  double vn = 0.0;
  double vt = 0.0;
  double toi = 0.0;
};

struct StepTrace {
  MlpActivations acts;
  Eigen::VectorXd strain;
  std::vector<double> length;
  std::vector<Vec2> dir;
  Eigen::VectorXd force;
  std::vector<Vec2> impulse;
  std::vector<NodeTrace> nodes;
};

ContactResult contact_node(const Vec2& x, const Vec2& vstar, const SimConfig& cfg, NodeTrace* tr) {
  const double dt = cfg.dt;
  ContactResult r;
  const Vec2 x_tent = x + vstar * dt;
  if (tr) tr->vstar = vstar;
  if (!cfg.ground_contact) {
    r.x_toi = x_tent;
    r.v_post = vstar;
    r.x_end = x_tent;
    r.toi = dt;
    return r;
  }
  const SurfaceFrame frame = cfg.ground.frame_at(x_tent.x());
  if (frame.signed_distance(x_tent) >= 0.0) {
    r.x_toi = x_tent;
    r.v_post = vstar;
    r.x_end = x_tent;
    r.toi = dt;
    return r;
  }

  r.contact = true;
  const double d_prev = frame.signed_distance(x);
  const double vn = frame.normal.dot(vstar);
  const double vt = frame.tangent.dot(vstar);
  bool clamped = true;
  double toi = 0.0;
  if (vn < 0.0) {
    const double raw = -d_prev / vn;
    toi = std::clamp(raw, 0.0, dt);
    clamped = toi != raw;
  }
  Vec2 x_toi = x + vstar * toi;
  x_toi -= frame.normal * frame.signed_distance(x_toi);

  double vt_post = 0.0;
  bool sliding = false;
  if (cfg.friction.kind == FrictionKind::coulomb) {
    const double slip = cfg.friction.mu * std::abs(vn);
    if (std::abs(vt) > slip) {
      sliding = true;
      vt_post = vt - slip * (vt > 0.0 ? 1.0 : -1.0);
    }
  }
  const Vec2 v_post = frame.tangent * vt_post;
  Vec2 x_end = x_toi + v_post * (dt - toi);

  bool projected = false;
  SurfaceFrame end_frame = cfg.ground.frame_at(x_end.x());
  const double d_end = end_frame.signed_distance(x_end);
  if (d_end < 0.0) {
    projected = true;
    x_end -= end_frame.normal * d_end;
  }

  r.toi = toi;
  r.x_toi = x_toi;
  r.v_post = v_post;
  r.x_end = x_end;
  if (tr) {
    tr->contact = true;
    tr->clamped = clamped;
    tr->sliding = sliding;
    tr->projected = projected;
    tr->normal = frame.normal;
    tr->tangent = frame.tangent;
    tr->v_post = v_post;
    tr->end_normal = end_frame.normal;
    tr->d_prev = d_prev;
    tr->vn = vn;
    tr->vt = vt;
    tr->toi = toi;
  }
  return r;
}

// Reverse of contact_node: consumes adjoints of (x_end, v_end), adds to those
// of the start position and returns the adjoint of v*.
Vec2 contact_node_vjp(const NodeTrace& tr, const SimConfig& cfg, const Vec2& ax_end_in, const Vec2& av_end, Vec2& ax) {
  const double dt = cfg.dt;
  if (!tr.contact) {
    ax += ax_end_in;
    return ax_end_in * dt + av_end;
  }
  Vec2 ax_end = ax_end_in;
  if (tr.projected) ax_end -= tr.end_normal * tr.end_normal.dot(ax_end);

  const Vec2 av_post = av_end + ax_end * (dt - tr.toi);
  double atoi = -ax_end.dot(tr.v_post);
  Vec2 ax_toi = ax_end - tr.normal * tr.normal.dot(ax_end);

  ax += ax_toi;
  Vec2 avstar = ax_toi * tr.toi;
  atoi += ax_toi.dot(tr.vstar);

  if (tr.sliding) {
    const double s = tr.vt > 0.0 ? 1.0 : -1.0;
    const double sn = tr.vn > 0.0 ? 1.0 : (tr.vn < 0.0 ? -1.0 : 0.0);
    const Vec2 dvt = tr.tangent - cfg.friction.mu * s * sn * tr.normal;
    avstar += dvt * tr.tangent.dot(av_post);
  }
  if (!tr.clamped) {
    ax += atoi * (-tr.normal / tr.vn);
    avstar += atoi * (tr.d_prev / (tr.vn * tr.vn)) * tr.normal;
  }
  return avstar;
}

double max_speed(const std::vector<Vec2>& v) {
  double m = 0.0;
  for (const auto& vi : v) m = std::max(m, vi.norm());
  return m;
}

void check_finite(const SimState& s, int step) {
  for (size_t i = 0; i < s.x.size(); ++i) {
    if (!s.x[i].allFinite() || !s.v[i].allFinite()) throw SimulationDiverged(step, max_speed(s.v));
  }
}

void accumulate_edges(const LatticeSpec& lat, const SimState& s, const Eigen::VectorXd& stiffness,
                      const Eigen::VectorXd& strain, double dt, double min_length, double slack_stiffness, int step,
                      StepTrace& tr) {
  const int ne = lat.num_edges();
  tr.length.resize(ne);
  tr.dir.resize(ne);
  tr.force.resize(ne);
  tr.impulse.assign(s.x.size(), Vec2::Zero());
  for (int e = 0; e < ne; ++e) {
    const auto [i, j] = lat.edges[e];
    const Vec2 d = s.x[j] - s.x[i];
    const double l = d.norm();
    if (!(l >= min_length)) {
      if (!(stiffness(e) <= slack_stiffness)) throw DegenerateGeometry(step, e, l);
      tr.length[e] = -1.0;
      tr.dir[e] = Vec2::Zero();
      tr.force(e) = 0.0;
      continue;
    }
    const Vec2 u = d / l;
    const double f = stiffness(e) * (l - lat.rest_lengths[e] * (1.0 + strain(e)));
    tr.length[e] = l;
    tr.dir[e] = u;
    tr.force(e) = f;
    const Vec2 j_imp = f * dt * u;
    tr.impulse[i] += j_imp;
    tr.impulse[j] -= j_imp;
  }
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

// One full step: controller, truss forces, damped symplectic Euler, contact.
SimState advance(const Robot& robot, const PhysicalDesign& design, const ControllerParams& theta,
                 const SimConfig& cfg, const SimState& s, int step, StepTrace& tr, std::uint64_t* signature,
                 long* contacts) {
  const auto& lat = robot.lattice;
  const double t = step * cfg.dt;
  const Eigen::VectorXd input = assemble_input(s.x, s.v, robot.goal, cpg_signals(t, robot.cpg));
  const Eigen::VectorXd u = forward(theta, input, &tr.acts);
  tr.strain = design.actuation.cwiseProduct(u);
  accumulate_edges(lat, s, design.stiffness, tr.strain, cfg.dt, cfg.min_length, cfg.slack_stiffness, step, tr);

  const double decay = std::exp(-cfg.damping * cfg.dt);
  const size_t n = s.x.size();
  SimState out;
  out.x.resize(n);
  out.v.resize(n);
  out.t = (step + 1) * cfg.dt;
  tr.nodes.assign(n, NodeTrace{});
  for (size_t i = 0; i < n; ++i) {
    const Vec2 vstar = decay * s.v[i] + tr.impulse[i] / design.mass[i] + cfg.gravity * cfg.dt;
    const ContactResult c = contact_node(s.x[i], vstar, cfg, &tr.nodes[i]);
    out.x[i] = c.x_end;
    out.v[i] = c.v_post;
    if (c.contact) {
      if (contacts) ++*contacts;
      if (signature) {
        const NodeTrace& nt = tr.nodes[i];
        const std::uint64_t flags = 1u | (nt.clamped ? 2u : 0u) | (nt.sliding ? 4u : 0u) | (nt.projected ? 8u : 0u);
        *signature = mix(*signature, (static_cast<std::uint64_t>(step) << 24) ^ (i << 4) ^ flags);
      }
    }
  }
  check_finite(out, step);
  return out;
}

void step_vjp(const Robot& robot, const PhysicalDesign& design, const ControllerParams& theta, const SimConfig& cfg,
              const SimState& s, const StepTrace& tr, const std::vector<Vec2>& ax_out, const std::vector<Vec2>& av_out,
              std::vector<Vec2>& ax_in, std::vector<Vec2>& av_in, RolloutGradient& g) {
  const auto& lat = robot.lattice;
  const size_t n = s.x.size();
  const double dt = cfg.dt;
  const double decay = std::exp(-cfg.damping * dt);
  ax_in.assign(n, Vec2::Zero());
  av_in.assign(n, Vec2::Zero());

  std::vector<Vec2> aimpulse(n);
  for (size_t i = 0; i < n; ++i) {
    const Vec2 avstar = contact_node_vjp(tr.nodes[i], cfg, ax_out[i], av_out[i], ax_in[i]);
    av_in[i] += decay * avstar;
    const double m = design.mass[i];
    aimpulse[i] = avstar / m;
    g.d_mass[i] -= avstar.dot(tr.impulse[i]) / (m * m);
  }

  Eigen::VectorXd astrain(lat.num_edges());
  for (int e = 0; e < lat.num_edges(); ++e) {
    const auto [i, j] = lat.edges[e];
    const double l = tr.length[e];
    if (l < 0.0) {
      astrain(e) = 0.0;
      continue;
    }
    const Vec2& u = tr.dir[e];
    const double f = tr.force(e);
    const double k = design.stiffness(e);
    const double l0 = lat.rest_lengths[e];
    const Vec2 w = dt * (aimpulse[i] - aimpulse[j]);
    const double af = w.dot(u);
    const Vec2 au = f * w;
    const Vec2 ad = (au - u * u.dot(au)) / l + (af * k) * u;
    ax_in[j] += ad;
    ax_in[i] -= ad;
    g.d_stiffness(e) += af * (l - l0 * (1.0 + tr.strain(e)));
    astrain(e) = -af * k * l0;
  }

  const Eigen::VectorXd& u = tr.acts.output;
  g.d_actuation += astrain.cwiseProduct(u);
  const Eigen::VectorXd au = astrain.cwiseProduct(design.actuation);
  Eigen::VectorXd ainput;
  backward(theta, tr.acts, au, g.d_theta, &ainput);

  const Eigen::Index off = robot.cpg.n_cpg + 2;
  Vec2 mean = Vec2::Zero();
  for (size_t i = 0; i < n; ++i) mean += ainput.segment<2>(off + 2 * static_cast<Eigen::Index>(i));
  mean /= static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    ax_in[i] += ainput.segment<2>(off + 2 * static_cast<Eigen::Index>(i)) - mean;
    av_in[i] += ainput.segment<2>(off + 2 * static_cast<Eigen::Index>(n + i));
  }
}

}  // namespace

EdgeForces edge_forces(const LatticeSpec& lattice, const SimState& state, const Eigen::VectorXd& stiffness,
                       const Eigen::VectorXd& strain, double dt, double min_length, int step) {
  if (stiffness.size() != lattice.num_edges() || strain.size() != lattice.num_edges()) {
    throw std::invalid_argument("edge_forces: per-edge vectors must match edge count");
  }
  StepTrace tr;
  accumulate_edges(lattice, state, stiffness, strain, dt, min_length, 0.0, step, tr);
  return {tr.force, tr.impulse};
}

EdgeForces edge_forces(const LatticeSpec& lattice, const SimState& state, const StateRatios& ztilde,
                       const MaterialLibrary& lib, const Eigen::VectorXd& strain, double dt, double min_length) {
  const Eigen::VectorXd k = ztilde * lib.psi().col(MaterialLibrary::kStiffness);
  return edge_forces(lattice, state, k, strain, dt, min_length, 0);
}

ContactResult resolve_contact(const Vec2& x_prev, const Vec2& v_pre, const SimConfig& cfg) {
  return contact_node(x_prev, v_pre, cfg, nullptr);
}

SimState integrate_step(const SimState& state, const std::vector<Vec2>& impulses, const std::vector<double>& masses,
                        const SimConfig& cfg, int step) {
  const size_t n = state.x.size();
  if (impulses.size() != n || masses.size() != n || state.v.size() != n) {
    throw std::invalid_argument("integrate_step: per-node arrays must match");
  }
  const double decay = std::exp(-cfg.damping * cfg.dt);
  SimState out;
  out.x.resize(n);
  out.v.resize(n);
  out.t = state.t + cfg.dt;
  for (size_t i = 0; i < n; ++i) {
    if (!(masses[i] > 0.0)) throw std::invalid_argument("node masses must be positive");
    const Vec2 vstar = decay * state.v[i] + impulses[i] / masses[i] + cfg.gravity * cfg.dt;
    const ContactResult c = contact_node(state.x[i], vstar, cfg, nullptr);
    out.x[i] = c.x_end;
    out.v[i] = c.v_post;
  }
  check_finite(out, step);
  return out;
}

RolloutRecord rollout(const Robot& robot, const StateRatios& ztilde, const ControllerParams& theta,
                      const SimConfig& cfg, const SimState* initial) {
  cfg.validate();
  if (theta.dims() != robot.controller_dims(static_cast<int>(theta.w1.cols()))) {
    throw std::invalid_argument("controller dimensions do not match the robot");
  }
  RolloutRecord rec;
  rec.design = make_physical_design(robot, ztilde);
  rec.theta = theta;
  rec.stride = cfg.checkpoint_stride;
  rec.steps = cfg.total_steps;
  rec.initial = initial ? *initial : rest_state(robot.lattice);
  if (rec.initial.x.size() != static_cast<size_t>(robot.lattice.num_nodes())) {
    throw std::invalid_argument("initial state does not match the lattice");
  }
  rec.tape.reserve(static_cast<size_t>(cfg.total_steps / rec.stride + 1));

  StepTrace tr;
  SimState s = rec.initial;
  for (int k = 0; k < cfg.total_steps; ++k) {
    if (k % rec.stride == 0) rec.tape.push_back(s);
    s = advance(robot, rec.design, theta, cfg, s, k, tr, &rec.contact_signature, &rec.contact_events);
  }
  rec.final_state = std::move(s);
  rec.loss = loss_displacement(rec, robot.lattice.head_index);
  return rec;
}

namespace {

void clip_adjoint(std::vector<Vec2>& ax, std::vector<Vec2>& av, double cap) {
  double sq = 0.0;
  for (size_t i = 0; i < ax.size(); ++i) sq += ax[i].squaredNorm() + av[i].squaredNorm();
  const double norm = std::sqrt(sq);
  if (!(norm > cap)) return;
  const double s = cap / norm;
  for (size_t i = 0; i < ax.size(); ++i) {
    ax[i] *= s;
    av[i] *= s;
  }
}

}  // namespace

RolloutGradient rollout_backward(const Robot& robot, const RolloutRecord& record, const SimConfig& cfg, int grad_steps) {
  if (grad_steps < 1 || grad_steps > record.steps) throw std::invalid_argument("grad_steps must lie in [1, T]");
  const auto& lat = robot.lattice;
  const size_t n = static_cast<size_t>(lat.num_nodes());
  RolloutGradient g;
  g.loss = record.loss;
  g.d_stiffness = Eigen::VectorXd::Zero(lat.num_edges());
  g.d_actuation = Eigen::VectorXd::Zero(lat.num_edges());
  g.d_mass.assign(n, 0.0);
  g.d_theta = ControllerParams::zeros(record.theta.dims());

  std::vector<Vec2> ax(n, Vec2::Zero()), av(n, Vec2::Zero());
  ax[lat.head_index] = Vec2(-1.0, 0.0);
  std::vector<Vec2> ax_in, av_in;

  const int first = record.steps - grad_steps;
  const int stride = record.stride;
  StepTrace tr;
  std::vector<SimState> segment;
  // Walk checkpoint segments backwards; each segment is recomputed forward
  // from its stored state, then swept in reverse.
  int seg_start = ((record.steps - 1) / stride) * stride;
  while (seg_start + stride > first && seg_start >= 0) {
    const int seg_end = std::min(seg_start + stride, record.steps);
    segment.clear();
    segment.push_back(record.tape[static_cast<size_t>(seg_start / stride)]);
    for (int k = seg_start; k + 1 < seg_end; ++k) {
      segment.push_back(advance(robot, record.design, record.theta, cfg, segment.back(), k, tr, nullptr, nullptr));
    }
    for (int k = seg_end - 1; k >= std::max(seg_start, first); --k) {
      const SimState& s = segment[static_cast<size_t>(k - seg_start)];
      advance(robot, record.design, record.theta, cfg, s, k, tr, nullptr, nullptr);
      step_vjp(robot, record.design, record.theta, cfg, s, tr, ax, av, ax_in, av_in, g);
      ax.swap(ax_in);
      av.swap(av_in);
      if (cfg.adjoint_clip > 0.0) clip_adjoint(ax, av, cfg.adjoint_clip);
    }
    seg_start -= stride;
  }
  return g;
}

StateRatios state_ratio_gradient(const Robot& robot, const RolloutGradient& grad) {
  const auto& lat = robot.lattice;
  const Eigen::Matrix3d& psi = robot.lib.psi();
  StateRatios out(lat.num_edges(), 3);
  for (int e = 0; e < lat.num_edges(); ++e) {
    const auto [i, j] = lat.edges[e];
    const double dm = grad.d_mass[i] + grad.d_mass[j];
    for (int k = 0; k < kNumStates; ++k) {
      out(e, k) = grad.d_stiffness(e) * psi(k, MaterialLibrary::kStiffness) +
                  grad.d_actuation(e) * psi(k, MaterialLibrary::kMaxStrain) +
                  0.5 * lat.rest_lengths[e] * psi(k, MaterialLibrary::kDensity) * dm;
    }
  }
  return out;
}

DesignGradient rollout_grad(const Robot& robot, const DesignMatrix& z, const Projection& projection,
                            const ControllerParams& theta, const SimConfig& cfg) {
  const StateRatios zt = projection.forward(z);
  DesignGradient out;
  out.record = rollout(robot, zt, theta, cfg);
  out.loss = out.record.loss;
  const RolloutGradient g = rollout_backward(robot, out.record, cfg, std::min(cfg.grad_steps, out.record.steps));
  out.d_design = projection.backward(z, state_ratio_gradient(robot, g));
  out.d_theta = g.d_theta;
  return out;
}

double loss_displacement(const RolloutRecord& record, int head_index) {
  return -record.final_state.x.at(static_cast<size_t>(head_index)).x();
}

std::vector<SimState> trajectory(const Robot& robot, const RolloutRecord& record, const SimConfig& cfg) {
  std::vector<SimState> out;
  out.reserve(static_cast<size_t>(record.steps + 1));
  StepTrace tr;
  for (int k = 0; k < record.steps; ++k) {
    if (k % record.stride == 0) out.push_back(record.tape[static_cast<size_t>(k / record.stride)]);
    else out.push_back(advance(robot, record.design, record.theta, cfg, out.back(), k - 1, tr, nullptr, nullptr));
  }
  out.push_back(record.final_state);
  return out;
}

void write_trajectory_csv(std::ostream& out, const std::vector<SimState>& states, double dt) {
  out << "step,time,node_id,x,y,vx,vy\n";
  char buf[256];
  for (size_t k = 0; k < states.size(); ++k) {
    const SimState& s = states[k];
    const double t = static_cast<double>(k) * dt;
    for (size_t i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%zu,%.17g,%.17g,%.17g,%.17g\n", k, t, i, s.x[i].x(), s.x[i].y(),
                    s.v[i].x(), s.v[i].y());
      out << buf;
    }
  }
}

}  // namespace latticebot
