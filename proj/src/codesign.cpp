#include "latticebot/codesign.hpp"

#include "latticebot/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace latticebot {

namespace {

Json array4(const Vec4& a) { return Json::array({a[0], a[1], a[2], a[3]}); }

Vec4 array4_from(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("expected a 4-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Eigen::Map<const Eigen::VectorXd> flat(const DesignMatrix& z) { return {z.data(), z.size()}; }

DesignMatrix unflat(const Eigen::VectorXd& v, Eigen::Index rows) {
  DesignMatrix z(rows, 3);
  Eigen::Map<Eigen::VectorXd>(z.data(), z.size()) = v;
  return z;
}

Projection performance_projection(const CodesignOptions& opts) {
  Projection p = Projection::performance(opts.projection.beta);
  return opts.lock ? p.with_material_lock(*opts.lock) : p;
}

struct Constraints {
  Eigen::VectorXd f;
  Eigen::MatrixXd df;
};

// V <= V_max, V_min <= V, and the actuator pair, as f <= 0.
Constraints volume_constraints(const DesignMatrix& z, const Projection& proj, const VolumeBounds& b) {
  const StateRatios zt = proj.forward(z);
  const VolumeFractions vf = volume_fractions(zt);
  const double inv = 1.0 / static_cast<double>(zt.rows());
  StateRatios gv = StateRatios::Zero(zt.rows(), 3);
  gv.col(kSkeleton).setConstant(inv);
  gv.col(kActuator).setConstant(inv);
  StateRatios ga = StateRatios::Zero(zt.rows(), 3);
  ga.col(kActuator).setConstant(inv);
  const DesignMatrix dv = proj.backward(z, gv);
  const DesignMatrix da = proj.backward(z, ga);

  Constraints c;
  c.f.resize(4);
  c.f << vf.solid - b.v_max, b.v_min - vf.solid, vf.actuator - b.act_max, b.act_min - vf.actuator;
  c.df.resize(4, z.size());
  c.df.row(0) = flat(dv).transpose();
  c.df.row(1) = -flat(dv).transpose();
  c.df.row(2) = flat(da).transpose();
  c.df.row(3) = -flat(da).transpose();
  return c;
}

void require_finite(const DesignMatrix& g, int iter) {
  if (!g.allFinite()) throw SimulationError("non-finite design gradient", iter);
}

DesignMatrix mma_update(CodesignState& st, const CodesignOptions& opts, const DesignMatrix& dobj,
                        const Constraints& c, bool& relaxed) {
  // MMA sees the objective gradient at unit max-norm.
  Eigen::VectorXd g = flat(dobj);
  const double gmax = g.cwiseAbs().maxCoeff();
  if (gmax > 0.0) g /= gmax;
  const MmaResult r = mma_step(st.mma, opts.mma, flat(st.Z), g, c.f, c.df);
  relaxed = r.relaxed;
  return unflat(r.x, st.Z.rows());
}

}  // namespace

Json IterationRecord::to_json() const {
  Json j;
  j["iter"] = iter;
  j["pass"] = to_string(pass);
  j["loss"] = number_or_null(loss);
  j["V"] = V;
  j["V_act"] = V_act;
  j["g_bin"] = g_bin;
  j["g_ortho"] = Json::array({g_ortho[0], g_ortho[1], g_ortho[2]});
  j["lambda"] = array4(lambda);
  j["tau"] = array4(tau);
  j["T_grad"] = T_grad;
  j["delta_V"] = delta_V;
  j["skipped"] = skipped;
  j["relaxed"] = relaxed;
  return j;
}

Json CodesignState::to_json() const {
  Json j;
  j["next_iter"] = next_iter;
  j["frozen"] = frozen;
  j["consecutive_failures"] = consecutive_failures;
  j["Z"] = design_to_json(Z);
  j["theta"] = controller_to_json(theta);
  j["al"] = {{"lambda", array4(al.lambda)},
             {"tau", array4(al.tau)},
             {"anneal", al.anneal},
             {"prev_violations", array4(al.prev_violations)}};
  j["mma"] = {{"low", vector_to_json(mma.low)},   {"upp", vector_to_json(mma.upp)},
              {"xold1", vector_to_json(mma.xold1)}, {"xold2", vector_to_json(mma.xold2)},
              {"iter", mma.iter},                  {"move", mma.move},
              {"xmin", mma.xmin},                  {"xmax", mma.xmax}};
  j["adam"] = {{"m", vector_to_json(adam.m)}, {"v", vector_to_json(adam.v)}, {"step", adam.step},
               {"lr", adam.lr},               {"beta1", adam.beta1},        {"beta2", adam.beta2},
               {"eps", adam.eps}};
  j["last_perf_step"] = design_to_json(last_perf_step);
  return j;
}

CodesignState CodesignState::from_json(const Json& j) {
  try {
    CodesignState s;
    s.next_iter = j.at("next_iter").get<int>();
    s.frozen = j.at("frozen").get<bool>();
    s.consecutive_failures = j.at("consecutive_failures").get<int>();
    s.Z = design_from_json(j.at("Z"));
    s.theta = controller_from_json(j.at("theta"));
    const Json& al = j.at("al");
    s.al.lambda = array4_from(al.at("lambda"));
    s.al.tau = array4_from(al.at("tau"));
    s.al.anneal = al.at("anneal").get<double>();
    s.al.prev_violations = array4_from(al.at("prev_violations"));
    const Json& m = j.at("mma");
    s.mma.low = vector_from_json(m.at("low"));
    s.mma.upp = vector_from_json(m.at("upp"));
    s.mma.xold1 = vector_from_json(m.at("xold1"));
    s.mma.xold2 = vector_from_json(m.at("xold2"));
    s.mma.iter = m.at("iter").get<int>();
    s.mma.move = m.at("move").get<double>();
    s.mma.xmin = m.at("xmin").get<double>();
    s.mma.xmax = m.at("xmax").get<double>();
    const Json& a = j.at("adam");
    s.adam.m = vector_from_json(a.at("m"));
    s.adam.v = vector_from_json(a.at("v"));
    s.adam.step = a.at("step").get<long>();
    s.adam.lr = a.at("lr").get<double>();
    s.adam.beta1 = a.at("beta1").get<double>();
    s.adam.beta2 = a.at("beta2").get<double>();
    s.adam.eps = a.at("eps").get<double>();
    s.last_perf_step = design_from_json(j.at("last_perf_step"));
    s.al.validate();
    return s;
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("malformed checkpoint: ") + e.what());
  }
}

CodesignState initial_state(const DesignMatrix& Z0, const ControllerParams& theta0, const CodesignOptions& opts) {
  CodesignState st;
  st.Z = Z0;
  st.theta = theta0;
  st.al = ALState::initial(opts.tau0, opts.anneal);
  st.mma = MmaState::create(flat(Z0), opts.mma);
  st.adam = AdamState::zeros(theta0.size(), opts.adam_lr);
  st.last_perf_step = DesignMatrix::Zero(Z0.rows(), 3);
  return st;
}

Projection physics_projection(const CodesignState& state, const CodesignOptions& opts) {
  if (state.frozen || (!opts.optimize_design && is_one_hot(state.Z))) return Projection::identity();
  return performance_projection(opts);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int next_iter) {
  char name[64];
  std::snprintf(name, sizeof(name), "checkpoint_%05d.json", next_iter);
  return dir / name;
}

CodesignResult run_codesign(const Robot& robot, const DesignMatrix& Z0, const ControllerParams& theta0,
                            const SimConfig& sim_cfg, const ScheduleConfig& sched, const CodesignOptions& opts,
                            const CodesignState* resume) {
  sim_cfg.validate();
  sched.validate();
  if (Z0.rows() != robot.lattice.num_edges()) throw std::invalid_argument("Z0 rows must match the edge count");
  if (theta0.dims() != robot.controller_dims(static_cast<int>(theta0.w1.cols()))) {
    throw std::invalid_argument("controller dimensions do not match the robot");
  }
  if (opts.lock && static_cast<Eigen::Index>(opts.lock->preferred.size()) != Z0.rows()) {
    throw std::invalid_argument("material lock size must match the edge count");
  }

  CodesignState st = resume ? *resume : initial_state(Z0, theta0, opts);
  if (st.Z.rows() != Z0.rows() || st.theta.size() != theta0.size()) {
    throw std::invalid_argument("resume state does not match the problem dimensions");
  }
  CodesignResult result;
  const Projection perf = performance_projection(opts);
  Projection stab = Projection::stability(opts.projection.beta_stab, opts.projection.beta_ste);
  if (opts.lock) stab = stab.with_material_lock(*opts.lock);

  for (int iter = st.next_iter; iter < sched.total_iters; ++iter) {
    bool snapped_now = false;
    if (opts.optimize_design && !st.frozen && iter >= sched.snap_iter) {
      st.Z = hard_snap(opts.lock ? opts.lock->apply(st.Z) : st.Z);
      st.frozen = true;
      snapped_now = true;
    }
    PassKind kind = schedule_pass(iter, sched);
    if (!opts.optimize_design || st.frozen) kind = PassKind::controller;

    SimConfig cfg = sim_cfg;
    cfg.grad_steps = std::min(grad_window(iter, sched), cfg.total_steps);

    IterationRecord rec;
    rec.iter = iter;
    rec.pass = kind;
    rec.T_grad = cfg.grad_steps;
    rec.delta_V = delta_v(iter, sched);

    try {
      if (kind == PassKind::controller) {
        const Projection proj = physics_projection(st, opts);
        if (opts.optimize_controller) {
          const DesignGradient dg = rollout_grad(robot, st.Z, proj, st.theta, cfg);
          const Eigen::VectorXd g = dg.d_theta.flatten();
          if (!g.allFinite()) throw SimulationError("non-finite controller gradient", iter);
          rec.loss = dg.loss;
          st.theta = ControllerParams::unflatten(st.theta.dims(), adam_step(st.adam, g, st.theta.flatten()));
        } else {
          rec.loss = rollout(robot, proj.forward(st.Z), st.theta, cfg).loss;
        }
      } else {
        const VolumeBounds bounds = effective_bounds(iter, sched);
        const Constraints cons = volume_constraints(st.Z, perf, bounds);
        if (kind == PassKind::performance) {
          const DesignGradient dg = rollout_grad(robot, st.Z, perf, st.theta, cfg);
          require_finite(dg.d_design, iter);
          const StateRatios zt = perf.forward(st.Z);
          const Vec4 v = violations(binarization_penalties(zt, opts.delta).as_vector());
          const ALObjective ao = augmented_objective(dg.loss, v, st.al);
          const DesignMatrix dobj =
              dg.d_design + perf.backward(st.Z, binarization_gradient(zt, opts.delta, ao.d_violation));
          rec.loss = dg.loss;
          const DesignMatrix z_new = mma_update(st, opts, dobj, cons, rec.relaxed);
          st.last_perf_step = z_new - st.Z;
          st.Z = z_new;
        } else {
          const DesignGradient dg = rollout_grad(robot, st.Z, stab, st.theta, cfg);
          require_finite(dg.d_design, iter);
          rec.loss = dg.loss;
          const DesignMatrix z_stab = mma_update(st, opts, dg.d_design, cons, rec.relaxed);
          const double w = sched.stability_blend;
          st.Z = (st.Z + w * (z_stab - st.Z) + (1.0 - w) * st.last_perf_step).cwiseMax(0.0).cwiseMin(1.0);
        }
        const StateRatios zt_new = perf.forward(st.Z);
        st.al = update_al(st.al, violations(binarization_penalties(zt_new, opts.delta).as_vector()));
        const NudgeParams nudge = nudge_schedule(iter, sched);
        if (nudge.active) st.Z = attraction_nudge(st.Z, zt_new, nudge.tau_conf, nudge.gamma);
      }
      st.consecutive_failures = 0;
    } catch (const SimulationError& e) {
      rec.skipped = true;
      rec.loss = std::numeric_limits<double>::quiet_NaN();
      ++st.consecutive_failures;
      if (kind == PassKind::controller) st.adam.lr *= 0.5;
      else st.mma.move *= 0.5;
      if (st.consecutive_failures >= opts.max_consecutive_failures) {
        std::ostringstream msg;
        msg << "co-design aborted at iteration " << iter << " (" << to_string(kind) << " pass) after "
            << st.consecutive_failures << " consecutive divergences; last error at step " << e.step() << ": "
            << e.what();
        throw CodesignAborted(msg.str(), iter);
      }
    }

    const StateRatios zt = physics_projection(st, opts).forward(st.Z);
    const VolumeFractions vf = volume_fractions(zt);
    const BinarizationPenalties pen = binarization_penalties(zt, opts.delta);
    rec.V = vf.solid;
    rec.V_act = vf.actuator;
    rec.g_bin = pen.g_bin;
    rec.g_ortho = pen.g_ortho;
    rec.lambda = st.al.lambda;
    rec.tau = st.al.tau;
    st.next_iter = iter + 1;

    result.history.push_back(rec);
    if (opts.on_iteration) opts.on_iteration(rec, st);
    const bool periodic = opts.checkpoint_every > 0 && st.next_iter % opts.checkpoint_every == 0;
    if (!opts.checkpoint_dir.empty() && (periodic || snapped_now)) {
      write_text_file(checkpoint_path(opts.checkpoint_dir, st.next_iter), st.to_json().dump());
    }
  }

  // A budget that ends before the snap still has to return a discrete design.
  if (opts.optimize_design && !st.frozen && sched.total_iters > 0 && st.next_iter >= sched.total_iters) {
    st.Z = hard_snap(opts.lock ? opts.lock->apply(st.Z) : st.Z);
    st.frozen = true;
  }
  result.Z = st.Z;
  result.theta = st.theta;
  result.state = st;
  return result;
}

}  // namespace latticebot
