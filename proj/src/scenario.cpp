#include "latticebot/scenario.hpp"

#include "latticebot/baseline.hpp"
#include "latticebot/io.hpp"
#include "latticebot/render.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace latticebot {

std::string to_string(InitHeuristic h) {
  switch (h) {
    case InitHeuristic::uniform: return "uniform";
    case InitHeuristic::stability: return "stability";
    case InitHeuristic::three_legged: return "three_legged";
    case InitHeuristic::baseline_fixed: return "baseline_fixed";
  }
  return "unknown";
}

InitHeuristic heuristic_from_string(const std::string& s) {
  if (s == "uniform") return InitHeuristic::uniform;
  if (s == "stability") return InitHeuristic::stability;
  if (s == "three_legged") return InitHeuristic::three_legged;
  if (s == "baseline_fixed") return InitHeuristic::baseline_fixed;
  throw std::invalid_argument("unknown init heuristic '" + s + "'");
}

AblationFlags trial_flags(char trial) {
  if (trial < 'a' || trial > 'h') throw std::invalid_argument(std::string("unknown ablation trial '") + trial + "'");
  const int k = trial - 'a';
  return {(k & 2) != 0, (k & 4) != 0, (k & 1) != 0};
}

void ScenarioConfig::validate() const {
  if (rows < 2 || cols < 2) throw std::invalid_argument("grid needs at least 2 rows and 2 columns");
  if (!(spacing > 0.0)) throw std::invalid_argument("grid spacing must be positive");
  if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be at least 1");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (damping < 0.0) throw std::invalid_argument("damping must be non-negative");
  if (!(adjoint_clip >= 0.0)) throw std::invalid_argument("adjoint_clip must be non-negative");
  if (payload_mass < 0.0 || !(m_eps > 0.0)) throw std::invalid_argument("masses must satisfy m_eps > 0, payload >= 0");
  if (hidden < 1 || n_cpg < 1 || !(omega > 0.0)) throw std::invalid_argument("invalid controller settings");
  if (!(adam_lr > 0.0) || !(mma_move > 0.0) || mma_move > 1.0) throw std::invalid_argument("invalid step sizes");
  if (frame_stride < 1 || checkpoint_every < 0 || checkpoint_stride < 1) {
    throw std::invalid_argument("invalid output settings");
  }
  if (heuristic.stability_shift < 0.0 || heuristic.stability_shift > 2.0 / 3.0) {
    throw std::invalid_argument("stability_shift must lie in [0, 2/3]");
  }
  if (heuristic.three_legged_bias < 0.0) throw std::invalid_argument("three_legged_bias must be non-negative");
  if (init == InitHeuristic::baseline_fixed && (flags.topology || flags.material)) {
    throw std::invalid_argument("baseline_fixed requires topology and material design to be off");
  }
  ground.validate();
  if (friction.mu < 0.0) throw std::invalid_argument("friction coefficient must be non-negative");
  if (!goal.allFinite() || !head_offset.allFinite()) throw std::invalid_argument("goal and head offset must be finite");
  scenario_schedule(*this).validate();
}

namespace {

Json vec2(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Vec2 vec2_from(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument(where + " must be a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void opt(const Json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->template get<T>();
}

const Json* section(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

}  // namespace

Json ScenarioConfig::to_json() const {
  Json j;
  j["name"] = name;
  j["seed"] = seed;
  j["grid"] = {{"rows", rows}, {"cols", cols}, {"spacing", spacing}};
  j["init"] = to_string(init);
  j["init_params"] = {{"stability_shift", heuristic.stability_shift},
                      {"three_legged_bias", heuristic.three_legged_bias}};
  j["ablation"] = {{"topology", flags.topology}, {"material", flags.material}, {"control", flags.control}};
  Json env;
  env["ground"] = ground.kind == GroundModel::Kind::flat ? "flat" : "incline";
  env["ground_height"] = ground.height;
  env["incline_deg"] = ground.angle_deg;
  env["incline_pivot"] = vec2(ground.pivot);
  env["friction"] = friction.kind == FrictionKind::infinite ? "infinite" : "coulomb";
  env["mu"] = friction.mu;
  j["environment"] = env;
  j["goal"] = vec2(goal);
  j["head_offset"] = vec2(head_offset);
  j["budget"] = {{"iterations", iterations},
                 {"total_steps", total_steps},
                 {"dt", dt},
                 {"volume",
                  {{"v_min", bounds.v_min}, {"v_max", bounds.v_max}, {"act_min", bounds.act_min},
                   {"act_max", bounds.act_max}}}};
  j["physics"] = {{"damping", damping},           {"gravity", vec2(gravity)},
                  {"payload_mass", payload_mass}, {"m_eps", m_eps},
                  {"checkpoint_stride", checkpoint_stride}, {"adjoint_clip", adjoint_clip}};
  j["controller"] = {{"hidden", hidden}, {"n_cpg", n_cpg}, {"omega", omega}, {"adam_lr", adam_lr}};
  j["optimizer"] = {{"mma_move", mma_move},
                    {"tau0", tau0},
                    {"anneal", anneal},
                    {"stability_blend", stability_blend},
                    {"stability_cadence", stability_cadence},
                    {"grad_min", grad_min},
                    {"grad_max", grad_max},
                    {"delta_v_max", delta_v_max}};
  j["output"] = {{"frames", write_frames}, {"frame_stride", frame_stride}, {"checkpoint_every", checkpoint_every}};
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const Json& doc) {
  ScenarioConfig c;
  try {
    check_keys(doc,
               {"name", "seed", "grid", "init", "init_params", "ablation", "environment", "goal", "head_offset",
                "budget", "physics", "controller", "optimizer", "output"},
               "scenario");
    opt(doc, "name", c.name);
    opt(doc, "seed", c.seed);
    if (const Json* g = section(doc, "grid")) {
      check_keys(*g, {"rows", "cols", "spacing"}, "grid");
      opt(*g, "rows", c.rows);
      opt(*g, "cols", c.cols);
      opt(*g, "spacing", c.spacing);
    }
    if (auto it = doc.find("init"); it != doc.end()) c.init = heuristic_from_string(it->get<std::string>());
    if (const Json* p = section(doc, "init_params")) {
      check_keys(*p, {"stability_shift", "three_legged_bias"}, "init_params");
      opt(*p, "stability_shift", c.heuristic.stability_shift);
      opt(*p, "three_legged_bias", c.heuristic.three_legged_bias);
    }
    if (const Json* a = section(doc, "ablation")) {
      check_keys(*a, {"topology", "material", "control"}, "ablation");
      opt(*a, "topology", c.flags.topology);
      opt(*a, "material", c.flags.material);
      opt(*a, "control", c.flags.control);
    } else if (c.init == InitHeuristic::baseline_fixed) {
      c.flags = {false, false, true};
    }
    if (const Json* e = section(doc, "environment")) {
      check_keys(*e, {"ground", "ground_height", "incline_deg", "incline_pivot", "friction", "mu"}, "environment");
      std::string kind = "flat";
      opt(*e, "ground", kind);
      double height = 0.0, angle = 15.0;
      Vec2 pivot(0.8, 0.0);
      opt(*e, "ground_height", height);
      opt(*e, "incline_deg", angle);
      if (auto it = e->find("incline_pivot"); it != e->end()) pivot = vec2_from(*it, "incline_pivot");
      if (kind == "flat") c.ground = GroundModel::flat_at(height);
      else if (kind == "incline") c.ground = GroundModel::incline(angle, pivot);
      else throw std::invalid_argument("unknown ground kind '" + kind + "'");
      std::string fr = "infinite";
      opt(*e, "friction", fr);
      if (fr == "infinite") c.friction.kind = FrictionKind::infinite;
      else if (fr == "coulomb") c.friction.kind = FrictionKind::coulomb;
      else throw std::invalid_argument("unknown friction model '" + fr + "'");
      opt(*e, "mu", c.friction.mu);
    }
    if (auto it = doc.find("goal"); it != doc.end()) c.goal = vec2_from(*it, "goal");
    if (auto it = doc.find("head_offset"); it != doc.end()) c.head_offset = vec2_from(*it, "head_offset");
    if (const Json* b = section(doc, "budget")) {
      check_keys(*b, {"iterations", "total_steps", "dt", "volume"}, "budget");
      opt(*b, "iterations", c.iterations);
      opt(*b, "total_steps", c.total_steps);
      opt(*b, "dt", c.dt);
      if (const Json* v = section(*b, "volume")) {
        check_keys(*v, {"v_min", "v_max", "act_min", "act_max"}, "budget.volume");
        opt(*v, "v_min", c.bounds.v_min);
        opt(*v, "v_max", c.bounds.v_max);
        opt(*v, "act_min", c.bounds.act_min);
        opt(*v, "act_max", c.bounds.act_max);
      }
    }
    if (const Json* p = section(doc, "physics")) {
      check_keys(*p, {"damping", "gravity", "payload_mass", "m_eps", "checkpoint_stride", "adjoint_clip"}, "physics");
      opt(*p, "damping", c.damping);
      if (auto it = p->find("gravity"); it != p->end()) c.gravity = vec2_from(*it, "gravity");
      opt(*p, "payload_mass", c.payload_mass);
      opt(*p, "m_eps", c.m_eps);
      opt(*p, "checkpoint_stride", c.checkpoint_stride);
      opt(*p, "adjoint_clip", c.adjoint_clip);
    }
    if (const Json* p = section(doc, "controller")) {
      check_keys(*p, {"hidden", "n_cpg", "omega", "adam_lr"}, "controller");
      opt(*p, "hidden", c.hidden);
      opt(*p, "n_cpg", c.n_cpg);
      opt(*p, "omega", c.omega);
      opt(*p, "adam_lr", c.adam_lr);
    }
    if (const Json* p = section(doc, "optimizer")) {
      check_keys(*p,
                 {"mma_move", "tau0", "anneal", "stability_blend", "stability_cadence", "grad_min", "grad_max",
                  "delta_v_max"},
                 "optimizer");
      opt(*p, "mma_move", c.mma_move);
      opt(*p, "tau0", c.tau0);
      opt(*p, "anneal", c.anneal);
      opt(*p, "stability_blend", c.stability_blend);
      opt(*p, "stability_cadence", c.stability_cadence);
      opt(*p, "grad_min", c.grad_min);
      opt(*p, "grad_max", c.grad_max);
      opt(*p, "delta_v_max", c.delta_v_max);
    }
    if (const Json* p = section(doc, "output")) {
      check_keys(*p, {"frames", "frame_stride", "checkpoint_every"}, "output");
      opt(*p, "frames", c.write_frames);
      opt(*p, "frame_stride", c.frame_stride);
      opt(*p, "checkpoint_every", c.checkpoint_every);
    }
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("invalid scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

LatticeSpec scenario_lattice(const ScenarioConfig& cfg) {
  return build_grid(cfg.rows, cfg.cols, cfg.spacing, cfg.head_offset);
}

Robot scenario_robot(const ScenarioConfig& cfg) {
  Robot r;
  r.lattice = scenario_lattice(cfg);
  r.mass.m_eps = cfg.m_eps;
  r.mass.payload_mass = cfg.payload_mass;
  r.cpg.n_cpg = cfg.n_cpg;
  r.cpg.omega = cfg.omega;
  r.goal.x_goal = cfg.goal;
  return r;
}

SimConfig scenario_sim_config(const ScenarioConfig& cfg) {
  SimConfig s;
  s.dt = cfg.dt;
  s.total_steps = cfg.total_steps;
  s.grad_steps = std::min(cfg.grad_min, cfg.total_steps);
  s.damping = cfg.damping;
  s.gravity = cfg.gravity;
  s.ground = cfg.ground;
  s.friction = cfg.friction;
  s.checkpoint_stride = cfg.checkpoint_stride;
  s.adjoint_clip = cfg.adjoint_clip;
  return s;
}

ScheduleConfig scenario_schedule(const ScenarioConfig& cfg) {
  ScheduleConfig s = ScheduleConfig::scaled(std::max(cfg.iterations, 0));
  s.grad_min = cfg.grad_min;
  s.grad_max = cfg.grad_max;
  s.delta_v_max = cfg.delta_v_max;
  s.stability_blend = cfg.stability_blend;
  s.stability_cadence = cfg.stability_cadence;
  s.bounds = cfg.bounds;
  return s;
}

DesignMatrix init_heuristic(InitHeuristic kind, const LatticeSpec& lattice, std::uint64_t /*seed*/,
                            const HeuristicParams& params) {
  const int ne = lattice.num_edges();
  DesignMatrix z = DesignMatrix::Constant(ne, 3, 1.0 / 3.0);
  switch (kind) {
    case InitHeuristic::uniform:
      return z;
    case InitHeuristic::stability: {
      double y0 = lattice.nodes.front().y(), y1 = y0;
      for (const auto& p : lattice.nodes) {
        y0 = std::min(y0, p.y());
        y1 = std::max(y1, p.y());
      }
      for (int e = 0; e < ne; ++e) {
        const auto [i, j] = lattice.edges[e];
        const double h = (0.5 * (lattice.nodes[i].y() + lattice.nodes[j].y()) - y0) / (y1 - y0);
        const double s = params.stability_shift * h;
        z.row(e) << 1.0 / 3.0 + s, 1.0 / 3.0 - 0.5 * s, 1.0 / 3.0 - 0.5 * s;
      }
      return z;
    }
    case InitHeuristic::three_legged: {
      const DesignMatrix base = build_baseline(lattice).z;
      for (int e = 0; e < ne; ++e) {
        if (base(e, kVoid) == 1.0) {
          z(e, kVoid) += params.three_legged_bias;
          z.row(e) /= z.row(e).sum();
        }
      }
      return z;
    }
    case InitHeuristic::baseline_fixed:
      return build_baseline(lattice).z;
  }
  throw std::invalid_argument("unknown init heuristic");
}

std::vector<int> default_material_preference(const LatticeSpec& lattice) {
  std::vector<int> pref(lattice.edges.size());
  for (size_t e = 0; e < pref.size(); ++e) {
    pref[e] = lattice.orientation[e] == EdgeOrientation::vertical ? kActuator : kSkeleton;
  }
  return pref;
}

DesignMatrix default_filled_layout(const LatticeSpec& lattice) {
  const std::vector<int> pref = default_material_preference(lattice);
  DesignMatrix z = DesignMatrix::Zero(lattice.num_edges(), 3);
  for (size_t e = 0; e < pref.size(); ++e) z(static_cast<Eigen::Index>(e), pref[e]) = 1.0;
  return z;
}

AblationPlan apply_ablation(const AblationFlags& flags, InitHeuristic init, const DesignMatrix& z0,
                            const ScheduleConfig& sched, const LatticeSpec& lattice) {
  if (z0.rows() != lattice.num_edges()) throw std::invalid_argument("Z0 does not match the lattice");
  if (init == InitHeuristic::baseline_fixed && (flags.topology || flags.material)) {
    throw std::invalid_argument(
        "baseline_fixed holds topology and material fixed; enable neither topology nor material design");
  }
  AblationPlan plan;
  plan.z0 = z0;
  plan.schedule = sched;
  if (!flags.topology && !flags.material) {
    if (init != InitHeuristic::baseline_fixed) plan.z0 = default_filled_layout(lattice);
    plan.optimize_design = false;
    plan.hash_z = true;
  } else if (!flags.topology) {
    plan.z0 = DesignMatrix::Zero(lattice.num_edges(), 3);
    plan.z0.col(kSkeleton).setConstant(0.5);
    plan.z0.col(kActuator).setConstant(0.5);
    plan.schedule.bounds.v_min = 0.90;
    plan.schedule.bounds.v_max = 1.0;
  } else if (!flags.material) {
    plan.lock = MaterialLock{default_material_preference(lattice), 0.05};
    plan.schedule.bounds.act_min = 0.0;
    plan.schedule.bounds.act_max = 1.0;
    plan.hash_material = true;
  }
  if (!flags.control) {
    plan.optimize_controller = false;
    plan.hash_theta = true;
  }
  return plan;
}

std::string material_map_hash(const DesignMatrix& z, const MaterialLock* lock) {
  const DesignMatrix m = lock ? lock->apply(z) : z;
  std::vector<unsigned char> ids(static_cast<size_t>(m.rows()));
  for (Eigen::Index e = 0; e < m.rows(); ++e) ids[static_cast<size_t>(e)] = m(e, kActuator) > m(e, kSkeleton) ? 2 : 1;
  return sha256_hex(ids.data(), ids.size());
}

namespace {

IterationHashes hash_state(const DesignMatrix& z, const ControllerParams& theta, const MaterialLock* lock) {
  IterationHashes h;
  h.z = sha256_hex(z);
  h.theta = sha256_hex(theta.flatten());
  h.material = material_map_hash(z, lock);
  h.z_one_hot = is_one_hot(z);
  return h;
}

}  // namespace

Json export_metrics(const ScenarioConfig& cfg, const RunArtifacts& run, const std::string& history_file) {
  const Projection proj = run.z.rows() > 0 && is_one_hot(run.z) ? Projection::identity()
                                                                : Projection::performance(20.0);
  const StateRatios zt = proj.forward(run.z);
  const VolumeFractions vf = volume_fractions(zt);
  const BinarizationPenalties pen = binarization_penalties(zt, 1e-6);
  Json m;
  m["scenario"] = cfg.name;
  m["seed"] = cfg.seed;
  m["final_displacement_m"] = -run.final_loss;
  m["final_loss"] = run.final_loss;
  m["V"] = vf.solid;
  m["V_act"] = vf.actuator;
  m["g_bin"] = pen.g_bin;
  m["iterations"] = run.history.size();
  m["wallclock_s"] = run.wallclock_s;
  m["per_iteration"] = history_file;
  m["net_displacement_m"] = run.final_head_x - run.initial_head_x;
  m["init"] = to_string(cfg.init);
  m["ablation"] = {{"topology", cfg.flags.topology}, {"material", cfg.flags.material}, {"control", cfg.flags.control}};
  return m;
}

RunArtifacts run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, const Json* resume) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const Robot robot = scenario_robot(cfg);
  const SimConfig sim = scenario_sim_config(cfg);
  const ScheduleConfig sched = scenario_schedule(cfg);

  RunArtifacts run;
  run.plan = apply_ablation(cfg.flags, cfg.init, init_heuristic(cfg.init, robot.lattice, cfg.seed, cfg.heuristic),
                            sched, robot.lattice);
  const ControllerParams theta0 = xavier_init(cfg.seed, robot.controller_dims(cfg.hidden));

  CodesignOptions opts;
  opts.adam_lr = cfg.adam_lr;
  opts.mma.move = cfg.mma_move;
  opts.tau0 = cfg.tau0;
  opts.anneal = cfg.anneal;
  opts.optimize_design = run.plan.optimize_design;
  opts.optimize_controller = run.plan.optimize_controller;
  opts.lock = run.plan.lock;
  const MaterialLock* lock = opts.lock ? &*opts.lock : nullptr;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    opts.checkpoint_every = cfg.checkpoint_every;
    opts.checkpoint_dir = out_dir / "checkpoints";
  }

  std::optional<CodesignState> resume_state;
  if (resume) resume_state = CodesignState::from_json(*resume);
  run.initial_hashes = resume_state ? hash_state(resume_state->Z, resume_state->theta, lock)
                                    : hash_state(run.plan.z0, theta0, lock);

  std::ofstream history_out;
  if (!out_dir.empty()) {
    run.history_path = out_dir / "history.jsonl";
    history_out.open(run.history_path, resume ? std::ios::app : std::ios::trunc);
    if (!history_out) throw std::runtime_error("cannot write " + run.history_path.string());
  }
  opts.on_iteration = [&](const IterationRecord& rec, const CodesignState& st) {
    IterationHashes h = hash_state(st.Z, st.theta, lock);
    if (history_out.is_open()) {
      Json j = rec.to_json();
      j["hash_Z"] = h.z;
      j["hash_theta"] = h.theta;
      j["hash_material"] = h.material;
      history_out << j.dump() << '\n';
      history_out.flush();
    }
    run.hashes.push_back(std::move(h));
  };

  const CodesignResult res = run_codesign(robot, run.plan.z0, theta0, sim, run.plan.schedule, opts,
                                          resume_state ? &*resume_state : nullptr);
  run.history = res.history;
  run.z = res.Z;
  run.theta = res.theta;

  const Projection proj = physics_projection(res.state, opts);
  const RolloutRecord final_run = rollout(robot, proj.forward(res.Z), res.theta, sim);
  run.final_loss = final_run.loss;
  run.initial_head_x = final_run.initial.x[robot.lattice.head_index].x();
  run.final_head_x = final_run.final_state.x[robot.lattice.head_index].x();

  if (!out_dir.empty()) {
    run.out_dir = out_dir;
    const std::vector<SimState> traj = trajectory(robot, final_run, sim);
    run.trajectory_path = out_dir / "trajectory.csv";
    {
      std::ostringstream csv;
      write_trajectory_csv(csv, traj, sim.dt);
      write_text_file(run.trajectory_path, csv.str());
    }
    Json design;
    design["lattice"] = lattice_to_json(robot.lattice);
    design["design"] = design_to_json(res.Z);
    design["ground"] = {{"kind", cfg.ground.kind == GroundModel::Kind::flat ? "flat" : "incline"},
                        {"height", cfg.ground.height},
                        {"angle_deg", cfg.ground.angle_deg},
                        {"pivot", Json::array({cfg.ground.pivot.x(), cfg.ground.pivot.y()})}};
    run.design_path = out_dir / "design.json";
    write_text_file(run.design_path, design.dump(1));
    run.controller_path = out_dir / "controller.json";
    write_text_file(run.controller_path, controller_to_json(res.theta).dump());
    write_text_file(out_dir / "config.json", cfg.to_json().dump(2));
    if (cfg.write_frames) {
      run.frames = render_frames(traj, res.Z, robot.lattice, cfg.ground, out_dir / "frames", cfg.frame_stride);
    }
    if (std::filesystem::exists(opts.checkpoint_dir)) {
      for (const auto& entry : std::filesystem::directory_iterator(opts.checkpoint_dir)) {
        run.checkpoints.push_back(entry.path());
      }
      std::sort(run.checkpoints.begin(), run.checkpoints.end());
    }
  }

  run.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.metrics = export_metrics(cfg, run, "history.jsonl");
  if (!out_dir.empty()) {
    run.metrics_path = out_dir / "metrics.json";
    write_text_file(run.metrics_path, run.metrics.dump(2));
  }
  return run;
}

}  // namespace latticebot
