#include "latticebot/codesign.hpp"
#include "latticebot/gradcheck.hpp"
#include "latticebot/io.hpp"
#include "latticebot/mma.hpp"
#include "latticebot/scenario.hpp"
#include "latticebot/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace latticebot;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

ScenarioConfig load_scenario(const std::filesystem::path& file) {
  ScenarioConfig cfg = ScenarioConfig::from_json(read_json_file(file));
  cfg.validate();
  return cfg;
}

Robot grid_robot(int rows, int cols, Vec2 origin) {
  Robot r;
  r.lattice = build_grid(rows, cols, 0.1, origin);
  return r;
}

DesignMatrix random_mixed(Eigen::Index rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  DesignMatrix z(rows, 3);
  for (auto& x : z.reshaped()) x = u(rng);
  return z;
}

Outcome structural_counts() {
  const auto t0 = std::chrono::steady_clock::now();
  const Robot r = grid_robot(6, 6, Vec2(0.1, 0.0));
  const MlpDims d = r.controller_dims();
  const double t = seconds_since(t0);
  const bool ok = r.lattice.num_edges() == 110 && d.input == 156 && d.hidden == 32 && d.output == 110;
  return {ok && t < 1.0, fmt("%d edges, MLP dims (%d, %d, %d), %.3f s", r.lattice.num_edges(), d.input, d.hidden,
                             d.output, t)};
}

Outcome gradient_contact_free() {
  const auto t0 = std::chrono::steady_clock::now();
  const Robot r = grid_robot(3, 3, Vec2(0.1, 1.0));
  SimConfig c;
  c.total_steps = 64;
  c.grad_steps = 64;
  c.damping = 0.0;
  const ControllerParams th = xavier_init(11, r.controller_dims());
  GradCheckConfig gc;
  gc.theta_coords = 20;
  gc.z_coords = 10;
  gc.h_z = 1e-5;
  const GradCheckReport rep = gradient_check(r, random_mixed(r.lattice.num_edges(), 10), Projection::performance(20.0),
                                             th, c, gc);
  const double t = seconds_since(t0);
  const double et = rep.max_rel_error("theta"), ez = rep.max_rel_error("z");
  const bool ok = rep.contact_events == 0 && rep.entries.size() == 30 && et < 1e-4 && ez < 1e-4 && t < 30.0;
  return {ok, fmt("max rel error theta %.2e, Z %.2e over %zu coordinates, %ld contacts, %.1f s", et, ez,
                  rep.entries.size(), rep.contact_events, t)};
}

Outcome gradient_contact_rich() {
  const auto t0 = std::chrono::steady_clock::now();
  Robot r = grid_robot(4, 4, Vec2(0.1, 0.0));
  SimConfig c;
  c.total_steps = 256;
  c.grad_steps = 256;
  const DesignMatrix z = init_heuristic(InitHeuristic::stability, r.lattice, 0);
  const ControllerParams th = xavier_init(5, r.controller_dims());
  GradCheckConfig gc;
  gc.theta_coords = 5;
  gc.z_coords = 5;
  gc.h_z = 1e-5;
  const GradCheckReport rep = gradient_check(r, z, Projection::performance(20.0), th, c, gc);
  const double t = seconds_since(t0);
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& e : rep.entries) smallest = std::min(smallest, std::abs(e.adjoint));
  const double err = rep.max_rel_error();
  const bool ok = rep.contact_events > 0 && rep.entries.size() == 10 && err < 5e-2 && t < 120.0;
  return {ok, fmt("max rel error %.2e over %zu coordinates (smallest |grad| %.1e), %ld contact events, %d grazing "
                  "coordinates rejected, %.1f s",
                  err, rep.entries.size(), smallest, rep.contact_events, rep.rejected_grazing, t)};
}

Outcome physics_invariants() {
  std::vector<std::string> parts;
  bool ok = true;

  {
    Robot r = grid_robot(5, 5, Vec2(0.1, 0.0));
    SimConfig c;
    c.total_steps = 8192;
    const DesignMatrix z = init_heuristic(InitHeuristic::stability, r.lattice, 0);
    const ControllerParams th = xavier_init(3, r.controller_dims());
    const RolloutRecord rec = rollout(r, project_performance(z, 20.0), th, c);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& s : trajectory(r, rec, c))
      for (const auto& x : s.x) worst = std::min(worst, c.ground.signed_distance(x));
    const bool a = worst >= -1e-9;
    ok &= a;
    parts.push_back(fmt("(a) min signed distance %.2e m over 8192 steps", worst));
  }
  {
    Robot r = grid_robot(3, 4, Vec2(0.0, 1.0));
    SimConfig c;
    c.total_steps = 1000;
    c.damping = 0.0;
    c.gravity = Vec2::Zero();
    c.ground_contact = false;
    const StateRatios z = project_performance(random_mixed(r.lattice.num_edges(), 6), 20.0);
    const ControllerParams th = xavier_init(7, r.controller_dims());
    SimState init = rest_state(r.lattice);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 0.2);
    for (auto& v : init.v) v = Vec2(n(rng), n(rng));
    const RolloutRecord rec = rollout(r, z, th, c, &init);
    const auto m = node_masses(r.lattice, z, r.lib, r.mass);
    Vec2 p0 = Vec2::Zero(), p1 = Vec2::Zero();
    double scale = 0.0;
    for (int i = 0; i < r.lattice.num_nodes(); ++i) {
      p0 += m[i] * init.v[i];
      p1 += m[i] * rec.final_state.v[i];
      scale += m[i] * rec.final_state.v[i].norm();
    }
    const double rel = (p1 - p0).norm() / std::max(p0.norm(), scale);
    ok &= rel <= 1e-10;
    parts.push_back(fmt("(b) momentum change %.1e relative over 1000 steps", rel));
  }
  {
    TwoNodeSpring sys;
    LatticeSpec lat;
    lat.rows = 1;
    lat.cols = 2;
    lat.spacing = sys.rest_length;
    lat.nodes = {Vec2(0.0, 0.0), Vec2(sys.rest_length, 0.0)};
    lat.edges = {{0, 1}};
    lat.orientation = {EdgeOrientation::horizontal};
    lat.rest_lengths = {sys.rest_length};
    SimConfig c;
    c.damping = 0.0;
    c.gravity = Vec2::Zero();
    c.ground_contact = false;
    SimState s;
    s.x = {sys.x1, sys.x2};
    s.v = {sys.v1, sys.v2};
    const std::vector<double> m{sys.m1, sys.m2};
    const Eigen::VectorXd k = Eigen::VectorXd::Constant(1, sys.k);
    const auto ref = reference_integrate(sys, c.dt / 100.0, 1000000, 100);
    double drift = 0.0;
    for (int step = 0; step < 10000; ++step) {
      const EdgeForces f = edge_forces(lat, s, k, Eigen::VectorXd::Zero(1), c.dt);
      s = integrate_step(s, f.impulse, m, c, step);
      const SpringSample& rs = ref[step + 1];
      const double er = sys.energy(rs.x1, rs.x2, rs.v1, rs.v2);
      drift = std::max(drift, std::abs(sys.energy(s.x[0], s.x[1], s.v[0], s.v[1]) - er) / er);
    }
    ok &= drift < 0.02;
    parts.push_back(fmt("(c) spring energy drift %.2f%% against the dt/100 reference", 100.0 * drift));
  }
  {
    SimConfig c;
    c.friction = {FrictionKind::coulomb, 2.5};
    const Vec2 above(0.0, 1e-4);
    const ContactResult slide = resolve_contact(above, Vec2(1.0, -0.2), c);
    const ContactResult clamp = resolve_contact(above, Vec2(0.1, -0.2), c);
    const bool d = slide.contact && std::abs(slide.v_post.x() - 0.5) < 1e-12 && slide.v_post.y() == 0.0 &&
                   clamp.contact && clamp.v_post.norm() == 0.0;
    ok &= d;
    parts.push_back(fmt("(d) Coulomb (1,-0.2)->(%.3g,%.3g), (0.1,-0.2)->(%.3g,%.3g)", slide.v_post.x(),
                        slide.v_post.y(), clamp.v_post.x(), clamp.v_post.y()));
  }
  std::string detail;
  for (const auto& p : parts) detail += (detail.empty() ? "" : "; ") + p;
  return {ok, detail};
}

Outcome projection_identities() {
  bool ok = true;
  const BinarizationPenalties pu = binarization_penalties(StateRatios::Constant(10, 3, 1.0 / 3.0), 1e-6);
  const double ebin = std::abs(pu.g_bin - (1.0 - 1.0 / std::sqrt(3.0)));
  ok &= ebin <= 1e-10;

  StateRatios hot = StateRatios::Zero(9, 3);
  for (int e = 0; e < 9; ++e) hot(e, e % 3) = 1.0;
  const BinarizationPenalties ph = binarization_penalties(hot, 1e-6);
  const double ortho = std::max({std::abs(ph.g_ortho[0]), std::abs(ph.g_ortho[1]), std::abs(ph.g_ortho[2])});
  ok &= ph.g_bin == 0.0 && ortho <= 1e-6;

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 2.0), beta(0.1, 500.0);
  DesignMatrix z(10000, 3);
  for (auto& x : z.reshaped()) x = u(rng);
  const StateRatios p = project_performance(z, beta(rng));
  const double sum_err = (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
  ok &= sum_err <= 1e-12;

  DesignMatrix zs(2000, 3);
  for (auto& x : zs.reshaped()) x = u(rng);
  const StateRatios sharp = project_performance(zs, 1e4);
  const DesignMatrix snap = hard_snap(zs);
  double snap_err = 0.0;
  int compared = 0;
  for (int e = 0; e < zs.rows(); ++e) {
    Eigen::RowVector3d r = zs.row(e);
    std::sort(r.data(), r.data() + 3);
    if (r(2) - r(1) < 2e-3) continue;
    snap_err = std::max(snap_err, (sharp.row(e) - snap.row(e)).cwiseAbs().maxCoeff());
    ++compared;
  }
  ok &= snap_err < 1e-6;
  return {ok, fmt("uniform g_bin error %.1e; one-hot g_bin %.1g, max |g_ortho| %.1e; row sums within %.1e over 10^4 "
                  "rows; beta=1e4 vs hard snap %.1e on %d rows",
                  ebin, ph.g_bin, ortho, sum_err, snap_err, compared)};
}

struct MmaProblem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> df0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> df;
  Eigen::VectorXd x0;
  Eigen::VectorXd optimum;
  double xmin = 0.0;
  double xmax = 1.0;
};

double mma_error(const MmaProblem& p) {
  MmaConfig cfg;
  cfg.move = 0.2;
  Eigen::VectorXd x = p.x0;
  MmaState st = MmaState::create(x, cfg, p.xmin, p.xmax);
  for (int k = 0; k < 300; ++k) {
    const MmaResult r = mma_step(st, cfg, x, p.df0(x), p.f(x), p.df(x));
    const double change = (r.x - x).cwiseAbs().maxCoeff();
    x = r.x;
    if (change < 1e-10) break;
  }
  return (x - p.optimum).cwiseAbs().maxCoeff();
}

Outcome optimizer_correctness() {
  std::vector<MmaProblem> suite(3);
  suite[0].df0 = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, 2.0 * x(0)); };
  suite[0].f = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, 0.5 - x(0)); };
  suite[0].df = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, -1.0); };
  suite[0].x0 = Eigen::VectorXd::Constant(1, 0.9);
  suite[0].optimum = Eigen::VectorXd::Constant(1, 0.5);

  suite[1].df0 = [](const Eigen::VectorXd& x) { return Eigen::Vector2d(2 * (x(0) - 0.8), 2 * (x(1) - 0.6)).eval(); };
  suite[1].f = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x(0) + x(1) - 1.0); };
  suite[1].df = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(1, 2); };
  suite[1].x0 = Eigen::Vector2d(0.1, 0.1);
  suite[1].optimum = Eigen::Vector2d(0.6, 0.4);

  const Eigen::Vector3d c(1.0, 4.0, 9.0);
  suite[2].df0 = [c](const Eigen::VectorXd& x) { return (-c.array() / x.array().square()).matrix().eval(); };
  suite[2].f = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, x.sum() - 1.2); };
  suite[2].df = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Ones(1, 3); };
  suite[2].x0 = Eigen::Vector3d(0.3, 0.3, 0.3);
  suite[2].optimum = Eigen::Vector3d(0.2, 0.4, 0.6);
  suite[2].xmin = 0.01;

  double mma_worst = 0.0;
  for (const auto& p : suite) mma_worst = std::max(mma_worst, mma_error(p));

  // Constant violations give lambda_n = -sum_i tau_i v and tau grows once, at the first update.
  const Vec4 v{0.2, 0.1, 0.05, 0.0};
  ALState al = ALState::initial(0.3, 1.01);
  double al_err = 0.0;
  for (int n = 1; n <= 50; ++n) {
    al = update_al(al, v);
    for (int k = 0; k < 4; ++k) {
      const double tau1 = v[k] > 0.0 ? 0.3 * 1.01 : 0.3;
      const double lambda = -(0.3 + (n - 1) * tau1) * v[k];
      al_err = std::max({al_err, std::abs(al.lambda[k] - lambda), std::abs(al.tau[k] - tau1)});
    }
  }

  ALState b = ALState::initial(0.3, 1.01);
  b = update_al(b, {0.5, 0.5, 0.5, 0.5});
  b = update_al(b, {0.6, 0.4, 0.5, 0.5});
  const bool branches = std::abs(b.tau[0] - 0.3 * 1.01 * 1.01) < 1e-15 && std::abs(b.tau[1] - 0.3) < 1e-15 &&
                        std::abs(b.tau[2] - 0.3 * 1.01) < 1e-15;

  const bool ok = mma_worst < 1e-4 && al_err <= 1e-12 && branches;
  return {ok, fmt("MMA worst distance to optimum %.1e over 3 problems; AL closed-form error %.1e; tau branches "
                  "(x1.01, /1.01, unchanged) %s",
                  mma_worst, al_err, branches ? "verified" : "WRONG")};
}

Outcome schedule_conformance() {
  Robot r = grid_robot(3, 3, Vec2(0.1, 0.0));
  r.cpg = CPGConfig{4, 10.0};
  SimConfig sim;
  sim.total_steps = 4096;
  sim.friction = {FrictionKind::coulomb, 2.5};
  const ScheduleConfig sched;
  CodesignOptions opts;
  std::vector<DesignMatrix> zs;
  opts.on_iteration = [&](const IterationRecord&, const CodesignState& st) { zs.push_back(st.Z); };
  const DesignMatrix z0 = init_heuristic(InitHeuristic::stability, r.lattice, 0);
  const CodesignResult res = run_codesign(r, z0, xavier_init(1, r.controller_dims()), sim, sched, opts);

  std::vector<std::string> bad;
  if (res.history.size() != 300) bad.push_back("history length");
  for (const auto& h : res.history) {
    const int i = h.iter;
    int expect_t = 2048;
    if (i >= 150) expect_t = 4096;
    else if (i > 80) expect_t = static_cast<int>(std::lround(2048.0 + (i - 80) / 70.0 * 2048.0));
    if (h.T_grad != expect_t) bad.push_back(fmt("T_grad(%d)=%d", i, h.T_grad));
    double expect_dv = 0.0;
    if (i >= 150) expect_dv = 0.03;
    else if (i > 110) expect_dv = 0.03 * (i - 110) / 40.0;
    if (std::abs(h.delta_V - expect_dv) > 1e-15) bad.push_back(fmt("delta_V(%d)=%g", i, h.delta_V));
    const bool z_pass = i < 240 && i % 5 < 3;
    if (z_pass != (h.pass != PassKind::controller)) bad.push_back(fmt("pass(%d)", i));
  }
  for (std::size_t i = 240; i < zs.size(); ++i) {
    if (!is_one_hot(zs[i]) || zs[i] != zs[240]) {
      bad.push_back(fmt("Z(%zu) not one-hot and constant", i));
      break;
    }
  }
  int stability = 0;
  for (const auto& h : res.history) stability += h.pass == PassKind::stability;
  std::string detail = fmt("300 iterations: T_grad 2048 -> 4096 over [80,150], delta_V 0 -> 0.03 over [110,150], "
                           "3 Z : 2 theta passes (%d stability), one-hot constant Z from 240",
                           stability);
  if (!bad.empty()) {
    detail = "violations:";
    for (std::size_t k = 0; k < std::min<std::size_t>(bad.size(), 8); ++k) detail += " " + bad[k];
  }
  return {bad.empty(), detail};
}

struct DeskRuns {
  std::filesystem::path config_dir;
  std::filesystem::path out_dir;
  std::optional<RunArtifacts> desk;
  std::optional<RunArtifacts> desk_repeat;
  std::optional<RunArtifacts> baseline;

  const RunArtifacts& get(std::optional<RunArtifacts>& slot, const char* config, const char* sub) {
    if (!slot) slot = run_scenario(load_scenario(config_dir / config), out_dir / sub);
    return *slot;
  }
};

void dump_history(const RunArtifacts& run) {
  std::cerr << "history of " << run.metrics["scenario"].get<std::string>() << " (" << run.history_path.string()
            << ")\n";
  for (const auto& h : run.history) {
    std::cerr << fmt("  %3d %-11s loss %+.5f V %.3f V_act %.3f g_bin %.3g T_grad %d%s\n", h.iter,
                     to_string(h.pass).c_str(), h.loss, h.V, h.V_act, h.g_bin, h.T_grad, h.skipped ? " skipped" : "");
  }
}

double net_displacement(const RunArtifacts& run) { return run.final_head_x - run.initial_head_x; }

Outcome desk_efficacy(DeskRuns& runs) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunArtifacts& desk = runs.get(runs.desk, "desk_5x5.json", "desk_5x5");
  const RunArtifacts& base = runs.get(runs.baseline, "baseline_5x5.json", "baseline_5x5");
  const double t = seconds_since(t0);
  const double d = net_displacement(desk), b = net_displacement(base);
  const bool improved = desk.final_loss < desk.history.front().loss;
  const bool ok = d > 0.0 && d >= 1.5 * b && is_one_hot(desk.z) && t < 7200.0;
  if (!ok) {
    dump_history(desk);
    dump_history(base);
  }
  return {ok, fmt("co-design %.4f m vs control-only baseline %.4f m (ratio %s, needs >= 1.5); final loss %.4f vs "
                  "initial %.4f (%s); %.0f s",
                  d, b, b > 0.0 ? fmt("%.2f", d / b).c_str() : "n/a", desk.final_loss, desk.history.front().loss,
                  improved ? "improved" : "not improved", t)};
}

Outcome ablation_integrity(const std::filesystem::path& config_dir) {
  ScenarioConfig base = load_scenario(config_dir / "stability_flat.json");
  std::vector<std::string> bad;
  std::string summary;
  for (char trial = 'a'; trial <= 'h'; ++trial) {
    ScenarioConfig cfg = base;
    cfg.flags = trial_flags(trial);
    cfg.name = base.name + "_trial_" + trial;
    const RunArtifacts run = run_scenario(cfg);
    bool z_changed = false, theta_changed = false;
    bool z_const = true, theta_const = true, mat_const = true;
    for (const auto& h : run.hashes) {
      z_changed |= h.z != run.initial_hashes.z;
      theta_changed |= h.theta != run.initial_hashes.theta;
      z_const &= h.z == run.initial_hashes.z;
      theta_const &= h.theta == run.initial_hashes.theta;
      mat_const &= h.material == run.initial_hashes.material;
    }
    if (run.plan.hash_z && !z_const) bad.push_back(fmt("%c: frozen Z changed", trial));
    if (run.plan.hash_theta && !theta_const) bad.push_back(fmt("%c: frozen theta changed", trial));
    if (run.plan.hash_material && !mat_const) bad.push_back(fmt("%c: frozen material map changed", trial));
    if (run.plan.optimize_design && !z_changed) bad.push_back(fmt("%c: enabled Z never changed", trial));
    if (run.plan.optimize_controller && !theta_changed) bad.push_back(fmt("%c: enabled theta never changed", trial));
    summary += fmt(" %c[%s%s%s]", trial, cfg.flags.topology ? "T" : "-", cfg.flags.material ? "M" : "-",
                   cfg.flags.control ? "C" : "-");
  }
  std::string detail = "8 trials x 300 iterations, frozen hashes constant and enabled entities changed:" + summary;
  if (!bad.empty()) {
    detail = "violations:";
    for (const auto& s : bad) detail += " " + s + ";";
  }
  return {bad.empty(), detail};
}

Outcome determinism(DeskRuns& runs) {
  const RunArtifacts& a = runs.get(runs.desk, "desk_5x5.json", "desk_5x5");
  const RunArtifacts& b = runs.get(runs.desk_repeat, "desk_5x5.json", "desk_5x5_repeat");
  const std::string ca = slurp(a.trajectory_path), cb = slurp(b.trajectory_path);
  Json ma = read_json_file(a.metrics_path), mb = read_json_file(b.metrics_path);
  ma.erase("wallclock_s");
  mb.erase("wallclock_s");
  const bool csv_same = !ca.empty() && ca == cb;
  const bool metrics_same = ma == mb;
  return {csv_same && metrics_same, fmt("trajectory CSV %s (%zu bytes, sha256 %.16s), metrics %s",
                                        csv_same ? "byte-identical" : "DIFFERS", ca.size(),
                                        sha256_hex(ca.data(), ca.size()).c_str(), metrics_same ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite: one pass/fail line per criterion"};
  std::string only;
  std::string config_dir = LATTICEBOT_CONFIG_DIR;
  std::string out_dir = "acceptance_out";
  app.add_option("--only", only, "Comma-separated criterion numbers (default: all)");
  app.add_option("--configs", config_dir, "Directory holding desk_5x5.json, baseline_5x5.json and stability_flat.json");
  app.add_option("--out", out_dir, "Directory for run artifacts");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (!tok.empty()) selected.insert(std::stoi(tok));
  }
  DeskRuns runs{config_dir, out_dir, {}, {}, {}};

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"structural counts", structural_counts},
      {"gradient fidelity, contact-free", gradient_contact_free},
      {"gradient fidelity, contact-rich", gradient_contact_rich},
      {"physics invariants", physics_invariants},
      {"projection and penalty identities", projection_identities},
      {"optimizer correctness", optimizer_correctness},
      {"schedule conformance", schedule_conformance},
      {"desk-scale co-design efficacy", [&] { return desk_efficacy(runs); }},
      {"ablation harness integrity", [&] { return ablation_integrity(config_dir); }},
      {"determinism", [&] { return determinism(runs); }},
  };

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
