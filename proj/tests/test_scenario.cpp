#include "latticebot/baseline.hpp"
#include "latticebot/io.hpp"
#include "latticebot/render.hpp"
#include "latticebot/scenario.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace latticebot;

namespace {

ScenarioConfig tiny(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.rows = 3;
  c.cols = 3;
  c.iterations = 10;
  c.total_steps = 64;
  c.grad_min = 32;
  c.grad_max = 64;
  c.n_cpg = 4;
  c.frame_stride = 32;
  c.seed = 5;
  c.friction = FrictionModel{FrictionKind::coulomb, 0.5};
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("config parsing applies defaults and rejects unknown keys") {
  const ScenarioConfig d = ScenarioConfig::from_json(Json::object());
  CHECK(d.rows == 6);
  CHECK(d.total_steps == 8192);
  CHECK(d.damping == 2.0);
  CHECK(d.flags == AblationFlags{});

  const Json doc = Json::parse(R"({"grid": {"rows": 5, "cols": 4}, "init": "uniform",
      "environment": {"ground": "incline", "incline_deg": 15, "friction": "coulomb", "mu": 2.5},
      "budget": {"iterations": 12, "total_steps": 128}})");
  const ScenarioConfig c = ScenarioConfig::from_json(doc);
  CHECK(c.rows == 5);
  CHECK(c.cols == 4);
  CHECK(c.init == InitHeuristic::uniform);
  CHECK(c.ground.kind == GroundModel::Kind::incline);
  CHECK(c.friction.kind == FrictionKind::coulomb);
  CHECK(c.friction.mu == 2.5);

  const ScenarioConfig back = ScenarioConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  CHECK_THROWS_AS(ScenarioConfig::from_json(Json::parse(R"({"grid": {"rowz": 3}})")), std::invalid_argument);
  CHECK_THROWS_AS(ScenarioConfig::from_json(Json::parse(R"({"colour": 1})")), std::invalid_argument);
  CHECK_THROWS_AS(ScenarioConfig::from_json(Json::parse(R"({"init": "banana"})")), std::invalid_argument);
  CHECK_THROWS_AS(ScenarioConfig::from_json(Json::parse(R"({"grid": {"rows": 1}})")), std::invalid_argument);
  CHECK_THROWS_AS(ScenarioConfig::from_json(Json::parse(R"({"budget": {"dt": "fast"}})")), std::invalid_argument);
}

TEST_CASE("shipped configs parse") {
  const auto dir = std::filesystem::path(LATTICEBOT_SOURCE_DIR) / "configs";
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    CHECK_NOTHROW(ScenarioConfig::from_json(read_json_file(entry.path())));
    ++count;
  }
  CHECK(count >= 5);
}

TEST_CASE("trial letters enumerate every flag combination") {
  std::set<std::tuple<bool, bool, bool>> seen;
  for (char t = 'a'; t <= 'h'; ++t) {
    const AblationFlags f = trial_flags(t);
    seen.insert({f.topology, f.material, f.control});
  }
  CHECK(seen.size() == 8);
  CHECK(trial_flags('a') == AblationFlags{false, false, false});
  CHECK(trial_flags('h') == AblationFlags{true, true, true});
  CHECK(trial_flags('b') == AblationFlags{false, false, true});
  for (char t : {'a', 'c', 'e', 'g'}) CHECK_FALSE(trial_flags(t).control);
  for (char t : {'a', 'b', 'e', 'f'}) CHECK_FALSE(trial_flags(t).topology);
  for (char t : {'a', 'b', 'c', 'd'}) CHECK_FALSE(trial_flags(t).material);
  CHECK_THROWS_AS(trial_flags('i'), std::invalid_argument);
}

TEST_CASE("initialization heuristics") {
  const LatticeSpec lat = build_grid(6, 6, 0.1);
  const DesignMatrix u = init_heuristic(InitHeuristic::uniform, lat, 0);
  CHECK((u.array() == 1.0 / 3.0).all());

  const DesignMatrix s = init_heuristic(InitHeuristic::stability, lat, 0);
  double top = 0.0;
  for (int e = 0; e < lat.num_edges(); ++e) {
    CHECK(s.row(e).sum() == doctest::Approx(1.0));
    CHECK(s(e, kSkeleton) == doctest::Approx(s(e, kActuator)));
    top = std::max(top, s(e, kVoid) - 1.0 / 3.0);
    const auto [i, j] = lat.edges[e];
    if (lat.nodes[i].y() == 0.0 && lat.nodes[j].y() == 0.0) CHECK(s(e, kVoid) == doctest::Approx(1.0 / 3.0));
  }
  CHECK(top == doctest::Approx(0.12));

  const DesignMatrix base = build_baseline(lat).z;
  const DesignMatrix t = init_heuristic(InitHeuristic::three_legged, lat, 0);
  for (int e = 0; e < lat.num_edges(); ++e) {
    if (base(e, kVoid) == 1.0) CHECK(t(e, kVoid) > t(e, kSkeleton));
    else CHECK((t.row(e).array() == 1.0 / 3.0).all());
  }
  CHECK(init_heuristic(InitHeuristic::baseline_fixed, lat, 0) == base);
}

TEST_CASE("baseline layouts") {
  for (int n : {5, 6}) {
    const LatticeSpec lat = build_grid(n, n, 0.1);
    const BaselineLayout b = build_baseline(lat);
    CHECK(b.z.rows() == lat.num_edges());
    CHECK(is_one_hot(b.z));
    const VolumeFractions vf = volume_fractions(b.z);
    CHECK(vf.solid == doctest::Approx(0.5).epsilon(0.02));
    CHECK(vf.actuator > 0.18);
    CHECK(vf.actuator < 0.24);
    CHECK(b.z(0, kVoid) == 0.0);
    for (int e = 0; e < lat.num_edges(); ++e) {
      if (b.z(e, kActuator) == 1.0) CHECK(lat.orientation[e] == EdgeOrientation::vertical);
    }
  }
  CHECK_THROWS_AS(build_baseline(build_grid(4, 4, 0.1)), std::invalid_argument);
  CHECK_THROWS_AS(load_baseline(build_grid(6, 6, 0.1), data_dir() / "baseline_5x5.json"), std::invalid_argument);
}

TEST_CASE("ablation plans") {
  const LatticeSpec lat = build_grid(4, 4, 0.1);
  const ScheduleConfig sched = ScheduleConfig::scaled(30);
  const DesignMatrix z0 = init_heuristic(InitHeuristic::stability, lat, 0);

  const AblationPlan none = apply_ablation({false, false, false}, InitHeuristic::stability, z0, sched, lat);
  CHECK_FALSE(none.optimize_design);
  CHECK_FALSE(none.optimize_controller);
  CHECK(none.hash_z);
  CHECK(none.hash_theta);
  CHECK(none.z0 == default_filled_layout(lat));

  const AblationPlan mat = apply_ablation({false, true, true}, InitHeuristic::stability, z0, sched, lat);
  CHECK(mat.optimize_design);
  CHECK(mat.schedule.bounds.v_min >= 0.9);
  CHECK_FALSE(mat.hash_z);

  const AblationPlan topo = apply_ablation({true, false, true}, InitHeuristic::stability, z0, sched, lat);
  CHECK(topo.lock.has_value());
  CHECK(topo.hash_material);

  const AblationPlan all = apply_ablation({true, true, true}, InitHeuristic::stability, z0, sched, lat);
  CHECK(all.z0 == z0);
  CHECK_FALSE(all.hash_z);
  CHECK_FALSE(all.hash_theta);
  CHECK_FALSE(all.hash_material);

  CHECK_THROWS_AS(apply_ablation({true, true, true}, InitHeuristic::baseline_fixed, z0, sched, lat),
                  std::invalid_argument);
}

TEST_CASE("material map hash ignores topology changes") {
  const LatticeSpec lat = build_grid(3, 3, 0.1);
  const MaterialLock lock{default_material_preference(lat), 0.05};
  DesignMatrix a = DesignMatrix::Constant(lat.num_edges(), 3, 0.5);
  DesignMatrix b = a;
  b.col(kVoid).setConstant(0.9);
  CHECK(material_map_hash(a, &lock) == material_map_hash(b, &lock));
  DesignMatrix c = a;
  c(0, kActuator) = 0.9;
  CHECK(material_map_hash(c, nullptr) != material_map_hash(a, nullptr));
}

TEST_CASE("run_scenario writes every artifact and is reproducible") {
  const ScenarioConfig cfg = tiny("tiny");
  const auto d1 = temp_dir("latticebot_run_a");
  const auto d2 = temp_dir("latticebot_run_b");
  const RunArtifacts a = run_scenario(cfg, d1);
  const RunArtifacts b = run_scenario(cfg, d2);
  for (const char* f : {"metrics.json", "history.jsonl", "trajectory.csv", "design.json", "controller.json",
                        "config.json"}) {
    CHECK(std::filesystem::exists(d1 / f));
  }
  CHECK_FALSE(a.frames.empty());
  std::ifstream h(a.history_path);
  int lines = 0;
  for (std::string line; std::getline(h, line);) {
    const Json j = Json::parse(line);
    CHECK(j.contains("hash_Z"));
    ++lines;
  }
  CHECK(lines == 10);

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(a.trajectory_path) == slurp(b.trajectory_path));
  Json ma = a.metrics, mb = b.metrics;
  ma.erase("wallclock_s");
  mb.erase("wallclock_s");
  CHECK(ma == mb);
  CHECK(a.metrics["final_displacement_m"].get<double>() == doctest::Approx(-a.final_loss));
  CHECK(is_one_hot(a.z));
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST_CASE("run_scenario resumes from a checkpoint") {
  ScenarioConfig cfg = tiny("resume");
  cfg.checkpoint_every = 4;
  cfg.write_frames = false;
  const auto d1 = temp_dir("latticebot_resume_a");
  const RunArtifacts full = run_scenario(cfg, d1);
  const Json ck = read_json_file(d1 / "checkpoints" / "checkpoint_00004.json");
  const auto d2 = temp_dir("latticebot_resume_b");
  const RunArtifacts resumed = run_scenario(cfg, d2, &ck);
  CHECK(resumed.z == full.z);
  CHECK(resumed.theta.flatten() == full.theta.flatten());
  CHECK(resumed.final_loss == full.final_loss);
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST_CASE("frozen entities keep their hashes in every ablation trial") {
  for (char t = 'a'; t <= 'h'; ++t) {
    ScenarioConfig cfg = tiny(std::string("trial_") + t);
    cfg.rows = 5;
    cfg.cols = 5;
    cfg.init = InitHeuristic::stability;
    cfg.flags = trial_flags(t);
    cfg.iterations = 10;
    cfg.total_steps = 32;
    cfg.grad_min = 16;
    cfg.grad_max = 32;
    cfg.ground = GroundModel::flat_at(-0.05);
    const RunArtifacts run = run_scenario(cfg);
    REQUIRE(run.hashes.size() == 10);
    bool z_changed = false, theta_changed = false;
    for (const auto& h : run.hashes) {
      if (run.plan.hash_z) CHECK(h.z == run.initial_hashes.z);
      if (run.plan.hash_theta) CHECK(h.theta == run.initial_hashes.theta);
      if (run.plan.hash_material) CHECK(h.material == run.initial_hashes.material);
      z_changed |= h.z != run.initial_hashes.z;
      theta_changed |= h.theta != run.initial_hashes.theta;
    }
    CHECK(z_changed == run.plan.optimize_design);
    CHECK(theta_changed == run.plan.optimize_controller);
  }
}

TEST_CASE("svg rendering and csv round trip") {
  const LatticeSpec lat = build_grid(3, 3, 0.1, Vec2(0.1, 0.0));
  std::vector<SimState> traj(3, rest_state(lat));
  traj[1].x[4] += Vec2(0.02, 0.0);
  traj[2].x[0] += Vec2(0.05, 0.0);
  DesignMatrix z = DesignMatrix::Zero(lat.num_edges(), 3);
  z.col(kSkeleton).setOnes();
  const int act = lat.find_edge(1, 4);
  z.row(act) << 0, 0, 1;
  z.row(lat.find_edge(0, 1)) << 1, 0, 0;
  const std::string svg = render_svg(traj, 1, z, lat, GroundModel{});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("class=\"skeleton\"") != std::string::npos);
  CHECK(svg.find("class=\"actuator\" data-edge=\"" + std::to_string(act)) != std::string::npos);
  CHECK(svg.find("#d62728") != std::string::npos);
  CHECK(render_svg(traj, 0, z, lat, GroundModel{}).find("#d62728") == std::string::npos);
  CHECK(svg.find("class=\"ground\"") != std::string::npos);
  CHECK(svg.find("class=\"head-path\"") != std::string::npos);
  CHECK_THROWS_AS(render_svg(traj, 5, z, lat, GroundModel{}), std::invalid_argument);

  std::ostringstream csv;
  write_trajectory_csv(csv, traj, 0.002);
  std::istringstream in(csv.str());
  double dt = 0.0;
  const auto back = read_trajectory_csv(in, &dt);
  REQUIRE(back.size() == traj.size());
  CHECK(dt == doctest::Approx(0.002));
  for (size_t k = 0; k < traj.size(); ++k)
    for (size_t i = 0; i < traj[k].x.size(); ++i) CHECK(back[k].x[i] == traj[k].x[i]);

  const auto dir = temp_dir("latticebot_frames");
  const auto frames = render_frames(traj, z, lat, GroundModel{}, dir, 2);
  CHECK(frames.size() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("io helpers") {
  CHECK(sha256_hex("abc", 3) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto dir = temp_dir("latticebot_io");
  std::filesystem::create_directories(dir);
  write_text_file(dir / "a.json", "{\"x\": [1, 2]}");
  CHECK(read_json_file(dir / "a.json")["x"][1] == 2);
  write_text_file(dir / "b.json", "{oops");
  CHECK_THROWS_AS(read_json_file(dir / "b.json"), std::invalid_argument);
  CHECK_THROWS_AS(read_json_file(dir / "missing.json"), std::invalid_argument);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(5, 0.1, 0.9);
  CHECK(vector_from_json(vector_to_json(v)) == v);
  std::filesystem::remove_all(dir);
}
