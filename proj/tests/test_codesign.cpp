#include "latticebot/codesign.hpp"
#include "latticebot/io.hpp"

#include <doctest.h>

#include <filesystem>

using namespace latticebot;

namespace {

struct Setup {
  Robot robot;
  SimConfig sim;
  ScheduleConfig sched;
  CodesignOptions opts;
  DesignMatrix z0;
  ControllerParams theta0;
};

Setup small_setup(int iters) {
  Setup s;
  s.robot.lattice = build_grid(3, 3, 0.1, Vec2(0.1, 0.0));
  s.robot.cpg = CPGConfig{4, 10.0};
  s.sim.total_steps = 96;
  s.sim.friction = FrictionModel{FrictionKind::coulomb, 0.5};
  s.sched = ScheduleConfig::scaled(iters);
  s.sched.grad_min = 64;
  s.sched.grad_max = 96;
  s.z0 = DesignMatrix::Constant(s.robot.lattice.num_edges(), 3, 1.0 / 3.0);
  for (int e = 0; e < s.z0.rows(); ++e) s.z0(e, e % 3) += 0.05;
  s.theta0 = xavier_init(3, s.robot.controller_dims());
  return s;
}

}  // namespace

TEST_CASE("co-design follows the schedule and ends one-hot") {
  Setup s = small_setup(30);
  std::vector<DesignMatrix> zs;
  s.opts.on_iteration = [&](const IterationRecord&, const CodesignState& st) { zs.push_back(st.Z); };
  const CodesignResult r = run_codesign(s.robot, s.z0, s.theta0, s.sim, s.sched, s.opts);
  REQUIRE(r.history.size() == 30);
  for (int i = 0; i < 30; ++i) {
    const IterationRecord& h = r.history[i];
    CHECK(h.iter == i);
    CHECK(h.pass == schedule_pass(i, s.sched));
    CHECK(h.T_grad == std::min(grad_window(i, s.sched), s.sim.total_steps));
    CHECK(h.delta_V == delta_v(i, s.sched));
    CHECK_FALSE(h.skipped);
  }
  CHECK(is_one_hot(r.Z));
  for (int i = s.sched.snap_iter; i < 30; ++i) CHECK(zs[i] == r.Z);
  for (int i = 0; i < s.sched.snap_iter; ++i) {
    CHECK(zs[i].minCoeff() >= 0.0);
    CHECK(zs[i].maxCoeff() <= 1.0);
  }
  CHECK(r.theta.flatten() != s.theta0.flatten());
}

TEST_CASE("co-design is deterministic and resumes bit-exactly") {
  Setup s = small_setup(20);
  const auto dir = std::filesystem::temp_directory_path() / "latticebot_resume_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  s.opts.checkpoint_dir = dir;
  s.opts.checkpoint_every = 7;
  const CodesignResult full = run_codesign(s.robot, s.z0, s.theta0, s.sim, s.sched, s.opts);
  const CodesignResult again = run_codesign(s.robot, s.z0, s.theta0, s.sim, s.sched, s.opts);
  CHECK(full.Z == again.Z);
  CHECK(full.theta.flatten() == again.theta.flatten());

  const Json doc = read_json_file(checkpoint_path(dir, 7));
  const CodesignState st = CodesignState::from_json(doc);
  CHECK(st.next_iter == 7);
  const CodesignResult resumed = run_codesign(s.robot, s.z0, s.theta0, s.sim, s.sched, s.opts, &st);
  CHECK(resumed.Z == full.Z);
  CHECK(resumed.theta.flatten() == full.theta.flatten());
  CHECK(resumed.history.size() == 13);
  CHECK(resumed.history.back().loss == full.history.back().loss);
  std::filesystem::remove_all(dir);
}

TEST_CASE("frozen entities stay fixed") {
  Setup s = small_setup(10);
  s.opts.optimize_controller = false;
  const CodesignResult r = run_codesign(s.robot, s.z0, s.theta0, s.sim, s.sched, s.opts);
  CHECK(r.theta.flatten() == s.theta0.flatten());

  Setup t = small_setup(10);
  t.opts.optimize_design = false;
  const DesignMatrix fixed = hard_snap(t.z0);
  const CodesignResult q = run_codesign(t.robot, fixed, t.theta0, t.sim, t.sched, t.opts);
  CHECK(q.Z == fixed);
  for (const auto& h : q.history) CHECK(h.pass == PassKind::controller);
}

TEST_CASE("repeated divergence aborts with diagnostics") {
  Setup s = small_setup(10);
  s.sim.gravity = Vec2(0.0, -1e308);
  int seen = 0;
  s.opts.on_iteration = [&](const IterationRecord& h, const CodesignState&) {
    CHECK(h.skipped);
    ++seen;
  };
  CHECK_THROWS_AS(run_codesign(s.robot, s.z0, s.theta0, s.sim, s.sched, s.opts), CodesignAborted);
  CHECK(seen == 2);
}

TEST_CASE("a single divergence is skipped and shrinks the step") {
  Setup s = small_setup(10);
  s.opts.max_consecutive_failures = 100;
  s.sim.gravity = Vec2(0.0, -1e308);
  const CodesignResult r = run_codesign(s.robot, s.z0, s.theta0, s.sim, s.sched, s.opts);
  for (const auto& h : r.history) CHECK(h.skipped);
  CHECK(r.state.mma.move < s.opts.mma.move);
  CHECK(r.state.adam.lr < s.opts.adam_lr);
}

TEST_CASE("state json round trip") {
  Setup s = small_setup(5);
  const CodesignResult r = run_codesign(s.robot, s.z0, s.theta0, s.sim, s.sched, s.opts);
  const CodesignState back = CodesignState::from_json(r.state.to_json());
  CHECK(back.Z == r.state.Z);
  CHECK(back.theta.flatten() == r.state.theta.flatten());
  CHECK(back.al.lambda == r.state.al.lambda);
  CHECK(back.mma.low == r.state.mma.low);
  CHECK(back.adam.v == r.state.adam.v);
  CHECK(back.next_iter == 5);
  CHECK_THROWS_AS(CodesignState::from_json(Json::parse("{\"next_iter\": 1}")), std::invalid_argument);
}

TEST_CASE("iteration record json") {
  IterationRecord rec;
  rec.iter = 4;
  rec.pass = PassKind::stability;
  rec.loss = std::numeric_limits<double>::quiet_NaN();
  rec.skipped = true;
  const Json j = rec.to_json();
  CHECK(j["pass"] == "stability");
  CHECK(j["loss"].is_null());
  CHECK(j["skipped"] == true);
  CHECK(j["lambda"].size() == 4);
}
