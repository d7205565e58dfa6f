#include "latticebot/gradcheck.hpp"
#include "latticebot/sim.hpp"
#include "latticebot/verify.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace latticebot;

namespace {

Robot small_robot(int rows, int cols, Vec2 origin = Vec2::Zero()) {
  Robot r;
  r.lattice = build_grid(rows, cols, 0.1, origin);
  r.cpg = CPGConfig{4, 10.0};
  return r;
}

StateRatios mixed_design(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  StateRatios z(n, 3);
  for (int e = 0; e < n; ++e) {
    for (int k = 0; k < 3; ++k) z(e, k) = u(rng);
    z.row(e) /= z.row(e).sum();
  }
  return z;
}

LatticeSpec two_node_lattice(double rest) {
  LatticeSpec lat;
  lat.rows = 1;
  lat.cols = 2;
  lat.spacing = rest;
  lat.nodes = {Vec2(0.0, 0.0), Vec2(rest, 0.0)};
  lat.edges = {{0, 1}};
  lat.orientation = {EdgeOrientation::horizontal};
  lat.rest_lengths = {rest};
  return lat;
}

SimConfig free_space(double dt = 0.002) {
  SimConfig c;
  c.dt = dt;
  c.damping = 0.0;
  c.gravity = Vec2::Zero();
  c.ground_contact = false;
  return c;
}

}  // namespace

TEST_CASE("edge forces: hand values and action-reaction") {
  const LatticeSpec lat = two_node_lattice(0.1);
  SimState s;
  s.x = {Vec2(0.0, 0.0), Vec2(0.11, 0.0)};
  s.v = {Vec2::Zero(), Vec2::Zero()};
  const EdgeForces f = edge_forces(lat, s, Eigen::VectorXd::Constant(1, 400.0), Eigen::VectorXd::Zero(1), 0.002);
  CHECK(f.force(0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(f.impulse[0].x() == doctest::Approx(4.0 * 0.002));
  CHECK((f.impulse[0] + f.impulse[1]).norm() == 0.0);

  s.x[1] = Vec2(0.1 * 1.2, 0.0);
  const EdgeForces rest = edge_forces(lat, s, Eigen::VectorXd::Constant(1, 30.0), Eigen::VectorXd::Constant(1, 0.2), 0.002);
  CHECK(std::abs(rest.force(0)) < 1e-12);

  s.x[1] = Vec2(1e-7, 0.0);
  CHECK_THROWS_AS(edge_forces(lat, s, Eigen::VectorXd::Constant(1, 400.0), Eigen::VectorXd::Zero(1), 0.002),
                  DegenerateGeometry);
}

TEST_CASE("impulses cancel pairwise on a random lattice") {
  Robot r = small_robot(4, 4);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.01);
  SimState s = rest_state(r.lattice);
  for (auto& x : s.x) x += Vec2(n(rng), n(rng));
  const StateRatios z = mixed_design(r.lattice.num_edges(), 2);
  const Eigen::VectorXd eps = Eigen::VectorXd::Random(r.lattice.num_edges()) * 0.3;
  const EdgeForces f = edge_forces(r.lattice, s, z, r.lib, eps, 0.002);
  Vec2 total = Vec2::Zero();
  for (const auto& j : f.impulse) total += j;
  CHECK(total.norm() < 1e-15);
}

TEST_CASE("ballistic node follows the symplectic recurrence") {
  SimConfig c;
  c.damping = 0.0;
  c.ground_contact = false;
  SimState s;
  s.x = {Vec2(0.0, 5.0)};
  s.v = {Vec2(0.3, 0.0)};
  const int n = 100;
  for (int k = 0; k < n; ++k) s = integrate_step(s, {Vec2::Zero()}, {0.01}, c, k);
  CHECK(s.v[0].y() == doctest::Approx(n * c.gravity.y() * c.dt).epsilon(1e-12));
  const double y = 5.0 + c.gravity.y() * c.dt * c.dt * n * (n + 1) / 2.0;
  CHECK(s.x[0].y() == doctest::Approx(y).epsilon(1e-12));
  CHECK(s.x[0].x() == doctest::Approx(0.3 * c.dt * n).epsilon(1e-12));
}

TEST_CASE("damping decays velocity by the exact factor") {
  SimConfig c = free_space();
  c.damping = 2.0;
  SimState s;
  s.x = {Vec2::Zero()};
  s.v = {Vec2(1.0, -0.5)};
  for (int k = 0; k < 10; ++k) {
    const Vec2 before = s.v[0];
    s = integrate_step(s, {Vec2::Zero()}, {1.0}, c, k);
    CHECK((s.v[0] - std::exp(-2.0 * 0.002) * before).norm() < 1e-15);
  }

  TwoNodeSpring sys;
  sys.k = 0.0;
  sys.damping = 3.0;
  sys.v1 = Vec2(1.0, 0.0);
  const auto samples = reference_integrate(sys, 1e-4, 10000, 1000);
  for (const auto& smp : samples) CHECK(smp.v1.x() == doctest::Approx(std::exp(-3.0 * smp.t)).epsilon(1e-9));
}

TEST_CASE("contact: friction cases") {
  SimConfig c;
  const Vec2 above(0.0, 1e-4);
  SUBCASE("infinite friction stops the node") {
    const ContactResult r = resolve_contact(above, Vec2(1.0, -2.0), c);
    CHECK(r.contact);
    CHECK(r.v_post.norm() == 0.0);
    CHECK(r.x_end.y() >= -1e-12);
  }
  SUBCASE("Coulomb sliding") {
    c.friction = {FrictionKind::coulomb, 2.5};
    const ContactResult r = resolve_contact(above, Vec2(1.0, -0.2), c);
    CHECK(r.v_post.x() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.v_post.y() == 0.0);
  }
  SUBCASE("Coulomb clamp") {
    c.friction = {FrictionKind::coulomb, 2.5};
    const ContactResult r = resolve_contact(above, Vec2(0.1, -0.2), c);
    CHECK(r.v_post.norm() == 0.0);
  }
  SUBCASE("no crossing leaves the node untouched") {
    const ContactResult r = resolve_contact(Vec2(0.0, 1.0), Vec2(1.0, -2.0), c);
    CHECK_FALSE(r.contact);
    CHECK(r.v_post == Vec2(1.0, -2.0));
    CHECK((r.x_end - Vec2(0.002, 1.0 - 0.004)).norm() < 1e-15);
  }
  SUBCASE("time of impact is interpolated") {
    const ContactResult r = resolve_contact(Vec2(0.0, 0.002), Vec2(1.0, -2.0), c);
    CHECK(r.toi == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(r.x_toi.x() == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(std::abs(r.x_toi.y()) < 1e-15);
  }
}

TEST_CASE("contact never adds energy and friction never reverses sliding") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0), h(0.0, 0.01), mu(0.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    SimConfig c;
    if (i % 2) c.friction = {FrictionKind::coulomb, mu(rng)};
    if (i % 3 == 0) c.ground = GroundModel::incline(15.0, Vec2(0.0, 0.0));
    const Vec2 x(u(rng) * 0.1, h(rng));
    const Vec2 v(u(rng), u(rng));
    if (c.ground.signed_distance(x) < 0.0) continue;
    const ContactResult r = resolve_contact(x, v, c);
    CHECK(r.v_post.squaredNorm() <= v.squaredNorm() + 1e-15);
    CHECK(c.ground.signed_distance(r.x_end) >= -1e-9);
    if (r.contact && c.friction.kind == FrictionKind::coulomb) {
      const SurfaceFrame f = c.ground.frame_at(r.x_toi.x());
      const double vt = v.dot(f.tangent), vp = r.v_post.dot(f.tangent);
      CHECK(std::abs(vp) <= std::abs(vt) + 1e-15);
      CHECK(vp * vt >= 0.0);
    }
  }
}

TEST_CASE("ground model frames") {
  const GroundModel g = GroundModel::incline(15.0, Vec2(1.0, 0.0));
  CHECK(g.frame_at(0.5).normal == Vec2(0.0, 1.0));
  const SurfaceFrame f = g.frame_at(2.0);
  CHECK(f.normal.dot(f.tangent) == doctest::Approx(0.0).scale(1.0));
  CHECK(f.tangent.y() == doctest::Approx(std::sin(15.0 * M_PI / 180.0)));
  CHECK(g.signed_distance(Vec2(2.0, std::tan(15.0 * M_PI / 180.0))) == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(GroundModel::incline(60.0, Vec2::Zero()), std::invalid_argument);
}

TEST_CASE("non-penetration over a long rollout") {
  Robot r = small_robot(3, 3, Vec2(0.1, 0.05));
  SimConfig c;
  c.total_steps = 8192;
  const ControllerParams th = xavier_init(5, r.controller_dims());
  const RolloutRecord rec = rollout(r, mixed_design(r.lattice.num_edges(), 4), th, c);
  double worst = 0.0;
  for (const auto& s : trajectory(r, rec, c))
    for (const auto& x : s.x) worst = std::min(worst, c.ground.signed_distance(x));
  CHECK(worst >= -1e-9);
  CHECK(rec.contact_events > 0);
}

TEST_CASE("momentum is conserved without external forces") {
  Robot r = small_robot(3, 4, Vec2(0.0, 1.0));
  SimConfig c = free_space();
  c.total_steps = 1000;
  const StateRatios z = mixed_design(r.lattice.num_edges(), 6);
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
  CHECK((p1 - p0).norm() <= 1e-10 * std::max(p0.norm(), scale));
}

TEST_CASE("undamped spring: energy drift and period") {
  TwoNodeSpring sys;
  const LatticeSpec lat = two_node_lattice(sys.rest_length);
  const SimConfig c = free_space(0.002);
  SimState s;
  s.x = {sys.x1, sys.x2};
  s.v = {sys.v1, sys.v2};
  const std::vector<double> m{sys.m1, sys.m2};
  const Eigen::VectorXd k = Eigen::VectorXd::Constant(1, sys.k);
  const double e0 = sys.energy(s.x[0], s.x[1], s.v[0], s.v[1]);
  double drift = 0.0;
  for (int step = 0; step < 10000; ++step) {
    const EdgeForces f = edge_forces(lat, s, k, Eigen::VectorXd::Zero(1), c.dt);
    s = integrate_step(s, f.impulse, m, c, step);
    drift = std::max(drift, std::abs(sys.energy(s.x[0], s.x[1], s.v[0], s.v[1]) - e0) / e0);
  }
  CHECK(drift < 0.02);

  const auto ref = reference_integrate(sys, c.dt / 100.0, 1000000, 100);
  const double ref_e = sys.energy(ref.back().x1, ref.back().x2, ref.back().v1, ref.back().v2);
  CHECK(std::abs(ref_e - e0) / e0 < 1e-3);
  const double analytic = 2.0 * M_PI / sys.angular_frequency();
  CHECK(measured_period(sys, ref) == doctest::Approx(analytic).epsilon(0.01));
}

TEST_CASE("rollout determinism and trivial controllers") {
  Robot r = small_robot(3, 3, Vec2(0.1, 0.0));
  SimConfig c;
  c.total_steps = 400;
  const StateRatios z = mixed_design(r.lattice.num_edges(), 9);
  const ControllerParams th = xavier_init(1, r.controller_dims());
  const RolloutRecord a = rollout(r, z, th, c);
  const RolloutRecord b = rollout(r, z, th, c);
  CHECK(a.loss == b.loss);
  CHECK(a.contact_signature == b.contact_signature);
  std::ostringstream sa, sb;
  write_trajectory_csv(sa, trajectory(r, a, c), c.dt);
  write_trajectory_csv(sb, trajectory(r, b, c), c.dt);
  CHECK(sa.str() == sb.str());

  const RolloutRecord zero = rollout(r, z, ControllerParams::zeros(r.controller_dims()), c);
  CHECK(std::abs(zero.loss + 0.1) < 0.1);

  StateRatios all_void = StateRatios::Zero(r.lattice.num_edges(), 3);
  all_void.col(kVoid).setOnes();
  const RolloutRecord v = rollout(r, all_void, th, c);
  CHECK(std::abs(-v.loss - 0.1) < 0.01);
  CHECK(loss_displacement(v) == v.loss);
}

TEST_CASE("trajectory csv format") {
  std::vector<SimState> states(2);
  states[0].x = {Vec2(0.1, 0.0)};
  states[0].v = {Vec2(0.0, 0.0)};
  states[1].x = {Vec2(1.0 / 3.0, 0.5)};
  states[1].v = {Vec2(-0.25, 2.0)};
  std::ostringstream out;
  write_trajectory_csv(out, states, 0.002);
  const std::string s = out.str();
  CHECK(s.rfind("step,time,node_id,x,y,vx,vy\n", 0) == 0);
  CHECK(s.find("0.33333333333333331") != std::string::npos);
}

TEST_CASE("contact-free gradients match finite differences") {
  Robot r = small_robot(3, 3, Vec2(0.1, 1.0));
  SimConfig c;
  c.total_steps = 64;
  c.grad_steps = 64;
  c.damping = 0.0;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  DesignMatrix z(r.lattice.num_edges(), 3);
  for (auto& x : z.reshaped()) x = u(rng);
  const ControllerParams th = xavier_init(11, r.controller_dims());
  GradCheckConfig gc;
  gc.h_z = 1e-5;
  const GradCheckReport rep = gradient_check(r, z, Projection::performance(20.0), th, c, gc);
  CHECK(rep.contact_events == 0);
  CHECK(rep.entries.size() == 30);
  CHECK(rep.max_rel_error("theta") < 1e-4);
  CHECK(rep.max_rel_error("z") < 1e-4);
}

TEST_CASE("gradients through a void edge use only leakage terms") {
  Robot r = small_robot(3, 3, Vec2(0.1, 1.0));
  SimConfig c;
  c.total_steps = 64;
  c.grad_steps = 64;
  c.damping = 0.0;
  DesignMatrix z = DesignMatrix::Constant(r.lattice.num_edges(), 3, 0.5);
  for (int e = 0; e < r.lattice.num_edges(); ++e) z(e, e % 3) = 0.9;
  z.row(0) << 1.0, 0.0, 0.0;
  const ControllerParams th = xavier_init(12, r.controller_dims());
  const Projection p = Projection::performance(20.0);
  const DesignGradient g = rollout_grad(r, z, p, th, c);
  for (int k = 0; k < 3; ++k) {
    const double h = 1e-5;
    DesignMatrix zp = z, zm = z;
    zp(0, k) += h;
    zm(0, k) -= h;
    const double fd = (rollout(r, p.forward(zp), th, c).loss - rollout(r, p.forward(zm), th, c).loss) / (2 * h);
    CHECK(relative_error(g.d_design(0, k), fd, 1e-14) < 1e-3);
  }
}

TEST_CASE("checkpointed reverse sweep reproduces full storage") {
  Robot r = small_robot(3, 3, Vec2(0.1, 0.0));
  SimConfig c;
  c.total_steps = 300;
  c.grad_steps = 200;
  const DesignMatrix z = mixed_design(r.lattice.num_edges(), 13);
  const ControllerParams th = xavier_init(14, r.controller_dims());
  const Projection p = Projection::performance(20.0);
  const DesignGradient full = rollout_grad(r, z, p, th, c);
  for (int stride : {7, 16, 300}) {
    SimConfig cs = c;
    cs.checkpoint_stride = stride;
    const DesignGradient chk = rollout_grad(r, z, p, th, cs);
    CHECK(chk.loss == full.loss);
    CHECK(chk.d_design == full.d_design);
    CHECK(chk.d_theta.flatten() == full.d_theta.flatten());
  }
}

TEST_CASE("gradient window") {
  Robot r = small_robot(3, 3, Vec2(0.1, 1.0));
  SimConfig c;
  c.total_steps = 80;
  c.grad_steps = 80;
  c.damping = 0.0;
  const DesignMatrix z = mixed_design(r.lattice.num_edges(), 15);
  const ControllerParams th = xavier_init(16, r.controller_dims());
  const Projection p = Projection::performance(20.0);
  const DesignGradient full = rollout_grad(r, z, p, th, c);
  const DesignGradient again = rollout_grad(r, z, p, th, c);
  CHECK(full.d_theta.flatten() == again.d_theta.flatten());

  SimConfig cw = c;
  cw.grad_steps = 1;
  const DesignGradient one = rollout_grad(r, z, p, th, cw);
  CHECK(one.loss == full.loss);
  CHECK(one.d_theta.flatten() != full.d_theta.flatten());
  CHECK(one.d_theta.flatten().norm() < full.d_theta.flatten().norm());
}

TEST_CASE("adjoint clipping bounds the reverse sweep") {
  Robot r = small_robot(3, 3, Vec2(0.1, 0.0));
  SimConfig c;
  c.total_steps = 600;
  c.grad_steps = 600;
  const DesignMatrix z = mixed_design(r.lattice.num_edges(), 17);
  const ControllerParams th = xavier_init(18, r.controller_dims());
  const Projection p = Projection::performance(20.0);
  const DesignGradient free = rollout_grad(r, z, p, th, c);
  SimConfig cc = c;
  cc.adjoint_clip = 1e-3;
  const DesignGradient clipped = rollout_grad(r, z, p, th, cc);
  CHECK(clipped.loss == free.loss);
  CHECK(clipped.d_theta.flatten().allFinite());
  CHECK(clipped.d_theta.flatten().norm() <= free.d_theta.flatten().norm());
  SimConfig huge = c;
  huge.adjoint_clip = 1e300;
  CHECK(rollout_grad(r, z, p, th, huge).d_theta.flatten() == free.d_theta.flatten());
}

TEST_CASE("collapsed void edges are slack") {
  const LatticeSpec lat = two_node_lattice(0.1);
  SimConfig c = free_space();
  SimState s;
  s.x = {Vec2(0.0, 0.0), Vec2(0.0, 0.0)};
  s.v = {Vec2::Zero(), Vec2::Zero()};
  CHECK_THROWS_AS(edge_forces(lat, s, Eigen::VectorXd::Constant(1, 1e-7), Eigen::VectorXd::Zero(1), c.dt),
                  DegenerateGeometry);

  Robot r = small_robot(2, 2, Vec2(0.0, 0.0));
  SimConfig cr;
  cr.total_steps = 5;
  StateRatios z = StateRatios::Zero(r.lattice.num_edges(), 3);
  z.col(kVoid).setOnes();
  SimState init = rest_state(r.lattice);
  init.x[3] = init.x[0];
  const RolloutRecord rec = rollout(r, z, ControllerParams::zeros(r.controller_dims()), cr, &init);
  CHECK(std::isfinite(rec.loss));
  z.row(r.lattice.find_edge(0, 3)) << 1.0 - 2e-5, 1e-5, 1e-5;
  CHECK(std::isfinite(rollout(r, z, ControllerParams::zeros(r.controller_dims()), cr, &init).loss));
  z.row(r.lattice.find_edge(0, 3)) << 0.0, 1.0, 0.0;
  CHECK_THROWS_AS(rollout(r, z, ControllerParams::zeros(r.controller_dims()), cr, &init), DegenerateGeometry);
}

TEST_CASE("simulation config validation") {
  SimConfig c;
  c.grad_steps = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SimConfig{};
  c.dt = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SimConfig{};
  c.friction.mu = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SimConfig{};
  c.adjoint_clip = -1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("diverging state is reported") {
  SimConfig c = free_space();
  SimState s;
  s.x = {Vec2::Zero()};
  s.v = {Vec2::Zero()};
  CHECK_THROWS_AS(integrate_step(s, {Vec2(std::numeric_limits<double>::infinity(), 0.0)}, {1.0}, c, 3),
                  SimulationDiverged);
}
