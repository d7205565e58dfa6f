#include "latticebot/controller.hpp"
#include "latticebot/design.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace latticebot;

namespace {

ControllerParams random_params(const MlpDims& d, std::mt19937_64& rng, double scale = 1.0) {
  ControllerParams p = xavier_init(rng(), d);
  std::normal_distribution<double> n(0.0, 0.3 * scale);
  for (auto& b : p.b1.reshaped()) b = n(rng);
  for (auto& b : p.b2.reshaped()) b = n(rng);
  return p;
}

}  // namespace

TEST_CASE("controller dimensions") {
  CHECK(controller_input_dim(10, 36) == 156);
  const ControllerParams p = xavier_init(1, {156, 32, 110});
  CHECK(p.w1.rows() == 156);
  CHECK(p.w1.cols() == 32);
  CHECK(p.w2.rows() == 32);
  CHECK(p.w2.cols() == 110);
  CHECK(p.size() == 156 * 32 + 32 + 32 * 110 + 110);
  for (int r = 2; r <= 8; ++r) {
    for (int c = 2; c <= 8; ++c) {
      std::vector<Vec2> x(r * c, Vec2::Zero()), v(r * c, Vec2::Zero());
      CHECK(assemble_input(x, v, GoalSpec{}, cpg_signals(0.0, CPGConfig{})).size() == controller_input_dim(10, r * c));
    }
  }
}

TEST_CASE("xavier initialization") {
  const MlpDims d{156, 32, 110};
  const ControllerParams a = xavier_init(42, d);
  const ControllerParams b = xavier_init(42, d);
  CHECK(a.flatten() == b.flatten());
  CHECK(xavier_init(43, d).flatten() != a.flatten());
  CHECK(a.b1.isZero());
  CHECK(a.b2.isZero());
  const double bound = std::sqrt(6.0 / (156 + 32));
  CHECK(a.w1.cwiseAbs().maxCoeff() <= bound);
  double sum = 0.0, sq = 0.0;
  int count = 0;
  for (int s = 0; s < 3; ++s) {
    const ControllerParams p = xavier_init(100 + s, d);
    for (double w : p.w1.reshaped()) {
      sum += w;
      sq += w * w;
      ++count;
    }
  }
  const double mean = sum / count;
  const double sd = std::sqrt(sq / count - mean * mean);
  CHECK(sd == doctest::Approx(bound / std::sqrt(3.0)).epsilon(0.05));
}

TEST_CASE("cpg signals") {
  const CPGConfig cfg{10, 10.0};
  const Eigen::VectorXd c0 = cpg_signals(0.0, cfg);
  CHECK(c0(0) == 0.0);
  CHECK(std::abs(c0(5)) < 1e-15);
  CHECK(c0(1) == doctest::Approx(0.587785).epsilon(1e-6));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> t(0.0, 20.0);
  for (int i = 0; i < 100; ++i) {
    const double ti = t(rng);
    const Eigen::VectorXd a = cpg_signals(ti, cfg);
    const Eigen::VectorXd b = cpg_signals(ti + 2.0 * std::numbers::pi / cfg.omega, cfg);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(a.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("input assembly centers positions") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::vector<Vec2> x(9), v(9);
  for (auto& p : x) p = Vec2(n(rng), n(rng));
  for (auto& p : v) p = Vec2(n(rng), n(rng));
  const CPGConfig cfg{4, 10.0};
  const GoalSpec goal{Vec2(2.0, 0.1)};
  const Eigen::VectorXd in = assemble_input(x, v, goal, cpg_signals(0.3, cfg));
  CHECK(in.size() == 4 + 2 + 36);
  CHECK(in(4) == 2.0);
  CHECK(in(5) == 0.1);
  Vec2 sum = Vec2::Zero();
  for (int i = 0; i < 9; ++i) sum += in.segment<2>(6 + 2 * i);
  CHECK(sum.norm() < 1e-14);
  for (int i = 0; i < 9; ++i) CHECK(in.segment<2>(6 + 18 + 2 * i) == v[i]);

  std::vector<Vec2> same(9, Vec2(0.3, 0.7));
  const Eigen::VectorXd z = assemble_input(same, v, goal, cpg_signals(0.0, cfg));
  CHECK(z.segment(6, 18).isZero());

  std::vector<Vec2> short_v(8);
  CHECK_THROWS_AS(assemble_input(x, short_v, goal, cpg_signals(0.0, cfg)), std::invalid_argument);
}

TEST_CASE("forward output is bounded") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 5.0);
  const MlpDims d{12, 8, 5};
  CHECK(forward(ControllerParams::zeros(d), Eigen::VectorXd::Ones(12)).isZero());
  for (int i = 0; i < 1000; ++i) {
    const ControllerParams p = random_params(d, rng, 10.0);
    Eigen::VectorXd in(12);
    for (auto& x : in) x = n(rng);
    const Eigen::VectorXd u = forward(p, in);
    CHECK(u.cwiseAbs().maxCoeff() < 1.0);
  }
  CHECK_THROWS_AS(forward(ControllerParams::zeros(d), Eigen::VectorXd::Ones(11)), std::invalid_argument);
}

TEST_CASE("controller backward matches finite differences") {
  std::mt19937_64 rng(4);
  const MlpDims d{7, 6, 4};
  const ControllerParams p = random_params(d, rng);
  Eigen::VectorXd in = Eigen::VectorXd::Random(7);
  const Eigen::VectorXd w = Eigen::VectorXd::Random(4);

  MlpActivations acts;
  forward(p, in, &acts);
  ControllerParams g = ControllerParams::zeros(d);
  Eigen::VectorXd gin;
  backward(p, acts, w, g, &gin);

  const Eigen::VectorXd flat = p.flatten();
  const Eigen::VectorXd ga = g.flatten();
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Eigen::VectorXd fp = flat, fm = flat;
    fp(i) += h;
    fm(i) -= h;
    const double fd =
        (w.dot(forward(ControllerParams::unflatten(d, fp), in)) - w.dot(forward(ControllerParams::unflatten(d, fm), in))) /
        (2 * h);
    worst = std::max(worst, std::abs(fd - ga(i)) / std::max({std::abs(fd), std::abs(ga(i)), 1e-8}));
  }
  CHECK(worst < 1e-6);

  for (int i = 0; i < 7; ++i) {
    Eigen::VectorXd ip = in, im = in;
    ip(i) += h;
    im(i) -= h;
    const double fd = (w.dot(forward(p, ip)) - w.dot(forward(p, im))) / (2 * h);
    CHECK(gin(i) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("target strains") {
  const MaterialLibrary lib = MaterialLibrary::standard();
  StateRatios z(3, 3);
  z << 0, 1, 0, 0, 0, 1, 0, 0.5, 0.5;
  const Eigen::VectorXd eps = target_strains(Eigen::Vector3d(0.8, 1.0, -1.0), z, lib);
  CHECK(eps(0) == 0.0);
  CHECK(eps(1) == doctest::Approx(0.35));
  CHECK(eps(2) == doctest::Approx(-0.175));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0), r(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    StateRatios zz(4, 3);
    for (auto& x : zz.reshaped()) x = r(rng);
    for (int e = 0; e < 4; ++e) zz.row(e) /= zz.row(e).sum();
    Eigen::VectorXd uu(4);
    for (auto& x : uu) x = u(rng);
    CHECK(target_strains(uu, zz, lib).cwiseAbs().maxCoeff() <= 0.35);
  }
}

TEST_CASE("end-to-end strain gradient matches finite differences") {
  std::mt19937_64 rng(6);
  const MaterialLibrary lib = MaterialLibrary::standard();
  const MlpDims d{6, 5, 3};
  const ControllerParams p = random_params(d, rng);
  const Eigen::VectorXd in = Eigen::VectorXd::Random(6);
  StateRatios z(3, 3);
  z << 0.1, 0.3, 0.6, 0.2, 0.2, 0.6, 0.0, 0.1, 0.9;
  const Eigen::VectorXd w = Eigen::VectorXd::Random(3);

  MlpActivations acts;
  forward(p, in, &acts);
  ControllerParams g = ControllerParams::zeros(d);
  backward(p, acts, target_strains(w, z, lib), g, nullptr);
  const Eigen::VectorXd ga = g.flatten();
  const Eigen::VectorXd flat = p.flatten();
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < flat.size(); i += 3) {
    Eigen::VectorXd fp = flat, fm = flat;
    fp(i) += h;
    fm(i) -= h;
    const double lp = w.dot(target_strains(forward(ControllerParams::unflatten(d, fp), in), z, lib));
    const double lm = w.dot(target_strains(forward(ControllerParams::unflatten(d, fm), in), z, lib));
    const double fd = (lp - lm) / (2 * h);
    CHECK(std::abs(fd - ga(i)) <= 1e-5 * std::max({std::abs(fd), std::abs(ga(i)), 1e-6}));
  }
}

TEST_CASE("controller serialization round trips") {
  std::mt19937_64 rng(7);
  const ControllerParams p = random_params({9, 4, 3}, rng);
  CHECK(controller_from_json(controller_to_json(p)).flatten() == p.flatten());
  const auto path = std::filesystem::temp_directory_path() / "latticebot_ctrl_test.bin";
  save_controller_binary(p, path);
  const ControllerParams q = load_controller_binary(path);
  CHECK(q.dims() == p.dims());
  CHECK(q.flatten() == p.flatten());
  std::filesystem::remove(path);
  CHECK_THROWS(load_controller_binary(path));
}
