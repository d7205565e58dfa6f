#include "latticebot/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace latticebot {

double GradCheckReport::max_rel_error(const std::string& kind) const {
  double m = 0.0;
  for (const auto& e : entries) {
    if (kind.empty() || e.kind == kind) m = std::max(m, e.rel_error);
  }
  return m;
}

double relative_error(double a, double f, double floor) {
  return std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor});
}

namespace {

struct Eval {
  double loss;
  std::uint64_t signature;
};

std::vector<Eigen::Index> shuffled(Eigen::Index n, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace

GradCheckReport gradient_check(const Robot& robot, const DesignMatrix& z, const Projection& projection,
                               const ControllerParams& theta, const SimConfig& cfg, const GradCheckConfig& gc) {
  const DesignGradient dg = rollout_grad(robot, z, projection, theta, cfg);
  GradCheckReport rep;
  rep.loss = dg.loss;
  rep.contact_events = dg.record.contact_events;
  const std::uint64_t base_sig = dg.record.contact_signature;
  std::mt19937_64 rng(gc.seed);

  auto eval_theta = [&](const Eigen::VectorXd& flat) {
    const RolloutRecord r = rollout(robot, projection.forward(z), ControllerParams::unflatten(theta.dims(), flat), cfg);
    return Eval{r.loss, r.contact_signature};
  };
  auto eval_z = [&](const Eigen::VectorXd& flat) {
    DesignMatrix zz(z.rows(), 3);
    Eigen::Map<Eigen::VectorXd>(zz.data(), zz.size()) = flat;
    const RolloutRecord r = rollout(robot, projection.forward(zz), theta, cfg);
    return Eval{r.loss, r.contact_signature};
  };

  auto run = [&](const std::string& kind, const Eigen::VectorXd& x0, const Eigen::VectorXd& adj, int wanted, double h,
                 auto&& eval) {
    const std::vector<Eigen::Index> order = shuffled(x0.size(), rng);
    int accepted = 0;
    const int max_attempts = wanted * gc.max_attempts_factor;
    for (int a = 0; a < static_cast<int>(order.size()) && a < max_attempts && accepted < wanted; ++a) {
      const Eigen::Index i = order[static_cast<size_t>(a)];
      Eigen::VectorXd x = x0;
      x(i) = x0(i) + h;
      const Eval p = eval(x);
      x(i) = x0(i) - h;
      const Eval m = eval(x);
      if (gc.skip_grazing && (p.signature != base_sig || m.signature != base_sig)) {
        ++rep.rejected_grazing;
        continue;
      }
      const double fd = (p.loss - m.loss) / (2.0 * h);
      rep.entries.push_back({kind, i, adj(i), fd, relative_error(adj(i), fd, gc.abs_floor)});
      ++accepted;
    }
  };

  run("theta", theta.flatten(), dg.d_theta.flatten(), gc.theta_coords, gc.h_theta, eval_theta);
  const Eigen::VectorXd zflat = Eigen::Map<const Eigen::VectorXd>(z.data(), z.size());
  const Eigen::VectorXd zadj = Eigen::Map<const Eigen::VectorXd>(dg.d_design.data(), dg.d_design.size());
  run("z", zflat, zadj, gc.z_coords, gc.h_z, eval_z);
  return rep;
}

}  // namespace latticebot
