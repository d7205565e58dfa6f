#pragma once

#include "latticebot/common.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace latticebot {

struct FDConfig {
  double h = 1e-5;
  std::optional<std::vector<Eigen::Index>> coordinates;  // empty means all

  void validate() const;
};

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h on the sampled
/// coordinates; other entries are zero. Non-finite values are passed through.
Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                                 const FDConfig& cfg);

/// Two point masses joined by a linear spring, free of gravity and ground.
struct TwoNodeSpring {
  double k = 30.0;
  double rest_length = 0.1;
  double m1 = 0.3;
  double m2 = 0.3;
  double damping = 0.0;
  Vec2 x1{0.0, 0.0};
  Vec2 x2{0.12, 0.0};
  Vec2 v1 = Vec2::Zero();
  Vec2 v2 = Vec2::Zero();

  double angular_frequency() const;
  double energy(const Vec2& a, const Vec2& b, const Vec2& va, const Vec2& vb) const;
};

struct SpringSample {
  double t = 0.0;
  Vec2 x1, x2, v1, v2;
};

/// Damped symplectic Euler for the spring at step dt_fine, sampled every `every` steps.
std::vector<SpringSample> reference_integrate(const TwoNodeSpring& sys, double dt_fine, long steps, long every = 1);

/// Time between successive upward zero crossings of (length - rest length),
/// averaged over the samples; NaN when fewer than two crossings occur.
double measured_period(const TwoNodeSpring& sys, const std::vector<SpringSample>& samples);

}  // namespace latticebot
