#include "latticebot/verify.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace latticebot {

void FDConfig::validate() const {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
}

Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                                 const FDConfig& cfg) {
  cfg.validate();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x0.size());
  std::vector<Eigen::Index> idx;
  if (cfg.coordinates) {
    idx = *cfg.coordinates;
  } else {
    for (Eigen::Index i = 0; i < x0.size(); ++i) idx.push_back(i);
  }
  Eigen::VectorXd x = x0;
  for (Eigen::Index i : idx) {
    if (i < 0 || i >= x0.size()) throw std::invalid_argument("finite-difference coordinate out of range");
    x(i) = x0(i) + cfg.h;
    const double fp = f(x);
    x(i) = x0(i) - cfg.h;
    const double fm = f(x);
    x(i) = x0(i);
    g(i) = (fp - fm) / (2.0 * cfg.h);
  }
  return g;
}

double TwoNodeSpring::angular_frequency() const { return std::sqrt(k * (1.0 / m1 + 1.0 / m2)); }

double TwoNodeSpring::energy(const Vec2& a, const Vec2& b, const Vec2& va, const Vec2& vb) const {
  const double stretch = (b - a).norm() - rest_length;
  return 0.5 * m1 * va.squaredNorm() + 0.5 * m2 * vb.squaredNorm() + 0.5 * k * stretch * stretch;
}

std::vector<SpringSample> reference_integrate(const TwoNodeSpring& sys, double dt_fine, long steps, long every) {
  if (!(dt_fine > 0.0) || steps < 0 || every < 1) throw std::invalid_argument("invalid reference integration settings");
  Vec2 x1 = sys.x1, x2 = sys.x2, v1 = sys.v1, v2 = sys.v2;
  const double decay = std::exp(-sys.damping * dt_fine);
  std::vector<SpringSample> out;
  out.reserve(static_cast<size_t>(steps / every + 1));
  out.push_back({0.0, x1, x2, v1, v2});
  for (long n = 1; n <= steps; ++n) {
    const Vec2 d = x2 - x1;
    const double l = d.norm();
    const Vec2 j = sys.k * (l - sys.rest_length) * dt_fine * d / l;
    v1 = decay * v1 + j / sys.m1;
    v2 = decay * v2 - j / sys.m2;
    x1 += v1 * dt_fine;
    x2 += v2 * dt_fine;
    if (n % every == 0) out.push_back({n * dt_fine, x1, x2, v1, v2});
  }
  return out;
}

double measured_period(const TwoNodeSpring& sys, const std::vector<SpringSample>& samples) {
  std::vector<double> crossings;
  for (size_t i = 1; i < samples.size(); ++i) {
    const double a = (samples[i - 1].x2 - samples[i - 1].x1).norm() - sys.rest_length;
    const double b = (samples[i].x2 - samples[i].x1).norm() - sys.rest_length;
    if (a < 0.0 && b >= 0.0) {
      const double s = a / (a - b);
      crossings.push_back(samples[i - 1].t + s * (samples[i].t - samples[i - 1].t));
    }
  }
  if (crossings.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

}  // namespace latticebot
