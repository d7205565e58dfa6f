#include "latticebot/design.hpp"

#include <algorithm>
#include <cmath>

namespace latticebot {

namespace {

void require_finite(const DesignMatrix& z) {
  if (!z.allFinite()) throw std::invalid_argument("design matrix contains non-finite entries");
}

int argmax_lowest(const Eigen::Ref<const Eigen::RowVector3d>& row) {
  int best = 0;
  for (int k = 1; k < kNumStates; ++k)
    if (row(k) > row(best)) best = k;
  return best;
}

StateRatios softmax_rows(const EdgeMatrix& logits) {
  StateRatios out(logits.rows(), 3);
  for (Eigen::Index e = 0; e < logits.rows(); ++e) {
    const double mx = logits.row(e).maxCoeff();
    Eigen::RowVector3d ex = (logits.row(e).array() - mx).exp();
    out.row(e) = ex / ex.sum();
  }
  return out;
}

// p (.) (g - <p, g>) row by row: softmax Jacobian-transpose product w.r.t. logits.
EdgeMatrix softmax_logit_vjp(const StateRatios& p, const StateRatios& grad) {
  EdgeMatrix out(p.rows(), 3);
  for (Eigen::Index e = 0; e < p.rows(); ++e) {
    const double dot = p.row(e).dot(grad.row(e));
    out.row(e) = p.row(e).array() * (grad.row(e).array() - dot);
  }
  return out;
}

EdgeMatrix centered(const DesignMatrix& z) {
  const Eigen::RowVector3d mean = z.colwise().mean();
  return z.rowwise() - mean;
}

}  // namespace

StateRatios project_performance(const DesignMatrix& z, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("projection sharpness must be positive");
  require_finite(z);
  return softmax_rows(beta * z);
}

DesignMatrix project_performance_vjp(const DesignMatrix& z, double beta, const StateRatios& grad) {
  const StateRatios p = project_performance(z, beta);
  return beta * softmax_logit_vjp(p, grad);
}

StabilityProjection project_stability(const DesignMatrix& z, double beta_stab, double beta_ste) {
  if (!(beta_stab > 0.0) || !(beta_ste > 0.0)) throw std::invalid_argument("projection sharpness must be positive");
  require_finite(z);
  return {softmax_rows(beta_stab * centered(z)), beta_ste};
}

DesignMatrix centered_softmax_vjp(const DesignMatrix& z, double beta, const StateRatios& grad) {
  require_finite(z);
  const StateRatios p = softmax_rows(beta * centered(z));
  const EdgeMatrix dy = softmax_logit_vjp(p, grad);
  const Eigen::RowVector3d mean = dy.colwise().mean();
  return beta * (dy.rowwise() - mean);
}

DesignMatrix MaterialLock::apply(const DesignMatrix& z) const {
  if (static_cast<Eigen::Index>(preferred.size()) != z.rows()) throw std::invalid_argument("material lock size mismatch");
  DesignMatrix out = z;
  for (Eigen::Index e = 0; e < z.rows(); ++e) {
    const int p = preferred[e];
    const int q = p == kSkeleton ? kActuator : kSkeleton;
    out(e, q) = std::min(z(e, q), z(e, p)) - offset;
  }
  return out;
}

DesignMatrix MaterialLock::apply_vjp(const DesignMatrix& z, const DesignMatrix& grad) const {
  DesignMatrix out = grad;
  for (Eigen::Index e = 0; e < z.rows(); ++e) {
    const int p = preferred[e];
    const int q = p == kSkeleton ? kActuator : kSkeleton;
    if (z(e, q) > z(e, p)) {
      out(e, p) += grad(e, q);
      out(e, q) = 0.0;
    }
  }
  return out;
}

Projection Projection::performance(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("projection sharpness must be positive");
  Projection p;
  p.kind_ = Kind::performance;
  p.beta_ = beta;
  p.beta_backward_ = beta;
  return p;
}

Projection Projection::stability(double beta_stab, double beta_ste) {
  if (!(beta_stab > 0.0) || !(beta_ste > 0.0)) throw std::invalid_argument("projection sharpness must be positive");
  Projection p;
  p.kind_ = Kind::stability;
  p.beta_ = beta_stab;
  p.beta_backward_ = beta_ste;
  return p;
}

Projection Projection::identity() {
  Projection p;
  p.kind_ = Kind::identity;
  return p;
}

Projection Projection::with_material_lock(MaterialLock lock) const {
  Projection p = *this;
  p.locked_ = true;
  p.lock_ = std::move(lock);
  return p;
}

StateRatios Projection::forward(const DesignMatrix& z) const {
  const DesignMatrix input = locked_ ? lock_.apply(z) : z;
  switch (kind_) {
    case Kind::performance: return project_performance(input, beta_);
    case Kind::stability: return project_stability(input, beta_, beta_backward_).zstar;
    case Kind::identity: return input;
  }
  return input;
}

DesignMatrix Projection::backward(const DesignMatrix& z, const StateRatios& grad) const {
  const DesignMatrix input = locked_ ? lock_.apply(z) : z;
  DesignMatrix g;
  switch (kind_) {
    case Kind::performance: g = project_performance_vjp(input, beta_, grad); break;
    case Kind::stability: g = centered_softmax_vjp(input, beta_backward_, grad); break;
    case Kind::identity: g = grad; break;
  }
  return locked_ ? lock_.apply_vjp(z, g) : g;
}

EdgeMatrix interpolate_properties(const StateRatios& ztilde, const MaterialLibrary& lib) {
  return ztilde * lib.psi();
}

VolumeFractions volume_fractions(const StateRatios& ztilde) {
  const double n = static_cast<double>(ztilde.rows());
  if (n == 0) return {};
  return {(ztilde.col(kSkeleton).sum() + ztilde.col(kActuator).sum()) / n, ztilde.col(kActuator).sum() / n};
}

namespace {

constexpr std::array<std::pair<int, int>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};

}  // namespace

BinarizationPenalties binarization_penalties(const StateRatios& ztilde, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("binarization smoothing constant must be positive");
  BinarizationPenalties out;
  const double n = static_cast<double>(ztilde.rows());
  if (n == 0) return out;
  for (Eigen::Index e = 0; e < ztilde.rows(); ++e) {
    out.g_bin += 1.0 - ztilde.row(e).norm();
    for (size_t p = 0; p < kPairs.size(); ++p) {
      const double a = ztilde(e, kPairs[p].first);
      const double b = ztilde(e, kPairs[p].second);
      out.g_ortho[p] += a * b / (0.5 * (a + b) + delta);
    }
  }
  out.g_bin /= n;
  for (double& g : out.g_ortho) g /= n;
  return out;
}

StateRatios binarization_gradient(const StateRatios& ztilde, double delta, const std::array<double, 4>& weights) {
  const double n = static_cast<double>(ztilde.rows());
  StateRatios grad = StateRatios::Zero(ztilde.rows(), 3);
  for (Eigen::Index e = 0; e < ztilde.rows(); ++e) {
    const double norm = ztilde.row(e).norm();
    if (norm > 0.0) grad.row(e) -= (weights[0] / n) * ztilde.row(e) / norm;
    for (size_t p = 0; p < kPairs.size(); ++p) {
      const int k = kPairs[p].first;
      const int l = kPairs[p].second;
      const double a = ztilde(e, k);
      const double b = ztilde(e, l);
      const double d = 0.5 * (a + b) + delta;
      const double w = weights[p + 1] / n;
      grad(e, k) += w * (b * d - 0.5 * a * b) / (d * d);
      grad(e, l) += w * (a * d - 0.5 * a * b) / (d * d);
    }
  }
  return grad;
}

DesignMatrix attraction_nudge(const DesignMatrix& z, const StateRatios& ztilde, double tau_conf, double gamma) {
  if (z.rows() != ztilde.rows()) throw std::invalid_argument("attraction_nudge: row count mismatch");
  DesignMatrix out = z;
  for (Eigen::Index e = 0; e < z.rows(); ++e) {
    if (ztilde.row(e).maxCoeff() <= tau_conf) continue;
    const int c = argmax_lowest(ztilde.row(e));
    for (int k = 0; k < kNumStates; ++k) out(e, k) += k == c ? gamma : -0.5 * gamma;
  }
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

DesignMatrix hard_snap(const DesignMatrix& z) {
  DesignMatrix out = DesignMatrix::Zero(z.rows(), 3);
  for (Eigen::Index e = 0; e < z.rows(); ++e) out(e, argmax_lowest(z.row(e))) = 1.0;
  return out;
}

bool is_one_hot(const DesignMatrix& z) {
  for (Eigen::Index e = 0; e < z.rows(); ++e) {
    int ones = 0;
    for (int k = 0; k < kNumStates; ++k) {
      if (z(e, k) == 1.0) ++ones;
      else if (z(e, k) != 0.0) return false;
    }
    if (ones != 1) return false;
  }
  return true;
}

Json design_to_json(const DesignMatrix& z) {
  Json doc;
  doc["states"] = {"void", "skeleton", "actuator"};
  auto rows = Json::array();
  for (Eigen::Index e = 0; e < z.rows(); ++e) rows.push_back({z(e, 0), z(e, 1), z(e, 2)});
  doc["z"] = rows;
  return doc;
}

DesignMatrix design_from_json(const Json& doc) {
  const auto& rows = doc.at("z");
  DesignMatrix z(static_cast<Eigen::Index>(rows.size()), 3);
  for (size_t e = 0; e < rows.size(); ++e) {
    if (rows[e].size() != 3) throw std::invalid_argument("design rows must have three entries");
    for (int k = 0; k < 3; ++k) z(static_cast<Eigen::Index>(e), k) = rows[e][k].get<double>();
  }
  return z;
}

}  // namespace latticebot
