#pragma once

#include "latticebot/common.hpp"
#include "latticebot/materials.hpp"

#include <array>
#include <vector>

namespace latticebot {

struct ProjectionConfig {
  double beta = 20.0;        // performance pass
  double beta_stab = 500.0;  // stability pass forward
  double beta_ste = 20.0;    // stability pass backward
};

/// Row-wise softmax(beta * z). Throws std::invalid_argument on non-finite
/// input or beta <= 0.
StateRatios project_performance(const DesignMatrix& z, double beta);

/// Vector-Jacobian product of project_performance at z.
DesignMatrix project_performance_vjp(const DesignMatrix& z, double beta, const StateRatios& grad);

struct StabilityProjection {
  StateRatios zstar;     // softmax(beta_stab * (z - column_mean(z)))
  double backward_beta;  // sharpness whose Jacobian stands in during backprop
};

/// Globally centered sharp projection. Gradients are taken straight-through:
/// the backward pass differentiates the same centered softmax at beta_ste.
StabilityProjection project_stability(const DesignMatrix& z, double beta_stab, double beta_ste);

/// Jacobian-transpose product of the centered softmax at `beta`, including
/// the coupling through the column means.
DesignMatrix centered_softmax_vjp(const DesignMatrix& z, double beta, const StateRatios& grad);

/// Per-edge preferred solid state used to hold the material layout fixed while
/// topology evolves: the non-preferred solid entry is lowered below the
/// preferred one by `offset` before every projection.
struct MaterialLock {
  std::vector<int> preferred;  // kSkeleton or kActuator per edge
  double offset = 0.05;

  DesignMatrix apply(const DesignMatrix& z) const;
  DesignMatrix apply_vjp(const DesignMatrix& z, const DesignMatrix& grad) const;
};

/// Maps raw design variables to the state ratios seen by the simulator and
/// back-propagates sensitivities through that map.
class Projection {
 public:
  enum class Kind { performance, stability, identity };

  static Projection performance(double beta);
  static Projection stability(double beta_stab, double beta_ste);
  /// Uses z directly; meant for frozen one-hot designs.
  static Projection identity();

  Projection with_material_lock(MaterialLock lock) const;

  Kind kind() const { return kind_; }
  StateRatios forward(const DesignMatrix& z) const;
  DesignMatrix backward(const DesignMatrix& z, const StateRatios& grad) const;

 private:
  Kind kind_ = Kind::performance;
  double beta_ = 20.0;
  double beta_backward_ = 20.0;
  bool locked_ = false;
  MaterialLock lock_;
};

/// p_e = psi^T z~_e for every edge: (stiffness, density, max strain).
EdgeMatrix interpolate_properties(const StateRatios& ztilde, const MaterialLibrary& lib);

struct VolumeFractions {
  double solid = 0.0;     // V
  double actuator = 0.0;  // V_act
};

VolumeFractions volume_fractions(const StateRatios& ztilde);

struct BinarizationPenalties {
  double g_bin = 0.0;
  std::array<double, 3> g_ortho{};  // pairs (void,skeleton), (void,actuator), (skeleton,actuator)

  /// (g_bin, g_ortho...) as the four binarization constraint values.
  std::array<double, 4> as_vector() const { return {g_bin, g_ortho[0], g_ortho[1], g_ortho[2]}; }
};

BinarizationPenalties binarization_penalties(const StateRatios& ztilde, double delta);

/// Gradient of sum_k weights[k] * g_k with respect to z~, in the order of
/// BinarizationPenalties::as_vector().
StateRatios binarization_gradient(const StateRatios& ztilde, double delta, const std::array<double, 4>& weights);

/// Pulls confident rows toward their dominant state: the dominant raw entry
/// gains gamma, the other two lose gamma/2, then everything is clamped to [0,1].
DesignMatrix attraction_nudge(const DesignMatrix& z, const StateRatios& ztilde, double tau_conf, double gamma);

/// One-hot of the row argmax; ties go to the lowest state index.
DesignMatrix hard_snap(const DesignMatrix& z);

bool is_one_hot(const DesignMatrix& z);

Json design_to_json(const DesignMatrix& z);
DesignMatrix design_from_json(const Json& doc);

}  // namespace latticebot
