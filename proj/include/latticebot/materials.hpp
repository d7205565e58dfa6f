#pragma once

#include "latticebot/common.hpp"

#include <Eigen/Core>

namespace latticebot {

/// Property table for the three material states.
///
/// Row k holds state k (void, skeleton, actuator); the columns are axial
/// stiffness (N/m), linear density (kg/m) and maximum actuation strain.
class MaterialLibrary {
 public:
  static constexpr int kStiffness = 0;
  static constexpr int kDensity = 1;
  static constexpr int kMaxStrain = 2;

  /// Throws std::invalid_argument when an invariant is violated.
  explicit MaterialLibrary(const Eigen::Matrix3d& psi);

  /// Void / skeleton / actuator values used throughout the project.
  /// Densities are given in g/m and converted to kg/m here.
  static MaterialLibrary standard();

  const Eigen::Matrix3d& psi() const { return psi_; }
  double stiffness(int state) const { return psi_(state, kStiffness); }
  double density(int state) const { return psi_(state, kDensity); }
  double max_strain(int state) const { return psi_(state, kMaxStrain); }
  double actuator_strain() const { return psi_(kActuator, kMaxStrain); }

 private:
  Eigen::Matrix3d psi_;
};

}  // namespace latticebot
