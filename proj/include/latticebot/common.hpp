#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace latticebot {

using Vec2 = Eigen::Vector2d;

/// JSON documents keep insertion order so exported files are stable.
using Json = nlohmann::ordered_json;

/// Rows are edges; columns are the material states (void, skeleton, actuator).
using EdgeMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Relaxed design variables z, one row per edge, entries in [0,1].
using DesignMatrix = EdgeMatrix;

/// Projected state ratios z~, one row per edge, rows summing to one.
using StateRatios = EdgeMatrix;

inline constexpr int kVoid = 0;
inline constexpr int kSkeleton = 1;
inline constexpr int kActuator = 2;
inline constexpr int kNumStates = 3;

/// Base class for failures raised while stepping the simulator.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, int step)
      : std::runtime_error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// A non-finite state was produced.
class SimulationDiverged : public SimulationError {
 public:
  SimulationDiverged(int step, double max_speed);
  double max_speed() const noexcept { return max_speed_; }

 private:
  double max_speed_;
};

/// Two connected nodes came closer than the minimum edge length.
class DegenerateGeometry : public SimulationError {
 public:
  DegenerateGeometry(int step, int edge, double length);
  int edge() const noexcept { return edge_; }

 private:
  int edge_;
};

}  // namespace latticebot
