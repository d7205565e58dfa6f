#pragma once

#include "latticebot/design.hpp"
#include "latticebot/mma.hpp"
#include "latticebot/optimizer.hpp"
#include "latticebot/sim.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace latticebot {

struct IterationRecord {
  int iter = 0;
  PassKind pass = PassKind::controller;
  bool skipped = false;  // the rollout diverged and the update was dropped
  double loss = 0.0;     // L_disp of the design and controller evaluated this iteration
  double V = 0.0;
  double V_act = 0.0;
  double g_bin = 0.0;
  std::array<double, 3> g_ortho{};
  Vec4 lambda{};
  Vec4 tau{};
  int T_grad = 0;
  double delta_V = 0.0;
  bool relaxed = false;  // MMA needed constraint slack

  Json to_json() const;
};

/// Everything needed to continue a run bit-exactly.
struct CodesignState {
  int next_iter = 0;
  DesignMatrix Z;
  ControllerParams theta;
  ALState al;
  MmaState mma;
  AdamState adam;
  DesignMatrix last_perf_step;  // Z change of the latest performance pass
  bool frozen = false;          // Z snapped and fixed
  int consecutive_failures = 0;

  Json to_json() const;
  static CodesignState from_json(const Json& doc);
};

/// Thrown after three consecutive diverged iterations.
class CodesignAborted : public SimulationError {
 public:
  CodesignAborted(const std::string& what, int iter) : SimulationError(what, iter) {}
};

struct CodesignOptions {
  ProjectionConfig projection;
  MmaConfig mma;
  double adam_lr = 3e-3;
  double tau0 = 0.3;
  double anneal = 1.01;
  double delta = 1e-6;  // smoothing in the orthogonality penalty
  bool optimize_design = true;
  bool optimize_controller = true;
  std::optional<MaterialLock> lock;
  int max_consecutive_failures = 3;

  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;

  /// Called once per iteration after its updates are applied.
  std::function<void(const IterationRecord&, const CodesignState&)> on_iteration;
};

struct CodesignResult {
  DesignMatrix Z;
  ControllerParams theta;
  std::vector<IterationRecord> history;
  CodesignState state;
};

/// Fresh optimizer state for a run starting at (Z0, theta0).
CodesignState initial_state(const DesignMatrix& Z0, const ControllerParams& theta0, const CodesignOptions& opts);

/// The projection used for physics in the current state.
Projection physics_projection(const CodesignState& state, const CodesignOptions& opts);

/// Multi-stage co-design: alternating design and controller passes, attraction,
/// snap, then controller fine-tuning. Pass `resume` to continue from a checkpoint.
CodesignResult run_codesign(const Robot& robot, const DesignMatrix& Z0, const ControllerParams& theta0,
                            const SimConfig& sim_cfg, const ScheduleConfig& sched, const CodesignOptions& opts,
                            const CodesignState* resume = nullptr);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int next_iter);

}  // namespace latticebot
