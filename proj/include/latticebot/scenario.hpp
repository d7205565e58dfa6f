#pragma once

#include "latticebot/codesign.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace latticebot {

enum class InitHeuristic { uniform, stability, three_legged, baseline_fixed };

std::string to_string(InitHeuristic h);
InitHeuristic heuristic_from_string(const std::string& s);

struct HeuristicParams {
  double stability_shift = 0.12;   // void shift at the top of the lattice
  double three_legged_bias = 0.4;  // void bias before renormalization
};

/// Which design entities are optimized.
struct AblationFlags {
  bool topology = true;
  bool material = true;
  bool control = true;

  bool operator==(const AblationFlags&) const = default;
};

/// Trials a..h enumerate (topology, material, control) with control toggling fastest.
AblationFlags trial_flags(char trial);

struct ScenarioConfig {
  std::string name = "scenario";
  int rows = 6;
  int cols = 6;
  double spacing = 0.1;
  InitHeuristic init = InitHeuristic::stability;
  HeuristicParams heuristic;
  AblationFlags flags;

  GroundModel ground;
  FrictionModel friction;
  Vec2 goal{2.0, 0.1};
  Vec2 head_offset{0.1, 0.0};

  int iterations = 300;
  int total_steps = 8192;
  double dt = 0.002;
  VolumeBounds bounds;

  double damping = 2.0;
  Vec2 gravity{0.0, -9.8};
  double payload_mass = 0.3;
  double m_eps = 1e-6;
  int checkpoint_stride = 1;
  double adjoint_clip = 0.0;

  int hidden = 32;
  int n_cpg = 10;
  double omega = 10.0;
  double adam_lr = 3e-3;

  double mma_move = 0.1;
  double tau0 = 0.3;
  double anneal = 1.01;
  double stability_blend = 0.5;
  int stability_cadence = 3;
  int grad_min = 2048;
  int grad_max = 4096;
  double delta_v_max = 0.03;

  bool write_frames = true;
  int frame_stride = 256;
  int checkpoint_every = 0;

  std::uint64_t seed = 0;

  void validate() const;
  Json to_json() const;
  /// Missing keys take the defaults above; unknown keys are rejected.
  static ScenarioConfig from_json(const Json& doc);
};

LatticeSpec scenario_lattice(const ScenarioConfig& cfg);
Robot scenario_robot(const ScenarioConfig& cfg);
SimConfig scenario_sim_config(const ScenarioConfig& cfg);
ScheduleConfig scenario_schedule(const ScenarioConfig& cfg);

DesignMatrix init_heuristic(InitHeuristic kind, const LatticeSpec& lattice, std::uint64_t seed,
                            const HeuristicParams& params = {});

/// Fully filled lattice: vertical edges actuators, everything else skeleton.
DesignMatrix default_filled_layout(const LatticeSpec& lattice);

/// Solid state each edge keeps when material design is disabled.
std::vector<int> default_material_preference(const LatticeSpec& lattice);

struct AblationPlan {
  DesignMatrix z0;
  ScheduleConfig schedule;
  bool optimize_design = true;
  bool optimize_controller = true;
  std::optional<MaterialLock> lock;
  bool hash_theta = false;     // theta must stay fixed
  bool hash_z = false;         // Z must stay fixed
  bool hash_material = false;  // the solid-state identity of every edge must stay fixed
};

/// Turns ablation flags into the initial design, schedule and optimizer switches.
AblationPlan apply_ablation(const AblationFlags& flags, InitHeuristic init, const DesignMatrix& z0,
                            const ScheduleConfig& sched, const LatticeSpec& lattice);

struct IterationHashes {
  std::string z;
  std::string theta;
  std::string material;
  bool z_one_hot = false;
};

struct RunArtifacts {
  Json metrics;
  std::vector<IterationRecord> history;
  std::vector<IterationHashes> hashes;
  IterationHashes initial_hashes;
  AblationPlan plan;
  DesignMatrix z;
  ControllerParams theta;
  double final_loss = 0.0;
  double initial_head_x = 0.0;
  double final_head_x = 0.0;
  double wallclock_s = 0.0;

  std::filesystem::path out_dir;  // empty when nothing was written
  std::filesystem::path metrics_path;
  std::filesystem::path history_path;
  std::filesystem::path trajectory_path;
  std::filesystem::path design_path;
  std::filesystem::path controller_path;
  std::vector<std::filesystem::path> frames;
  std::vector<std::filesystem::path> checkpoints;
};

/// Hash of the solid state (skeleton or actuator) each edge takes when solid,
/// read from z after the material lock, if any.
std::string material_map_hash(const DesignMatrix& z, const MaterialLock* lock);

/// Runs the configured study and, when out_dir is non-empty, writes
/// metrics.json, history.jsonl, trajectory.csv, design.json, controller.json,
/// frames/ and checkpoints/. `resume` continues from a checkpoint document.
RunArtifacts run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir = {},
                          const Json* resume = nullptr);

Json export_metrics(const ScenarioConfig& cfg, const RunArtifacts& run, const std::string& history_file);

}  // namespace latticebot
