#pragma once

#include "latticebot/common.hpp"
#include "latticebot/controller.hpp"
#include "latticebot/design.hpp"
#include "latticebot/ground.hpp"
#include "latticebot/lattice.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace latticebot {

enum class FrictionKind { infinite, coulomb };

struct FrictionModel {
  FrictionKind kind = FrictionKind::infinite;
  double mu = 2.5;
};

struct SimConfig {
  double dt = 0.002;
  int total_steps = 8192;
  int grad_steps = 2048;  // reverse sweep covers only the last min(grad_steps, total_steps) steps
  double damping = 2.0;   // 1/s
  Vec2 gravity{0.0, -9.8};
  GroundModel ground;
  FrictionModel friction;
  bool ground_contact = true;
  double min_length = 1e-6;
  /// Edges no stiffer than this (N/m, void-dominated mixtures) exert no force
  /// once shorter than min_length instead of raising DegenerateGeometry.
  double slack_stiffness = 1e-2;
  /// 1 keeps every state on the tape; k > 1 keeps every k-th state and
  /// recomputes the segments during the reverse sweep.
  int checkpoint_stride = 1;
  /// When positive, the reverse sweep rescales the adjoint state (position
  /// and velocity cotangents together) whenever its norm exceeds this value.
  double adjoint_clip = 0.0;

  void validate() const;
};

struct SimState {
  std::vector<Vec2> x;
  std::vector<Vec2> v;
  double t = 0.0;
};

/// Everything a robot is besides its design variables and controller weights.
struct Robot {
  LatticeSpec lattice;
  MaterialLibrary lib = MaterialLibrary::standard();
  MassParams mass;
  CPGConfig cpg;
  GoalSpec goal;

  MlpDims controller_dims(int hidden = 32) const {
    return {controller_input_dim(cpg.n_cpg, lattice.num_nodes()), hidden, lattice.num_edges()};
  }
};

/// Per-edge and per-node constants derived from the state ratios.
struct PhysicalDesign {
  Eigen::VectorXd stiffness;  // N/m
  Eigen::VectorXd actuation;  // z~_act * a_max
  std::vector<double> mass;   // kg
};

PhysicalDesign make_physical_design(const Robot& robot, const StateRatios& ztilde);

/// Nodes at their rest positions with zero velocity.
SimState rest_state(const LatticeSpec& lattice);

struct EdgeForces {
  Eigen::VectorXd force;      // F_e = k_e (l_e - l0_e (1 + eps_e)), positive in tension
  std::vector<Vec2> impulse;  // net impulse per node over one step
};

/// Hooke forces of every truss converted to nodal impulses F dt u_ij on i and
/// the opposite on j. Throws DegenerateGeometry for lengths below min_length.
EdgeForces edge_forces(const LatticeSpec& lattice, const SimState& state, const Eigen::VectorXd& stiffness,
                       const Eigen::VectorXd& strain, double dt, double min_length = 1e-6, int step = 0);
EdgeForces edge_forces(const LatticeSpec& lattice, const SimState& state, const StateRatios& ztilde,
                       const MaterialLibrary& lib, const Eigen::VectorXd& strain, double dt, double min_length = 1e-6);

struct ContactResult {
  bool contact = false;
  double toi = 0.0;   // time of impact within the step
  Vec2 x_toi;         // position at the time of impact
  Vec2 v_post;        // velocity after the contact response
  Vec2 x_end;         // position at the end of the step
};

/// Moves one node through a step of length dt starting at x_prev with the
/// pre-contact velocity v_pre, splitting the step at the ground crossing.
ContactResult resolve_contact(const Vec2& x_prev, const Vec2& v_pre, const SimConfig& cfg);

/// Damped symplectic Euler with ground contact. Throws SimulationDiverged on
/// a non-finite result.
SimState integrate_step(const SimState& state, const std::vector<Vec2>& impulses, const std::vector<double>& masses,
                        const SimConfig& cfg, int step = 0);

struct RolloutRecord {
  std::vector<SimState> tape;  // state k * stride for k = 0, 1, ...
  int stride = 1;
  int steps = 0;
  SimState final_state;
  double loss = 0.0;
  std::uint64_t contact_signature = 0;  // hash of every contact branch taken
  long contact_events = 0;
  PhysicalDesign design;
  ControllerParams theta;
  SimState initial;
};

/// Runs cfg.total_steps steps; loss = -x_head(T).
RolloutRecord rollout(const Robot& robot, const StateRatios& ztilde, const ControllerParams& theta,
                      const SimConfig& cfg, const SimState* initial = nullptr);

struct RolloutGradient {
  double loss = 0.0;
  Eigen::VectorXd d_stiffness;
  Eigen::VectorXd d_actuation;
  std::vector<double> d_mass;
  ControllerParams d_theta;
};

/// Reverse sweep over the last `grad_steps` steps of the record; the state
/// entering that window is held constant.
RolloutGradient rollout_backward(const Robot& robot, const RolloutRecord& record, const SimConfig& cfg, int grad_steps);

/// Chains physical-parameter sensitivities to dL/dz~.
StateRatios state_ratio_gradient(const Robot& robot, const RolloutGradient& grad);

struct DesignGradient {
  double loss = 0.0;
  DesignMatrix d_design;
  ControllerParams d_theta;
  RolloutRecord record;
};

/// Projects z, rolls out, and back-propagates through the last cfg.grad_steps
/// steps and the projection.
DesignGradient rollout_grad(const Robot& robot, const DesignMatrix& z, const Projection& projection,
                            const ControllerParams& theta, const SimConfig& cfg);

/// -x of the head node in the final state.
double loss_displacement(const RolloutRecord& record, int head_index = 0);

/// Every state of the rollout, recomputing from the tape when it is strided.
std::vector<SimState> trajectory(const Robot& robot, const RolloutRecord& record, const SimConfig& cfg);

/// CSV with columns step,time,node_id,x,y,vx,vy; 17 significant digits.
void write_trajectory_csv(std::ostream& out, const std::vector<SimState>& states, double dt);

}  // namespace latticebot
