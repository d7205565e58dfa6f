#pragma once

#include "latticebot/common.hpp"
#include "latticebot/materials.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>

namespace latticebot {

struct CPGConfig {
  int n_cpg = 10;
  double omega = 10.0;  // rad/s
};

struct GoalSpec {
  Vec2 x_goal{2.0, 0.1};
};

struct MlpDims {
  int input = 0;
  int hidden = 32;
  int output = 0;
  bool operator==(const MlpDims&) const = default;
};

/// Width of the controller input: CPG clocks, goal, centered positions, velocities.
constexpr int controller_input_dim(int n_cpg, int n_nodes) { return n_cpg + 2 + 4 * n_nodes; }

/// Single-hidden-layer tanh MLP: u = tanh(w2^T tanh(w1^T x + b1) + b2).
struct ControllerParams {
  Eigen::MatrixXd w1;  // input x hidden
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden x output
  Eigen::VectorXd b2;

  static ControllerParams zeros(const MlpDims& dims);

  MlpDims dims() const { return {static_cast<int>(w1.rows()), static_cast<int>(w1.cols()), static_cast<int>(w2.cols())}; }
  Eigen::Index size() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  /// Flat layout: w1 (row-major), b1, w2 (row-major), b2.
  Eigen::VectorXd flatten() const;
  static ControllerParams unflatten(const MlpDims& dims, const Eigen::VectorXd& flat);
};

/// Uniform Xavier weights on +-sqrt(6/(fan_in+fan_out)), zero biases.
ControllerParams xavier_init(std::uint64_t seed, const MlpDims& dims);

/// C_j(t) = sin(omega t + 2 pi j / n_cpg).
Eigen::VectorXd cpg_signals(double t, const CPGConfig& cfg);

/// [C; x_goal; x_1 - xbar .. x_N - xbar; v_1 .. v_N]. Throws on size mismatch.
Eigen::VectorXd assemble_input(std::span<const Vec2> positions, std::span<const Vec2> velocities,
                               const GoalSpec& goal, const Eigen::VectorXd& cpg);

/// Activations kept for the backward pass.
struct MlpActivations {
  Eigen::VectorXd input;
  Eigen::VectorXd hidden;
  Eigen::VectorXd output;
};

Eigen::VectorXd forward(const ControllerParams& theta, const Eigen::VectorXd& input, MlpActivations* keep = nullptr);

/// Accumulates dL/dtheta into grad_theta and, when requested, writes dL/dinput.
void backward(const ControllerParams& theta, const MlpActivations& acts, const Eigen::VectorXd& grad_output,
              ControllerParams& grad_theta, Eigen::VectorXd* grad_input);

/// eps_e = z~_e,actuator * a_max * u_e.
Eigen::VectorXd target_strains(const Eigen::VectorXd& u, const StateRatios& ztilde, const MaterialLibrary& lib);

Json controller_to_json(const ControllerParams& theta);
ControllerParams controller_from_json(const Json& doc);

/// Little-endian binary checkpoint: magic, dims header, flat doubles.
void save_controller_binary(const ControllerParams& theta, const std::filesystem::path& path);
ControllerParams load_controller_binary(const std::filesystem::path& path);

}  // namespace latticebot
