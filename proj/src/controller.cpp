#include "latticebot/controller.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

namespace latticebot {

ControllerParams ControllerParams::zeros(const MlpDims& dims) {
  if (dims.input <= 0 || dims.hidden <= 0 || dims.output <= 0) throw std::invalid_argument("MLP dimensions must be positive");
  ControllerParams p;
  p.w1 = Eigen::MatrixXd::Zero(dims.input, dims.hidden);
  p.b1 = Eigen::VectorXd::Zero(dims.hidden);
  p.w2 = Eigen::MatrixXd::Zero(dims.hidden, dims.output);
  p.b2 = Eigen::VectorXd::Zero(dims.output);
  return p;
}

Eigen::VectorXd ControllerParams::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < w1.rows(); ++r)
    for (Eigen::Index c = 0; c < w1.cols(); ++c) flat(k++) = w1(r, c);
  flat.segment(k, b1.size()) = b1;
  k += b1.size();
  for (Eigen::Index r = 0; r < w2.rows(); ++r)
    for (Eigen::Index c = 0; c < w2.cols(); ++c) flat(k++) = w2(r, c);
  flat.segment(k, b2.size()) = b2;
  return flat;
}

ControllerParams ControllerParams::unflatten(const MlpDims& dims, const Eigen::VectorXd& flat) {
  ControllerParams p = zeros(dims);
  if (flat.size() != p.size()) throw std::invalid_argument("flat parameter vector has the wrong length");
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < p.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w1.cols(); ++c) p.w1(r, c) = flat(k++);
  p.b1 = flat.segment(k, p.b1.size());
  k += p.b1.size();
  for (Eigen::Index r = 0; r < p.w2.rows(); ++r)
    for (Eigen::Index c = 0; c < p.w2.cols(); ++c) p.w2(r, c) = flat(k++);
  p.b2 = flat.segment(k, p.b2.size());
  return p;
}

ControllerParams xavier_init(std::uint64_t seed, const MlpDims& dims) {
  ControllerParams p = ControllerParams::zeros(dims);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
  };
  fill(p.w1);
  fill(p.w2);
  return p;
}

Eigen::VectorXd cpg_signals(double t, const CPGConfig& cfg) {
  if (cfg.n_cpg < 1 || !(cfg.omega > 0.0)) throw std::invalid_argument("invalid CPG configuration");
  Eigen::VectorXd c(cfg.n_cpg);
  for (int j = 0; j < cfg.n_cpg; ++j) c(j) = std::sin(cfg.omega * t + 2.0 * std::numbers::pi * j / cfg.n_cpg);
  return c;
}

Eigen::VectorXd assemble_input(std::span<const Vec2> positions, std::span<const Vec2> velocities,
                               const GoalSpec& goal, const Eigen::VectorXd& cpg) {
  if (positions.size() != velocities.size() || positions.empty()) {
    throw std::invalid_argument("positions and velocities must be non-empty and equally sized");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(positions.size());
  Vec2 center = Vec2::Zero();
  for (const auto& p : positions) center += p;
  center /= static_cast<double>(n);

  Eigen::VectorXd input(cpg.size() + 2 + 4 * n);
  input.head(cpg.size()) = cpg;
  Eigen::Index k = cpg.size();
  input(k++) = goal.x_goal.x();
  input(k++) = goal.x_goal.y();
  for (const auto& p : positions) {
    input(k++) = p.x() - center.x();
    input(k++) = p.y() - center.y();
  }
  for (const auto& v : velocities) {
    input(k++) = v.x();
    input(k++) = v.y();
  }
  return input;
}

Eigen::VectorXd forward(const ControllerParams& theta, const Eigen::VectorXd& input, MlpActivations* keep) {
  if (input.size() != theta.w1.rows()) throw std::invalid_argument("controller input has the wrong dimension");
  Eigen::VectorXd hidden = (theta.w1.transpose() * input + theta.b1).array().tanh().matrix();
  Eigen::VectorXd out = (theta.w2.transpose() * hidden + theta.b2).array().tanh().matrix();
  if (keep) {
    keep->input = input;
    keep->hidden = hidden;
    keep->output = out;
  }
  return out;
}

void backward(const ControllerParams& theta, const MlpActivations& acts, const Eigen::VectorXd& grad_output,
              ControllerParams& grad_theta, Eigen::VectorXd* grad_input) {
  const Eigen::VectorXd ds2 = grad_output.array() * (1.0 - acts.output.array().square());
  grad_theta.w2.noalias() += acts.hidden * ds2.transpose();
  grad_theta.b2 += ds2;
  const Eigen::VectorXd dh = theta.w2 * ds2;
  const Eigen::VectorXd ds1 = dh.array() * (1.0 - acts.hidden.array().square());
  grad_theta.w1.noalias() += acts.input * ds1.transpose();
  grad_theta.b1 += ds1;
  if (grad_input) *grad_input = theta.w1 * ds1;
}

Eigen::VectorXd target_strains(const Eigen::VectorXd& u, const StateRatios& ztilde, const MaterialLibrary& lib) {
  if (u.size() != ztilde.rows()) throw std::invalid_argument("control signal length must match edge count");
  return (ztilde.col(kActuator).array() * lib.actuator_strain() * u.array()).matrix();
}

Json controller_to_json(const ControllerParams& theta) {
  const MlpDims d = theta.dims();
  Json doc;
  doc["dims"] = {d.input, d.hidden, d.output};
  const Eigen::VectorXd flat = theta.flatten();
  doc["params"] = std::vector<double>(flat.data(), flat.data() + flat.size());
  return doc;
}

ControllerParams controller_from_json(const Json& doc) {
  const auto& d = doc.at("dims");
  const MlpDims dims{d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
  const auto values = doc.at("params").get<std::vector<double>>();
  return ControllerParams::unflatten(dims, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
}

namespace {

constexpr std::array<char, 8> kMagic{'L', 'B', 'M', 'L', 'P', 'v', '1', '\0'};

static_assert(std::endian::native == std::endian::little, "binary checkpoints assume a little-endian host");

}  // namespace

void save_controller_binary(const ControllerParams& theta, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const MlpDims d = theta.dims();
  const std::array<std::int32_t, 3> header{d.input, d.hidden, d.output};
  const Eigen::VectorXd flat = theta.flatten();
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(header.data()), sizeof(header));
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ControllerParams load_controller_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 8> magic{};
  std::array<std::int32_t, 3> header{};
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(header.data()), sizeof(header));
  if (!in || magic != kMagic) throw std::runtime_error(path.string() + " is not a controller checkpoint");
  const MlpDims dims{header[0], header[1], header[2]};
  ControllerParams p = ControllerParams::zeros(dims);
  Eigen::VectorXd flat(p.size());
  in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated controller checkpoint " + path.string());
  return ControllerParams::unflatten(dims, flat);
}

}  // namespace latticebot
