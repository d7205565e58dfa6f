#pragma once

#include "latticebot/ground.hpp"
#include "latticebot/lattice.hpp"
#include "latticebot/sim.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace latticebot {

struct RenderStyle {
  double pixels_per_meter = 400.0;
  double margin_m = 0.1;
  double skeleton_width = 2.0;
  double actuator_width = 3.5;
};

/// One SVG frame: skeleton grey, actuators red when extended and blue when
/// contracted (sign of l/l0 - 1), void omitted, ground line and the head-node
/// path up to `step` overlaid.
std::string render_svg(const std::vector<SimState>& traj, std::size_t step, const DesignMatrix& z,
                       const LatticeSpec& lattice, const GroundModel& ground, const RenderStyle& style = {});

/// Writes frame_<step>.svg for steps 0, stride, 2 stride, ... and the last step.
std::vector<std::filesystem::path> render_frames(const std::vector<SimState>& traj, const DesignMatrix& z,
                                                 const LatticeSpec& lattice, const GroundModel& ground,
                                                 const std::filesystem::path& out_dir, int stride,
                                                 const RenderStyle& style = {});

/// Parses the CSV written by write_trajectory_csv. Sets *dt from the time column when given.
std::vector<SimState> read_trajectory_csv(std::istream& in, double* dt = nullptr);

}  // namespace latticebot
