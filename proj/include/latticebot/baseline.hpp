#pragma once

#include "latticebot/lattice.hpp"

#include <filesystem>
#include <string>

namespace latticebot {

struct BaselineLayout {
  DesignMatrix z;  // one-hot rows
  std::string description;
};

/// Directory holding the shipped layout files; overridable with LATTICEBOT_DATA_DIR.
std::filesystem::path data_dir();

/// Three-legged sequential-design baseline with vertical actuators, loaded
/// from data/baseline_<rows>x<cols>.json. Layouts ship for 6x6 and 5x5 grids;
/// other grids throw std::invalid_argument.
BaselineLayout build_baseline(const LatticeSpec& lattice);

BaselineLayout load_baseline(const LatticeSpec& lattice, const std::filesystem::path& file);

}  // namespace latticebot
