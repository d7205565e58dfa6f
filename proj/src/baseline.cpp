#include "latticebot/baseline.hpp"

#include "latticebot/io.hpp"

#include <cstdlib>

namespace latticebot {

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("LATTICEBOT_DATA_DIR"); env && *env) return env;
  return LATTICEBOT_DATA_DIR;
}

namespace {
int state_index(const std::string& s) {
  if (s == "void") return kVoid;
  if (s == "skeleton") return kSkeleton;
  if (s == "actuator") return kActuator;
  throw std::invalid_argument("unknown material state '" + s + "'");
}
}  // namespace

BaselineLayout load_baseline(const LatticeSpec& lattice, const std::filesystem::path& file) {
  const Json doc = read_json_file(file);
  try {
    if (doc.at("rows").get<int>() != lattice.rows || doc.at("cols").get<int>() != lattice.cols) {
      throw std::invalid_argument("baseline file " + file.string() + " is for a different grid");
    }
    BaselineLayout out;
    out.description = doc.value("description", "");
    out.z = DesignMatrix::Zero(lattice.num_edges(), 3);
    out.z.col(kVoid).setOnes();
    for (const Json& e : doc.at("edges")) {
      const int idx = lattice.find_edge(e.at("i").get<int>(), e.at("j").get<int>());
      if (idx < 0) throw std::invalid_argument("baseline edge is not part of the lattice");
      out.z.row(idx).setZero();
      out.z(idx, state_index(e.at("state").get<std::string>())) = 1.0;
    }
    return out;
  } catch (const Json::exception& e) {
    throw std::invalid_argument("malformed baseline file " + file.string() + ": " + e.what());
  }
}

BaselineLayout build_baseline(const LatticeSpec& lattice) {
  const bool shipped = (lattice.rows == 6 && lattice.cols == 6) || (lattice.rows == 5 && lattice.cols == 5);
  if (!shipped) {
    throw std::invalid_argument("no baseline layout for a " + std::to_string(lattice.rows) + "x" +
                                std::to_string(lattice.cols) + " grid (available: 6x6, 5x5)");
  }
  const std::string name = "baseline_" + std::to_string(lattice.rows) + "x" + std::to_string(lattice.cols) + ".json";
  return load_baseline(lattice, data_dir() / name);
}

}  // namespace latticebot
