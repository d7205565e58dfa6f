#include "latticebot/lattice.hpp"

#include <cmath>
#include <string>

namespace latticebot {

SimulationDiverged::SimulationDiverged(int step, double max_speed)
    : SimulationError("simulation diverged at step " + std::to_string(step) +
                          " (max |v| = " + std::to_string(max_speed) + ")",
                      step),
      max_speed_(max_speed) {}

DegenerateGeometry::DegenerateGeometry(int step, int edge, double length)
    : SimulationError("degenerate geometry at step " + std::to_string(step) + ": edge " +
                          std::to_string(edge) + " has length " + std::to_string(length),
                      step),
      edge_(edge) {}

MaterialLibrary::MaterialLibrary(const Eigen::Matrix3d& psi) : psi_(psi) {
  for (int s = 0; s < kNumStates; ++s) {
    if (!(psi_(s, kStiffness) > 0.0)) throw std::invalid_argument("material stiffness must be > 0");
    if (!(psi_(s, kDensity) > 0.0)) throw std::invalid_argument("material density must be > 0");
    const double a = psi_(s, kMaxStrain);
    if (!(a >= 0.0 && a < 1.0)) throw std::invalid_argument("max actuation strain must lie in [0,1)");
  }
  if (psi_(kVoid, kMaxStrain) != 0.0 || psi_(kSkeleton, kMaxStrain) != 0.0) {
    throw std::invalid_argument("only the actuator state may carry actuation strain");
  }
}

MaterialLibrary MaterialLibrary::standard() {
  constexpr double kGramPerMeter = 1e-3;
  Eigen::Matrix3d psi;
  psi << 1e-7, 1e-5 * kGramPerMeter, 0.0,  //
      4e2, 30.0 * kGramPerMeter, 0.0,      //
      3e1, 100.0 * kGramPerMeter, 0.35;
  return MaterialLibrary(psi);
}

int LatticeSpec::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  for (int e = 0; e < num_edges(); ++e) {
    if (edges[e].first == a && edges[e].second == b) return e;
  }
  return -1;
}

LatticeSpec build_grid(int rows, int cols, double spacing, Vec2 origin) {
  if (rows < 2 || cols < 2) throw std::invalid_argument("lattice needs at least 2 rows and 2 cols");
  if (!(spacing > 0.0)) throw std::invalid_argument("lattice spacing must be positive");

  LatticeSpec lat;
  lat.rows = rows;
  lat.cols = cols;
  lat.spacing = spacing;
  lat.origin = origin;
  lat.nodes.reserve(static_cast<size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) lat.nodes.push_back(origin + Vec2(c * spacing, r * spacing));
  }

  auto add = [&](int a, int b, EdgeOrientation o) {
    lat.edges.emplace_back(std::min(a, b), std::max(a, b));
    lat.orientation.push_back(o);
  };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) add(lat.node_index(r, c), lat.node_index(r, c + 1), EdgeOrientation::horizontal);
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c < cols; ++c) add(lat.node_index(r, c), lat.node_index(r + 1, c), EdgeOrientation::vertical);
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c)
      add(lat.node_index(r, c), lat.node_index(r + 1, c + 1), EdgeOrientation::diagonal);
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c)
      add(lat.node_index(r, c + 1), lat.node_index(r + 1, c), EdgeOrientation::antidiagonal);

  lat.rest_lengths.reserve(lat.edges.size());
  for (const auto& [i, j] : lat.edges) lat.rest_lengths.push_back((lat.nodes[j] - lat.nodes[i]).norm());
  lat.head_index = 0;
  return lat;
}

std::vector<double> node_masses(const LatticeSpec& lattice, const StateRatios& ztilde,
                                const MaterialLibrary& lib, const MassParams& mp) {
  if (ztilde.rows() != lattice.num_edges()) throw std::invalid_argument("state ratio rows must match edge count");
  if (!(mp.m_eps > 0.0) || mp.payload_mass < 0.0) throw std::invalid_argument("invalid mass parameters");
  const Eigen::Vector3d rho = lib.psi().col(MaterialLibrary::kDensity);
  std::vector<double> m(static_cast<size_t>(lattice.num_nodes()), mp.m_eps);
  for (int e = 0; e < lattice.num_edges(); ++e) {
    const double half = 0.5 * lattice.rest_lengths[e] * ztilde.row(e).dot(rho.transpose());
    m[lattice.edges[e].first] += half;
    m[lattice.edges[e].second] += half;
  }
  m[lattice.head_index] += mp.payload_mass;
  return m;
}

namespace {

const char* orientation_name(EdgeOrientation o) {
  switch (o) {
    case EdgeOrientation::horizontal: return "horizontal";
    case EdgeOrientation::vertical: return "vertical";
    case EdgeOrientation::diagonal: return "diagonal";
    case EdgeOrientation::antidiagonal: return "antidiagonal";
  }
  return "?";
}

}  // namespace

Json lattice_to_json(const LatticeSpec& lattice) {
  Json doc;
  doc["rows"] = lattice.rows;
  doc["cols"] = lattice.cols;
  doc["spacing"] = lattice.spacing;
  doc["origin"] = {lattice.origin.x(), lattice.origin.y()};
  doc["head_index"] = lattice.head_index;
  auto nodes = Json::array();
  for (const auto& p : lattice.nodes) nodes.push_back({p.x(), p.y()});
  doc["nodes"] = nodes;
  auto edges = Json::array();
  for (int e = 0; e < lattice.num_edges(); ++e) {
    edges.push_back({{"i", lattice.edges[e].first},
                     {"j", lattice.edges[e].second},
                     {"orientation", orientation_name(lattice.orientation[e])},
                     {"rest_length", lattice.rest_lengths[e]}});
  }
  doc["edges"] = edges;
  return doc;
}

LatticeSpec lattice_from_json(const Json& doc) {
  const auto& o = doc.at("origin");
  LatticeSpec lat = build_grid(doc.at("rows").get<int>(), doc.at("cols").get<int>(),
                               doc.at("spacing").get<double>(), Vec2(o.at(0).get<double>(), o.at(1).get<double>()));
  if (doc.contains("edges") && doc.at("edges").size() != lat.edges.size()) {
    throw std::invalid_argument("lattice document edge count does not match its grid");
  }
  return lat;
}

}  // namespace latticebot
