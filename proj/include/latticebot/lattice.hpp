#pragma once

#include "latticebot/common.hpp"
#include "latticebot/materials.hpp"

#include <utility>
#include <vector>

namespace latticebot {

enum class EdgeOrientation { horizontal, vertical, diagonal, antidiagonal };

/// Truss grid: nodes on a rows x cols lattice, connected by the four sides of
/// every unit cell plus both cell diagonals.
struct LatticeSpec {
  int rows = 0;
  int cols = 0;
  double spacing = 0.0;
  Vec2 origin = Vec2::Zero();
  std::vector<Vec2> nodes;                 // row-major from origin
  std::vector<std::pair<int, int>> edges;  // (i, j) with i < j
  std::vector<EdgeOrientation> orientation;
  std::vector<double> rest_lengths;
  int head_index = 0;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int node_index(int row, int col) const { return row * cols + col; }
  int node_row(int i) const { return i / cols; }
  int node_col(int i) const { return i % cols; }

  /// Index of the edge joining a and b, or -1.
  int find_edge(int a, int b) const;
};

struct MassParams {
  double m_eps = 1e-6;        // kg, baseline mass of every node
  double payload_mass = 0.3;  // kg, added to the head node
};

/// Edge count of a rows x cols grid: sides of every cell plus two diagonals.
constexpr int grid_edge_count(int rows, int cols) {
  return (rows - 1) * cols + rows * (cols - 1) + 2 * (rows - 1) * (cols - 1);
}

/// Edges are ordered horizontals, verticals, main diagonals, anti-diagonals,
/// each block in row-major cell order. Throws std::invalid_argument when a
/// dimension is below 2 or spacing is not positive.
LatticeSpec build_grid(int rows, int cols, double spacing, Vec2 origin = Vec2::Zero());

/// Lumped nodal masses: m_eps plus half of every incident truss mass, with the
/// payload added to the head node.
std::vector<double> node_masses(const LatticeSpec& lattice, const StateRatios& ztilde,
                                const MaterialLibrary& lib, const MassParams& mp);

Json lattice_to_json(const LatticeSpec& lattice);
LatticeSpec lattice_from_json(const Json& doc);

}  // namespace latticebot
