#include "latticebot/render.hpp"

#include "latticebot/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <sstream>

namespace latticebot {

namespace {

struct Box {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();
  void add(const Vec2& p) {
    x0 = std::min(x0, p.x());
    y0 = std::min(y0, p.y());
    x1 = std::max(x1, p.x());
    y1 = std::max(y1, p.y());
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

int state_of(const DesignMatrix& z, int e) {
  int best = 0;
  for (int k = 1; k < kNumStates; ++k) {
    if (z(e, k) > z(e, best)) best = k;
  }
  return best;
}

}  // namespace

std::string render_svg(const std::vector<SimState>& traj, std::size_t step, const DesignMatrix& z,
                       const LatticeSpec& lattice, const GroundModel& ground, const RenderStyle& style) {
  if (step >= traj.size()) throw std::invalid_argument("render step outside the trajectory");
  if (z.rows() != lattice.num_edges()) throw std::invalid_argument("design does not match the lattice");
  Box box;
  for (const auto& s : traj) {
    for (const auto& p : s.x) box.add(p);
  }
  box.add(Vec2(box.x0, ground.height));
  box.x0 -= style.margin_m;
  box.y0 -= style.margin_m;
  box.x1 += style.margin_m;
  box.y1 += style.margin_m;
  const double ppm = style.pixels_per_meter;
  const double width = (box.x1 - box.x0) * ppm;
  const double height = (box.y1 - box.y0) * ppm;
  auto px = [&](const Vec2& p) { return Vec2((p.x() - box.x0) * ppm, (box.y1 - p.y()) * ppm); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
      << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Ground polyline sampled at the box edges and the incline pivot.
  std::vector<double> xs{box.x0, box.x1};
  if (ground.kind == GroundModel::Kind::incline && ground.pivot.x() > box.x0 && ground.pivot.x() < box.x1) {
    xs.insert(xs.begin() + 1, ground.pivot.x());
  }
  svg << "<polyline class=\"ground\" fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"";
  for (double x : xs) {
    const SurfaceFrame f = ground.frame_at(x);
    const double y = f.point.y() + (f.normal.x() * (f.point.x() - x)) / f.normal.y();
    const Vec2 p = px(Vec2(x, y));
    svg << fmt(p.x()) << ',' << fmt(p.y()) << ' ';
  }
  svg << "\"/>\n";

  const SimState& s = traj[step];
  for (int e = 0; e < lattice.num_edges(); ++e) {
    const int st = state_of(z, e);
    if (st == kVoid) continue;
    const auto [i, j] = lattice.edges[e];
    const Vec2 a = px(s.x[i]);
    const Vec2 b = px(s.x[j]);
    std::string color = "#808080";
    double w = style.skeleton_width;
    const char* cls = "skeleton";
    if (st == kActuator) {
      const double strain = (s.x[j] - s.x[i]).norm() / lattice.rest_lengths[e] - 1.0;
      color = strain > 0.0 ? "#d62728" : (strain < 0.0 ? "#1f77b4" : "#808080");
      w = style.actuator_width;
      cls = "actuator";
    }
    svg << "<line class=\"" << cls << "\" data-edge=\"" << e << "\" x1=\"" << fmt(a.x()) << "\" y1=\"" << fmt(a.y())
        << "\" x2=\"" << fmt(b.x()) << "\" y2=\"" << fmt(b.y()) << "\" stroke=\"" << color << "\" stroke-width=\""
        << w << "\"/>\n";
  }

  const int head = lattice.head_index;
  svg << "<polyline class=\"head-path\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.5\" points=\"";
  for (std::size_t k = 0; k <= step; ++k) {
    const Vec2 p = px(traj[k].x[head]);
    svg << fmt(p.x()) << ',' << fmt(p.y()) << ' ';
  }
  svg << "\"/>\n";
  const Vec2 hp = px(s.x[head]);
  svg << "<circle class=\"head\" cx=\"" << fmt(hp.x()) << "\" cy=\"" << fmt(hp.y())
      << "\" r=\"5\" fill=\"#2ca02c\"/>\n";
  svg << "<text x=\"8\" y=\"18\" font-family=\"monospace\" font-size=\"14\">step " << step << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> render_frames(const std::vector<SimState>& traj, const DesignMatrix& z,
                                                 const LatticeSpec& lattice, const GroundModel& ground,
                                                 const std::filesystem::path& out_dir, int stride,
                                                 const RenderStyle& style) {
  if (stride < 1) throw std::invalid_argument("frame stride must be positive");
  if (traj.empty()) throw std::invalid_argument("empty trajectory");
  std::vector<std::size_t> steps;
  for (std::size_t k = 0; k < traj.size(); k += static_cast<std::size_t>(stride)) steps.push_back(k);
  if (steps.back() != traj.size() - 1) steps.push_back(traj.size() - 1);

  std::vector<std::filesystem::path> out;
  for (std::size_t k : steps) {
    char name[48];
    std::snprintf(name, sizeof(name), "frame_%06zu.svg", k);
    const std::filesystem::path p = out_dir / name;
    write_text_file(p, render_svg(traj, k, z, lattice, ground, style));
    out.push_back(p);
  }
  return out;
}

std::vector<SimState> read_trajectory_csv(std::istream& in, double* dt) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,time,node_id", 0) != 0) {
    throw std::invalid_argument("trajectory CSV header missing");
  }
  std::vector<SimState> out;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    long step = 0, node = 0;
    double t = 0, x = 0, y = 0, vx = 0, vy = 0;
    if (std::sscanf(line.c_str(), "%ld,%lf,%ld,%lf,%lf,%lf,%lf", &step, &t, &node, &x, &y, &vx, &vy) != 7) {
      throw std::invalid_argument("malformed trajectory row: " + line);
    }
    if (step < 0 || node < 0) throw std::invalid_argument("negative index in trajectory row");
    if (static_cast<std::size_t>(step) == out.size()) {
      out.emplace_back();
      out.back().t = t;
      times.push_back(t);
    }
    if (static_cast<std::size_t>(step) + 1 != out.size() || static_cast<std::size_t>(node) != out.back().x.size()) {
      throw std::invalid_argument("trajectory rows out of order at: " + line);
    }
    out.back().x.emplace_back(x, y);
    out.back().v.emplace_back(vx, vy);
  }
  if (dt && times.size() > 1) *dt = times[1] - times[0];
  return out;
}

}  // namespace latticebot
