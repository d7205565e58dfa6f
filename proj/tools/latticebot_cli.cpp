#include "latticebot/baseline.hpp"
#include "latticebot/gradcheck.hpp"
#include "latticebot/io.hpp"
#include "latticebot/render.hpp"
#include "latticebot/scenario.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

using namespace latticebot;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalidConfig = 2;
constexpr int kExitDiverged = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> iters;
  std::optional<int> steps;
};

ScenarioConfig load_config(const std::string& path, const Overrides& ov) {
  ScenarioConfig cfg = ScenarioConfig::from_json(read_json_file(path));
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.iters) cfg.iterations = *ov.iters;
  if (ov.steps) cfg.total_steps = *ov.steps;
  cfg.validate();
  return cfg;
}

void write_error_record(const std::filesystem::path& dir, const std::string& kind, const std::string& message,
                        std::optional<int> step) {
  if (dir.empty()) return;
  Json err;
  err["error"] = kind;
  err["message"] = message;
  if (step) err["step"] = *step;
  try {
    write_text_file(dir / "error.json", err.dump(2));
  } catch (const std::exception&) {
  }
}

// Runs f and maps failures onto exit codes, leaving error.json in `dir`.
template <typename F>
int guarded(const std::filesystem::path& dir, F&& f) {
  try {
    f();
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    write_error_record(dir, "invalid_config", e.what(), std::nullopt);
    return kExitInvalidConfig;
  } catch (const SimulationError& e) {
    std::cerr << "simulation diverged: " << e.what() << '\n';
    write_error_record(dir, "simulation_diverged", e.what(), e.step());
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    write_error_record(dir, "error", e.what(), std::nullopt);
    return kExitFailure;
  }
}

void print_summary(const RunArtifacts& run) {
  std::printf("%s: displacement %.4f m (net %.4f m), V %.3f, V_act %.3f, g_bin %.3g, %zu iterations, %.1f s\n",
              run.metrics["scenario"].get<std::string>().c_str(), -run.final_loss,
              run.final_head_x - run.initial_head_x, run.metrics["V"].get<double>(),
              run.metrics["V_act"].get<double>(), run.metrics["g_bin"].get<double>(), run.history.size(),
              run.wallclock_s);
}

std::vector<char> parse_trials(const std::string& spec) {
  std::vector<char> out;
  if (spec.size() == 4 && spec.substr(1, 2) == "..") {
    if (spec[0] > spec[3]) throw std::invalid_argument("empty trial range " + spec);
    for (char c = spec[0]; c <= spec[3]; ++c) out.push_back(c);
  } else {
    for (char c : spec) {
      if (c != ',' && c != ' ') out.push_back(c);
    }
  }
  for (char c : out) trial_flags(c);
  if (out.empty()) throw std::invalid_argument("no trials selected");
  return out;
}

unsigned worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("LATTICEBOT_WORKERS"); env && *env) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap < 1) throw std::invalid_argument("LATTICEBOT_WORKERS must be a positive integer");
    n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(jobs)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Truss-lattice robot co-design: topology, material layout and control"};
  app.require_subcommand(1);

  Overrides run_ov;
  std::string run_config, run_out = "out", run_resume;
  auto* run = app.add_subcommand("run", "Run one scenario and write its artifacts");
  run->add_option("config", run_config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory");
  run->add_option("--seed", run_ov.seed, "Override the seed");
  run->add_option("--iters", run_ov.iters, "Override the iteration budget");
  run->add_option("--steps", run_ov.steps, "Override the rollout length");
  run->add_option("--resume", run_resume, "Continue from a checkpoint JSON")->check(CLI::ExistingFile);

  Overrides abl_ov;
  std::string abl_config, abl_out = "out/ablation", abl_trials = "a..h";
  auto* abl = app.add_subcommand("ablation", "Run the topology/material/control ablation trials");
  abl->add_option("base_config", abl_config, "Scenario JSON shared by all trials")->required()->check(CLI::ExistingFile);
  abl->add_option("--trials", abl_trials, "Trial letters, e.g. a..h or a,c,h");
  abl->add_option("--out", abl_out, "Output directory; one subdirectory per trial");
  abl->add_option("--seed", abl_ov.seed, "Override the seed");
  abl->add_option("--iters", abl_ov.iters, "Override the iteration budget");
  abl->add_option("--steps", abl_ov.steps, "Override the rollout length");

  std::string rnd_traj, rnd_design, rnd_out = "frames";
  int rnd_stride = 256;
  auto* rnd = app.add_subcommand("render", "Render SVG frames from a trajectory and design");
  rnd->add_option("trajectory", rnd_traj, "trajectory.csv")->required()->check(CLI::ExistingFile);
  rnd->add_option("design", rnd_design, "design.json")->required()->check(CLI::ExistingFile);
  rnd->add_option("--out", rnd_out, "Frame directory");
  rnd->add_option("--stride", rnd_stride, "Steps between frames")->check(CLI::PositiveNumber);

  Overrides gc_ov;
  std::string gc_config;
  GradCheckConfig gc;
  double gc_tol = 5e-2;
  auto* grad = app.add_subcommand("gradcheck", "Compare adjoint gradients with finite differences");
  grad->add_option("config", gc_config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  grad->add_option("--steps", gc_ov.steps, "Rollout length (default 256)");
  grad->add_option("--theta-coords", gc.theta_coords, "Sampled controller coordinates");
  grad->add_option("--z-coords", gc.z_coords, "Sampled design coordinates");
  grad->add_option("--tol", gc_tol, "Maximum accepted relative error");
  grad->add_option("--seed", gc.seed, "Coordinate sampling seed");
  grad->add_option("--h-theta", gc.h_theta, "Finite-difference step for controller weights");
  grad->add_option("--h-z", gc.h_z, "Finite-difference step for design variables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalidConfig;
  }

  if (*run) {
    return guarded(run_out, [&] {
      const ScenarioConfig cfg = load_config(run_config, run_ov);
      std::optional<Json> resume;
      if (!run_resume.empty()) resume = read_json_file(run_resume);
      const RunArtifacts art = run_scenario(cfg, run_out, resume ? &*resume : nullptr);
      print_summary(art);
    });
  }

  if (*abl) {
    std::vector<char> trials;
    ScenarioConfig base;
    const int rc = guarded(abl_out, [&] {
      trials = parse_trials(abl_trials);
      base = load_config(abl_config, abl_ov);
      if (base.init == InitHeuristic::baseline_fixed) {
        throw std::invalid_argument("ablation needs a design heuristic other than baseline_fixed");
      }
    });
    if (rc != kExitOk) return rc;
    std::vector<int> codes(trials.size(), kExitOk);
    std::atomic<std::size_t> next{0};
    std::mutex io;
    auto worker = [&] {
      for (std::size_t k; (k = next.fetch_add(1)) < trials.size();) {
        ScenarioConfig cfg = base;
        cfg.flags = trial_flags(trials[k]);
        cfg.name = base.name + "_trial_" + trials[k];
        const std::filesystem::path dir = std::filesystem::path(abl_out) / (std::string("trial_") + trials[k]);
        codes[k] = guarded(dir, [&] {
          const RunArtifacts art = run_scenario(cfg, dir);
          std::lock_guard<std::mutex> lock(io);
          print_summary(art);
        });
      }
    };
    unsigned workers = 1;
    const int wc = guarded({}, [&] { workers = worker_count(trials.size()); });
    if (wc != kExitOk) return wc;
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return *std::max_element(codes.begin(), codes.end());
  }

  if (*rnd) {
    return guarded(rnd_out, [&] {
      std::ifstream in(rnd_traj);
      if (!in) throw std::invalid_argument("cannot open " + rnd_traj);
      const std::vector<SimState> traj = read_trajectory_csv(in);
      const Json design = read_json_file(rnd_design);
      const LatticeSpec lattice = lattice_from_json(design.at("lattice"));
      const DesignMatrix z = design_from_json(design.at("design"));
      GroundModel ground;
      if (auto it = design.find("ground"); it != design.end()) {
        const Json& g = *it;
        if (g.at("kind").get<std::string>() == "incline") {
          ground = GroundModel::incline(g.at("angle_deg").get<double>(),
                                        Vec2(g.at("pivot")[0].get<double>(), g.at("pivot")[1].get<double>()));
        } else {
          ground = GroundModel::flat_at(g.at("height").get<double>());
        }
      }
      if (!traj.empty() && traj.front().x.size() != lattice.nodes.size()) {
        throw std::invalid_argument("trajectory node count does not match the design lattice");
      }
      const auto frames = render_frames(traj, z, lattice, ground, rnd_out, rnd_stride);
      std::printf("wrote %zu frames to %s\n", frames.size(), rnd_out.c_str());
    });
  }

  if (*grad) {
    int verdict = kExitOk;
    const int rc = guarded({}, [&] {
      if (!gc_ov.steps) gc_ov.steps = 256;
      const ScenarioConfig cfg = load_config(gc_config, gc_ov);
      const Robot robot = scenario_robot(cfg);
      SimConfig sim = scenario_sim_config(cfg);
      sim.grad_steps = sim.total_steps;
      const AblationPlan plan = apply_ablation(cfg.flags, cfg.init,
                                               init_heuristic(cfg.init, robot.lattice, cfg.seed, cfg.heuristic),
                                               scenario_schedule(cfg), robot.lattice);
      Projection proj = Projection::performance(20.0);
      if (plan.lock) proj = proj.with_material_lock(*plan.lock);
      const ControllerParams theta = xavier_init(cfg.seed, robot.controller_dims(cfg.hidden));
      const GradCheckReport rep = gradient_check(robot, plan.z0, proj, theta, sim, gc);
      std::printf("loss %.10g, %ld contact events, %d coordinates rejected near grazing contact\n", rep.loss,
                  rep.contact_events, rep.rejected_grazing);
      std::printf("%-6s %8s %16s %16s %12s\n", "kind", "index", "adjoint", "finite-diff", "rel-error");
      for (const auto& e : rep.entries) {
        std::printf("%-6s %8ld %16.8e %16.8e %12.3e\n", e.kind.c_str(), static_cast<long>(e.index), e.adjoint,
                    e.finite_diff, e.rel_error);
      }
      const double worst = rep.max_rel_error();
      std::printf("max relative error %.3e (tolerance %.1e): %s\n", worst, gc_tol, worst < gc_tol ? "ok" : "FAILED");
      if (!(worst < gc_tol)) verdict = kExitFailure;
    });
    return rc != kExitOk ? rc : verdict;
  }
  return kExitOk;
}
