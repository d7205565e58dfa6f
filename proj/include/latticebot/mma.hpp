#pragma once

#include <Eigen/Core>

namespace latticebot {

/// Constants of the MMA subproblem; defaults are Svanberg's standard choices
/// except the move limit.
struct MmaConfig {
  double move = 0.1;  // fraction of the box width per step
  double asyinit = 0.5;
  double asyincr = 1.2;
  double asydecr = 0.7;
  double albefa = 0.1;
  double raa0 = 1e-5;
  double epsimin = 1e-7;
  double a0 = 1.0;
  double c = 1000.0;  // slack cost for every constraint
  double d = 1.0;
};

/// Moving asymptotes and the two previous iterates.
struct MmaState {
  Eigen::VectorXd low;
  Eigen::VectorXd upp;
  Eigen::VectorXd xold1;
  Eigen::VectorXd xold2;
  int iter = 0;  // completed steps
  double move = 0.1;
  double xmin = 0.0;
  double xmax = 1.0;

  static MmaState create(const Eigen::VectorXd& x0, const MmaConfig& cfg, double xmin = 0.0, double xmax = 1.0);
};

struct MmaResult {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // constraint slacks; nonzero means the subproblem was infeasible
  double z = 0.0;
  bool relaxed = false;  // some slack y_i exceeded 1e-6
  int newton_iters = 0;
};

/// One MMA step for min f0(x) s.t. f_i(x) <= 0, xmin <= x <= xmax.
/// dfdx is m x n. Updates the asymptotes and iterate history in `state`.
MmaResult mma_step(MmaState& state, const MmaConfig& cfg, const Eigen::VectorXd& x, const Eigen::VectorXd& df0dx,
                   const Eigen::VectorXd& fval, const Eigen::MatrixXd& dfdx);

}  // namespace latticebot
