#include "latticebot/mma.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace latticebot {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MmaState MmaState::create(const VectorXd& x0, const MmaConfig& cfg, double xmin, double xmax) {
  if (!(xmax > xmin)) throw std::invalid_argument("MMA box must satisfy xmin < xmax");
  MmaState s;
  s.low = x0.array() - cfg.asyinit * (xmax - xmin);
  s.upp = x0.array() + cfg.asyinit * (xmax - xmin);
  s.xold1 = x0;
  s.xold2 = x0;
  s.move = cfg.move;
  s.xmin = xmin;
  s.xmax = xmax;
  return s;
}

namespace {

struct Sub {
  int m, n;
  double epsimin;
  VectorXd low, upp, alfa, beta, p0, q0, b, a, c, d;
  MatrixXd P, Q;
  double a0;
};

struct Vars {
  VectorXd x, y, lam, xsi, eta, mu, s;
  double z, zet;
};

VectorXd residual(const Sub& p, const Vars& v, double epsi) {
  const int m = p.m, n = p.n;
  const VectorXd ux1 = p.upp - v.x;
  const VectorXd xl1 = v.x - p.low;
  const VectorXd ux2 = ux1.cwiseProduct(ux1);
  const VectorXd xl2 = xl1.cwiseProduct(xl1);
  const VectorXd plam = p.p0 + p.P.transpose() * v.lam;
  const VectorXd qlam = p.q0 + p.Q.transpose() * v.lam;
  const VectorXd gvec = p.P * ux1.cwiseInverse() + p.Q * xl1.cwiseInverse();
  const VectorXd dpsidx = plam.cwiseQuotient(ux2) - qlam.cwiseQuotient(xl2);

  VectorXd r(3 * n + 4 * m + 2);
  Eigen::Index o = 0;
  r.segment(o, n) = dpsidx - v.xsi + v.eta; o += n;
  r.segment(o, m) = p.c + p.d.cwiseProduct(v.y) - v.mu - v.lam; o += m;
  r(o++) = p.a0 - v.zet - p.a.dot(v.lam);
  r.segment(o, m) = gvec - p.a * v.z - v.y + v.s - p.b; o += m;
  r.segment(o, n) = v.xsi.cwiseProduct(v.x - p.alfa).array() - epsi; o += n;
  r.segment(o, n) = v.eta.cwiseProduct(p.beta - v.x).array() - epsi; o += n;
  r.segment(o, m) = v.mu.cwiseProduct(v.y).array() - epsi; o += m;
  r(o++) = v.zet * v.z - epsi;
  r.segment(o, m) = v.lam.cwiseProduct(v.s).array() - epsi;
  return r;
}

// Primal-dual Newton method on the MMA subproblem, after Svanberg's subsolv.
Vars subsolv(const Sub& p, int& newton_iters) {
  const int m = p.m, n = p.n;
  const VectorXd een = VectorXd::Ones(n);
  const VectorXd eem = VectorXd::Ones(m);
  double epsi = 1.0;
  Vars v;
  v.x = 0.5 * (p.alfa + p.beta);
  v.y = eem;
  v.z = 1.0;
  v.lam = eem;
  v.xsi = (v.x - p.alfa).cwiseInverse().cwiseMax(een);
  v.eta = (p.beta - v.x).cwiseInverse().cwiseMax(een);
  v.mu = (0.5 * p.c).cwiseMax(eem);
  v.zet = 1.0;
  v.s = eem;

  while (epsi > p.epsimin) {
    VectorXd res = residual(p, v, epsi);
    double resnorm = res.norm();
    double resmax = res.cwiseAbs().maxCoeff();
    int ittt = 0;
    while (resmax > 0.9 * epsi && ittt < 200) {
      ++ittt;
      ++newton_iters;
      const VectorXd ux1 = p.upp - v.x;
      const VectorXd xl1 = v.x - p.low;
      const VectorXd ux2 = ux1.cwiseProduct(ux1);
      const VectorXd xl2 = xl1.cwiseProduct(xl1);
      const VectorXd ux3 = ux1.cwiseProduct(ux2);
      const VectorXd xl3 = xl1.cwiseProduct(xl2);
      const VectorXd plam = p.p0 + p.P.transpose() * v.lam;
      const VectorXd qlam = p.q0 + p.Q.transpose() * v.lam;
      const VectorXd gvec = p.P * ux1.cwiseInverse() + p.Q * xl1.cwiseInverse();
      const MatrixXd GG = p.P * ux2.cwiseInverse().asDiagonal() - p.Q * xl2.cwiseInverse().asDiagonal();
      const VectorXd dpsidx = plam.cwiseQuotient(ux2) - qlam.cwiseQuotient(xl2);
      const VectorXd xa = v.x - p.alfa;
      const VectorXd bx = p.beta - v.x;
      const VectorXd delx = dpsidx - epsi * xa.cwiseInverse() + epsi * bx.cwiseInverse();
      const VectorXd dely = p.c + p.d.cwiseProduct(v.y) - v.lam - epsi * v.y.cwiseInverse();
      const double delz = p.a0 - p.a.dot(v.lam) - epsi / v.z;
      const VectorXd dellam = gvec - p.a * v.z - v.y - p.b + epsi * v.lam.cwiseInverse();
      const VectorXd diagx = 2.0 * (plam.cwiseQuotient(ux3) + qlam.cwiseQuotient(xl3)) + v.xsi.cwiseQuotient(xa) +
                             v.eta.cwiseQuotient(bx);
      const VectorXd diagy = p.d + v.mu.cwiseQuotient(v.y);
      const VectorXd diaglamyi = v.s.cwiseQuotient(v.lam) + diagy.cwiseInverse();

      VectorXd dx, dlam;
      double dz;
      if (m < n) {
        VectorXd bb(m + 1);
        bb.head(m) = dellam + dely.cwiseQuotient(diagy) - GG * delx.cwiseQuotient(diagx);
        bb(m) = delz;
        MatrixXd AA(m + 1, m + 1);
        AA.topLeftCorner(m, m) = GG * diagx.cwiseInverse().asDiagonal() * GG.transpose();
        AA.topLeftCorner(m, m).diagonal() += diaglamyi;
        AA.topRightCorner(m, 1) = p.a;
        AA.bottomLeftCorner(1, m) = p.a.transpose();
        AA(m, m) = -v.zet / v.z;
        const VectorXd sol = AA.partialPivLu().solve(bb);
        dlam = sol.head(m);
        dz = sol(m);
        dx = -delx.cwiseQuotient(diagx) - (GG.transpose() * dlam).cwiseQuotient(diagx);
      } else {
        const VectorXd dellamyi = dellam + dely.cwiseQuotient(diagy);
        const VectorXd inv = diaglamyi.cwiseInverse();
        MatrixXd AA(n + 1, n + 1);
        AA.topLeftCorner(n, n) = GG.transpose() * inv.asDiagonal() * GG;
        AA.topLeftCorner(n, n).diagonal() += diagx;
        const VectorXd axz = -GG.transpose() * p.a.cwiseProduct(inv);
        AA.topRightCorner(n, 1) = axz;
        AA.bottomLeftCorner(1, n) = axz.transpose();
        AA(n, n) = v.zet / v.z + p.a.dot(p.a.cwiseProduct(inv));
        VectorXd bb(n + 1);
        bb.head(n) = -(delx + GG.transpose() * dellamyi.cwiseProduct(inv));
        bb(n) = -(delz - p.a.dot(dellamyi.cwiseProduct(inv)));
        const VectorXd sol = AA.partialPivLu().solve(bb);
        dx = sol.head(n);
        dz = sol(n);
        dlam = (GG * dx).cwiseProduct(inv) - dz * p.a.cwiseProduct(inv) + dellamyi.cwiseProduct(inv);
      }
      const VectorXd dy = -dely.cwiseQuotient(diagy) + dlam.cwiseQuotient(diagy);
      const VectorXd dxsi = -v.xsi + epsi * xa.cwiseInverse() - v.xsi.cwiseProduct(dx).cwiseQuotient(xa);
      const VectorXd deta = -v.eta + epsi * bx.cwiseInverse() + v.eta.cwiseProduct(dx).cwiseQuotient(bx);
      const VectorXd dmu = -v.mu + epsi * v.y.cwiseInverse() - v.mu.cwiseProduct(dy).cwiseQuotient(v.y);
      const double dzet = -v.zet + epsi / v.z - v.zet * dz / v.z;
      const VectorXd ds = -v.s + epsi * v.lam.cwiseInverse() - v.s.cwiseProduct(dlam).cwiseQuotient(v.lam);

      double stm = 1.0;
      auto track = [&stm](const VectorXd& dv, const VectorXd& val, double sign) {
        for (Eigen::Index i = 0; i < dv.size(); ++i) stm = std::max(stm, sign * 1.01 * dv(i) / val(i));
      };
      track(dy, v.y, -1.0);
      track(dlam, v.lam, -1.0);
      track(dxsi, v.xsi, -1.0);
      track(deta, v.eta, -1.0);
      track(dmu, v.mu, -1.0);
      track(ds, v.s, -1.0);
      stm = std::max(stm, -1.01 * dz / v.z);
      stm = std::max(stm, -1.01 * dzet / v.zet);
      track(dx, xa, -1.0);
      track(dx, bx, 1.0);
      double steg = 1.0 / stm;

      const Vars old = v;
      int itto = 0;
      double resinew = 2.0 * resnorm;
      while (resinew > resnorm && itto < 50) {
        ++itto;
        v.x = old.x + steg * dx;
        v.y = old.y + steg * dy;
        v.z = old.z + steg * dz;
        v.lam = old.lam + steg * dlam;
        v.xsi = old.xsi + steg * dxsi;
        v.eta = old.eta + steg * deta;
        v.mu = old.mu + steg * dmu;
        v.zet = old.zet + steg * dzet;
        v.s = old.s + steg * ds;
        res = residual(p, v, epsi);
        resinew = res.norm();
        steg *= 0.5;
      }
      resnorm = resinew;
      resmax = res.cwiseAbs().maxCoeff();
    }
    epsi *= 0.1;
  }
  return v;
}

}  // namespace

MmaResult mma_step(MmaState& st, const MmaConfig& cfg, const VectorXd& xval, const VectorXd& df0dx,
                   const VectorXd& fval, const MatrixXd& dfdx) {
  const Eigen::Index n = xval.size();
  const Eigen::Index m = fval.size();
  if (df0dx.size() != n || dfdx.rows() != m || dfdx.cols() != n || st.low.size() != n) {
    throw std::invalid_argument("mma_step: dimension mismatch");
  }
  if (m < 1) throw std::invalid_argument("mma_step: at least one constraint is required");
  if (!df0dx.allFinite() || !fval.allFinite() || !dfdx.allFinite() || !xval.allFinite()) {
    throw std::invalid_argument("mma_step: non-finite input");
  }
  const double range = st.xmax - st.xmin;

  // Asymptotes: first two steps use the initial spread, then adapt to oscillation.
  if (st.iter < 2) {
    st.low = xval.array() - cfg.asyinit * range;
    st.upp = xval.array() + cfg.asyinit * range;
  } else {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double zz = (xval(j) - st.xold1(j)) * (st.xold1(j) - st.xold2(j));
      const double f = zz > 0.0 ? cfg.asyincr : (zz < 0.0 ? cfg.asydecr : 1.0);
      double lo = xval(j) - f * (st.xold1(j) - st.low(j));
      double up = xval(j) + f * (st.upp(j) - st.xold1(j));
      lo = std::min(std::max(lo, xval(j) - 10.0 * range), xval(j) - 0.01 * range);
      up = std::max(std::min(up, xval(j) + 10.0 * range), xval(j) + 0.01 * range);
      st.low(j) = lo;
      st.upp(j) = up;
    }
  }

  Sub p;
  p.m = static_cast<int>(m);
  p.n = static_cast<int>(n);
  p.epsimin = cfg.epsimin;
  p.low = st.low;
  p.upp = st.upp;
  p.alfa.resize(n);
  p.beta.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    p.alfa(j) = std::max({st.low(j) + cfg.albefa * (xval(j) - st.low(j)), xval(j) - st.move * range, st.xmin});
    p.beta(j) = std::min({st.upp(j) - cfg.albefa * (st.upp(j) - xval(j)), xval(j) + st.move * range, st.xmax});
  }
  const double xmamiinv = 1.0 / std::max(range, 1e-5);
  const VectorXd ux1 = st.upp - xval;
  const VectorXd xl1 = xval - st.low;
  const VectorXd ux2 = ux1.cwiseProduct(ux1);
  const VectorXd xl2 = xl1.cwiseProduct(xl1);

  p.p0 = df0dx.cwiseMax(0.0);
  p.q0 = (-df0dx).cwiseMax(0.0);
  const VectorXd pq0 = 0.001 * (p.p0 + p.q0).array() + cfg.raa0 * xmamiinv;
  p.p0 = (p.p0 + pq0).cwiseProduct(ux2);
  p.q0 = (p.q0 + pq0).cwiseProduct(xl2);

  p.P = dfdx.cwiseMax(0.0);
  p.Q = (-dfdx).cwiseMax(0.0);
  const MatrixXd PQ = (0.001 * (p.P + p.Q)).array() + cfg.raa0 * xmamiinv;
  p.P = (p.P + PQ) * ux2.asDiagonal();
  p.Q = (p.Q + PQ) * xl2.asDiagonal();
  p.b = p.P * ux1.cwiseInverse() + p.Q * xl1.cwiseInverse() - fval;
  p.a0 = cfg.a0;
  p.a = VectorXd::Zero(m);
  p.c = VectorXd::Constant(m, cfg.c);
  p.d = VectorXd::Constant(m, cfg.d);

  MmaResult r;
  const Vars sol = subsolv(p, r.newton_iters);
  r.x = sol.x;
  r.y = sol.y;
  r.z = sol.z;
  r.relaxed = sol.y.maxCoeff() > 1e-6;

  st.xold2 = st.xold1;
  st.xold1 = xval;
  ++st.iter;
  return r;
}

}  // namespace latticebot
