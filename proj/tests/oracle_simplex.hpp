// oracle_simplex.hpp
//
// Independent dense tableau simplex used only as a test oracle against the
// production revised simplex. Deliberately different algorithm and code
// path: full tableau, two-phase with artificial columns, Bland's rule
// everywhere. Slow, tiny instances only.

#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mrc/optim.hpp"

namespace oracle {

struct LpResult {
  mrc::optim::SolveStatus status;
  double objective = 0.0;
  std::vector<double> x;  // in the original variable space
};

// Solve maximize c.x over the MilpInstance's rows/bounds (integrality ignored).
inline LpResult tableau_solve(const mrc::optim::MilpInstance& inst) {
  using mrc::optim::kInf;
  const int n0 = inst.num_vars();

  // ------ rewrite into: maximize d.y, G y <= h, y >= 0 ------
  // var mapping: each original var becomes one or two nonnegative vars plus
  // a constant offset:  x = off + y_a - y_b (y_b only for free vars)
  struct VarMap {
    double off;
    int ya, yb;  // yb = -1 if absent
    double sign; // applied to ya
  };
  std::vector<VarMap> vm(n0);
  int ny = 0;
  for (int j = 0; j < n0; ++j) {
    const bool lf = std::isfinite(inst.lb[j]), uf = std::isfinite(inst.ub[j]);
    if (lf) {
      vm[j] = {inst.lb[j], ny++, -1, 1.0};
    } else if (uf) {
      vm[j] = {inst.ub[j], ny++, -1, -1.0};
    } else {
      vm[j] = {0.0, ny, ny + 1, 1.0};
      ny += 2;
    }
  }
  std::vector<double> d(ny, 0.0);
  double obj_off = 0.0;
  for (int j = 0; j < n0; ++j) {
    obj_off += inst.obj[j] * vm[j].off;
    d[vm[j].ya] += inst.obj[j] * vm[j].sign;
    if (vm[j].yb >= 0) d[vm[j].yb] -= inst.obj[j];
  }
  std::vector<std::vector<double>> G;
  std::vector<double> h;
  auto add_le = [&](const std::vector<double>& g, double rhs) {
    G.push_back(g);
    h.push_back(rhs);
  };
  // variable upper bounds (finite lb & ub)
  for (int j = 0; j < n0; ++j) {
    if (std::isfinite(inst.lb[j]) && std::isfinite(inst.ub[j])) {
      std::vector<double> g(ny, 0.0);
      g[vm[j].ya] = 1.0;
      add_le(g, inst.ub[j] - inst.lb[j]);
    }
  }
  for (const auto& r : inst.rows) {
    std::vector<double> g(ny, 0.0);
    double off = 0.0;
    for (const auto& t : r.terms) {
      off += t.coef * vm[t.var].off;
      g[vm[t.var].ya] += t.coef * vm[t.var].sign;
      if (vm[t.var].yb >= 0) g[vm[t.var].yb] -= t.coef;
    }
    if (std::isfinite(r.hi)) add_le(g, r.hi - off);
    if (std::isfinite(r.lo)) {
      std::vector<double> gn(ny);
      for (int k = 0; k < ny; ++k) gn[k] = -g[k];
      add_le(gn, off - r.lo);
    }
  }

  const int m = static_cast<int>(G.size());
  // tableau: columns = y (ny) + slack (m) + artificial (m, lazily used)
  const int cols = ny + m + m;
  std::vector<std::vector<double>> T(m, std::vector<double>(cols + 1, 0.0));
  std::vector<int> basis(m);
  int n_art = 0;
  for (int i = 0; i < m; ++i) {
    double rhs = h[i];
    double s = 1.0;
    if (rhs < 0) {  // negate row so rhs >= 0; slack becomes -1 -> needs artificial
      s = -1.0;
      rhs = -rhs;
    }
    for (int j = 0; j < ny; ++j) T[i][j] = s * G[i][j];
    T[i][ny + i] = s;  // slack
    T[i][cols] = rhs;
    if (s < 0) {
      T[i][ny + m + i] = 1.0;
      basis[i] = ny + m + i;
      ++n_art;
    } else {
      basis[i] = ny + i;
    }
  }

  auto pivot = [&](int pr, int pc) {
    const double pv = T[pr][pc];
    for (int j = 0; j <= cols; ++j) T[pr][j] /= pv;
    for (int i = 0; i < m; ++i) {
      if (i == pr) continue;
      const double f = T[i][pc];
      if (f == 0.0) continue;
      for (int j = 0; j <= cols; ++j) T[i][j] -= f * T[pr][j];
    }
    basis[pr] = pc;
  };

  // Bland-rule simplex on reduced costs for a given objective vector (maximize)
  auto run = [&](const std::vector<double>& cost, bool art_allowed) -> int {
    // returns 0 optimal, 1 unbounded
    for (long iter = 0; iter < 200000; ++iter) {
      std::vector<double> y(m);
      for (int i = 0; i < m; ++i) y[i] = cost[basis[i]];
      int pc = -1;
      for (int j = 0; j < cols; ++j) {
        if (!art_allowed && j >= ny + m) continue;
        bool inb = false;
        for (int i = 0; i < m; ++i)
          if (basis[i] == j) { inb = true; break; }
        if (inb) continue;
        double red = cost[j];
        for (int i = 0; i < m; ++i) red -= y[i] * T[i][j];
        if (red > 1e-9) { pc = j; break; }  // Bland: first improving
      }
      if (pc < 0) return 0;
      int pr = -1;
      double best = kInf;
      for (int i = 0; i < m; ++i) {
        if (T[i][pc] > 1e-11) {
          const double ratio = T[i][cols] / T[i][pc];
          if (ratio < best - 1e-12 || (std::abs(ratio - best) <= 1e-12 && (pr < 0 || basis[i] < basis[pr]))) {
            best = ratio;
            pr = i;
          }
        }
      }
      if (pr < 0) return 1;
      pivot(pr, pc);
    }
    return 0;
  };

  LpResult res;
  if (n_art > 0) {
    std::vector<double> c1(cols, 0.0);
    for (int i = 0; i < m; ++i) c1[ny + m + i] = -1.0;
    run(c1, true);
    double art_sum = 0.0;
    for (int i = 0; i < m; ++i)
      if (basis[i] >= ny + m) art_sum += T[i][cols];
    if (art_sum > 1e-7) {
      res.status = mrc::optim::SolveStatus::infeasible;
      return res;
    }
  }
  std::vector<double> c2(cols, 0.0);
  for (int j = 0; j < ny; ++j) c2[j] = d[j];
  for (int i = 0; i < m; ++i) c2[ny + m + i] = -1e9;  // basic artificials must stay at zero
  const int rc = run(c2, false);
  if (rc == 1) {
    res.status = mrc::optim::SolveStatus::unbounded;
    return res;
  }
  for (int i = 0; i < m; ++i)
    if (basis[i] >= ny + m && T[i][cols] > 1e-7) {
      res.status = mrc::optim::SolveStatus::infeasible;
      return res;
    }
  std::vector<double> yval(ny, 0.0);
  for (int i = 0; i < m; ++i)
    if (basis[i] < ny) yval[basis[i]] = T[i][cols];
  res.objective = obj_off;
  for (int j = 0; j < ny; ++j) res.objective += d[j] * yval[j];
  res.x.assign(n0, 0.0);
  for (int j = 0; j < n0; ++j) {
    res.x[j] = vm[j].off + vm[j].sign * yval[vm[j].ya];
    if (vm[j].yb >= 0) res.x[j] -= yval[vm[j].yb];
  }
  res.status = mrc::optim::SolveStatus::optimal;
  return res;
}

// exhaustive binary enumeration + oracle LP: certified MILP optimum
inline LpResult enumerate_milp(mrc::optim::MilpInstance inst) {
  using mrc::optim::SolveStatus;
  const auto bins = inst.binaries;
  inst.binaries.clear();
  LpResult best;
  best.status = SolveStatus::infeasible;
  best.objective = -mrc::optim::kInf;
  const int nb = static_cast<int>(bins.size());
  for (long mask = 0; mask < (1L << nb); ++mask) {
    for (int k = 0; k < nb; ++k) {
      const double v = (mask >> k) & 1 ? 1.0 : 0.0;
      inst.lb[bins[k]] = v;
      inst.ub[bins[k]] = v;
    }
    LpResult r = tableau_solve(inst);
    if (r.status == SolveStatus::optimal && r.objective > best.objective) best = r;
    if (r.status == SolveStatus::unbounded) {
      best.status = SolveStatus::unbounded;
      return best;
    }
  }
  return best;
}

}  // namespace oracle
