// powerflow.hpp
//
// AC power flow (Newton-Raphson, polar, full Jacobian, flat start) plus
// Monte-Carlo operating-point generation and regression feature extraction.
//
// Branch flows are computed in exactly one place (branch_flow), as the
// series-element flow seen from each terminal with the from-side voltage
// divided by the off-nominal tap. With tap = 1 this is the plain branch
// flow equation in (v, theta); the from+to sums then equal the series I^2 R
// losses, which the snapshot validity check relies on.

#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrc/case_io.hpp"
#include "mrc/linalg.hpp"
#include "mrc/rng.hpp"

namespace mrc::powerflow {

using case_io::BusType;
using case_io::GridCase;

struct BranchFlow {
  double pf = 0, qf = 0;  // into the branch at the from side
  double pt = 0, qt = 0;  // into the branch at the to side
};

struct Snapshot {
  std::vector<double> vm, va;          // per bus (p.u., rad)
  std::vector<double> p_inj, q_inj;    // per bus net injection, p.u.
  std::vector<BranchFlow> flows;       // per branch
  std::vector<double> pd, qd;          // the loads this point was solved with
  int iterations = 0;
  double mismatch = 0;
};

// Series-element branch flow from the solved voltages. Single source of
// truth for every stored or recomputed flow in the pipeline.
inline BranchFlow branch_flow(const case_io::Branch& br, double vi, double thi, double vj, double thj) {
  const double g = br.series_g();
  const double b = br.series_b();
  const double ve = vi / br.tap;
  const double th = thi - thj;
  const double ct = std::cos(th), st = std::sin(th);
  BranchFlow f;
  f.pf = g * (ve * ve - ve * vj * ct) - b * ve * vj * st;
  f.qf = -b * (ve * ve - ve * vj * ct) - g * ve * vj * st;
  f.pt = g * (vj * vj - vj * ve * ct) + b * vj * ve * st;
  f.qt = -b * (vj * vj - vj * ve * ct) + g * vj * ve * st;
  return f;
}

struct PowerflowError : std::runtime_error {
  double final_mismatch;
  PowerflowError(const std::string& msg, double mm)
      : std::runtime_error(msg + " (mismatch " + std::to_string(mm) + ")"), final_mismatch(mm) {}
};

struct NrOptions {
  double tol = 1e-8;
  int max_iters = 30;
};

// Solve the AC power flow for the given per-bus loads (p.u.). Loads default
// to the case values when empty.
inline Snapshot solve_powerflow(const GridCase& gc, std::vector<double> pd = {}, std::vector<double> qd = {},
                                NrOptions opt = NrOptions()) {
  const int n = static_cast<int>(gc.buses.size());
  if (pd.empty()) {
    pd.resize(n);
    for (int i = 0; i < n; ++i) pd[i] = gc.buses[i].pd;
  }
  if (qd.empty()) {
    qd.resize(n);
    for (int i = 0; i < n; ++i) qd[i] = gc.buses[i].qd;
  }

  // Ybus
  Mat G(n, n), B(n, n);
  for (const auto& br : gc.branches) {
    if (!br.in_service) continue;
    const int i = gc.bus_pos(br.from), j = gc.bus_pos(br.to);
    const double g = br.series_g(), b = br.series_b();
    const double t = br.tap, bc2 = br.b_charge / 2.0;
    G(i, i) += g / (t * t);
    B(i, i) += (b + bc2) / (t * t);
    G(j, j) += g;
    B(j, j) += b + bc2;
    G(i, j) += -g / t;
    B(i, j) += -b / t;
    G(j, i) += -g / t;
    B(j, i) += -b / t;
  }
  for (int i = 0; i < n; ++i) {
    G(i, i) += gc.buses[i].gs;
    B(i, i) += gc.buses[i].bs;
  }

  // specified injections
  std::vector<double> p_spec(n, 0.0), q_spec(n, 0.0);
  for (int i = 0; i < n; ++i) {
    p_spec[i] = -pd[i];
    q_spec[i] = -qd[i];
  }
  for (const auto& g : gc.gens) {
    const int i = gc.bus_pos(g.bus);
    p_spec[i] += g.pg;
    q_spec[i] += g.qg;
  }

  std::vector<int> ang_idx, vm_idx;  // buses with unknown angle / magnitude
  for (int i = 0; i < n; ++i) {
    if (gc.buses[i].type != BusType::slack) ang_idx.push_back(i);
    if (gc.buses[i].type == BusType::pq) vm_idx.push_back(i);
  }
  const int na = static_cast<int>(ang_idx.size());
  const int nv = static_cast<int>(vm_idx.size());

  std::vector<double> vm(n, 1.0), va(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (gc.buses[i].type != BusType::pq) vm[i] = gc.buses[i].v_setpoint;

  std::vector<double> pcal(n), qcal(n);
  auto calc_injections = [&]() {
    for (int i = 0; i < n; ++i) {
      double p = 0, q = 0;
      for (int k = 0; k < n; ++k) {
        if (G(i, k) == 0.0 && B(i, k) == 0.0) continue;
        const double th = va[i] - va[k];
        const double ct = std::cos(th), st = std::sin(th);
        p += vm[k] * (G(i, k) * ct + B(i, k) * st);
        q += vm[k] * (G(i, k) * st - B(i, k) * ct);
      }
      pcal[i] = vm[i] * p;
      qcal[i] = vm[i] * q;
    }
  };

  double mis = 0;
  int iter = 0;
  for (;; ++iter) {
    calc_injections();
    std::vector<double> f(na + nv);
    for (int a = 0; a < na; ++a) f[a] = p_spec[ang_idx[a]] - pcal[ang_idx[a]];
    for (int v = 0; v < nv; ++v) f[na + v] = q_spec[vm_idx[v]] - qcal[vm_idx[v]];
    mis = norm_inf(f);
    if (mis <= opt.tol) break;
    if (iter >= opt.max_iters) throw PowerflowError("power flow did not converge", mis);

    Mat jac(na + nv, na + nv);
    for (int a = 0; a < na; ++a) {
      const int i = ang_idx[a];
      for (int b = 0; b < na; ++b) {
        const int k = ang_idx[b];
        if (i == k) jac(a, b) = -qcal[i] - B(i, i) * vm[i] * vm[i];
        else {
          const double th = va[i] - va[k];
          jac(a, b) = vm[i] * vm[k] * (G(i, k) * std::sin(th) - B(i, k) * std::cos(th));
        }
      }
      for (int v = 0; v < nv; ++v) {
        const int k = vm_idx[v];
        if (i == k) jac(a, na + v) = pcal[i] / vm[i] + G(i, i) * vm[i];
        else {
          const double th = va[i] - va[k];
          jac(a, na + v) = vm[i] * (G(i, k) * std::cos(th) + B(i, k) * std::sin(th));
        }
      }
    }
    for (int vq = 0; vq < nv; ++vq) {
      const int i = vm_idx[vq];
      for (int b = 0; b < na; ++b) {
        const int k = ang_idx[b];
        if (i == k) jac(na + vq, b) = pcal[i] - G(i, i) * vm[i] * vm[i];
        else {
          const double th = va[i] - va[k];
          jac(na + vq, b) = -vm[i] * vm[k] * (G(i, k) * std::cos(th) + B(i, k) * std::sin(th));
        }
      }
      for (int v = 0; v < nv; ++v) {
        const int k = vm_idx[v];
        if (i == k) jac(na + vq, na + v) = qcal[i] / vm[i] - B(i, i) * vm[i];
        else {
          const double th = va[i] - va[k];
          jac(na + vq, na + v) = vm[i] * (G(i, k) * std::sin(th) - B(i, k) * std::cos(th));
        }
      }
    }
    std::vector<double> dx;
    try {
      dx = lu_solve(jac, f);
    } catch (const std::runtime_error&) {
      throw PowerflowError("singular Jacobian", mis);
    }
    for (int a = 0; a < na; ++a) va[ang_idx[a]] += dx[a];
    for (int v = 0; v < nv; ++v) vm[vm_idx[v]] += dx[na + v];
  }

  calc_injections();
  Snapshot s;
  s.vm = vm;
  s.va = va;
  s.p_inj = pcal;
  s.q_inj = qcal;
  s.pd = pd;
  s.qd = qd;
  s.iterations = iter;
  s.mismatch = mis;
  s.flows.reserve(gc.branches.size());
  for (const auto& br : gc.branches) {
    if (!br.in_service) {
      s.flows.push_back(BranchFlow{});
      continue;
    }
    const int i = gc.bus_pos(br.from), j = gc.bus_pos(br.to);
    s.flows.push_back(branch_flow(br, vm[i], va[i], vm[j], va[j]));
  }
  return s;
}

// Invariants: stored flows reproduce from (v, theta); active-power balance
// against series losses plus shunt conductance.
inline void verify_snapshot(const GridCase& gc, const Snapshot& s, double flow_tol = 1e-10,
                            double balance_tol = 1e-8) {
  double loss = 0;
  for (std::size_t b = 0; b < gc.branches.size(); ++b) {
    const auto& br = gc.branches[b];
    if (!br.in_service) continue;
    const int i = gc.bus_pos(br.from), j = gc.bus_pos(br.to);
    const BranchFlow f = branch_flow(br, s.vm[i], s.va[i], s.vm[j], s.va[j]);
    if (std::abs(f.pf - s.flows[b].pf) > flow_tol || std::abs(f.qf - s.flows[b].qf) > flow_tol ||
        std::abs(f.pt - s.flows[b].pt) > flow_tol || std::abs(f.qt - s.flows[b].qt) > flow_tol)
      throw std::runtime_error("snapshot branch flows inconsistent with (v,theta)");
    loss += f.pf + f.pt;
  }
  double pinj = 0, shunt = 0;
  for (std::size_t i = 0; i < gc.buses.size(); ++i) {
    pinj += s.p_inj[i];
    shunt += gc.buses[i].gs * s.vm[i] * s.vm[i];
  }
  if (std::abs(pinj - shunt - loss) > balance_tol)
    throw std::runtime_error("snapshot power balance violated: " + std::to_string(pinj - shunt - loss));
}

// --------------------------------------------------------------------------
// Monte-Carlo scenario generation
// --------------------------------------------------------------------------
struct ScenarioSpec {
  double lo = 0.95, hi = 1.05;  // multiplicative load factor range
  int count = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lo > 0) || !(hi >= lo)) throw std::invalid_argument("scenario range must satisfy 0 < lo <= hi");
    if (count < 1) throw std::invalid_argument("scenario count must be >= 1");
  }
};

// Each bus gets an independent uniform factor in [lo, hi]; the same factor
// scales Pd and Qd (constant power factor). Non-converged draws are
// discarded and redrawn; more than 10% failures aborts.
inline std::vector<Snapshot> sample_scenarios(const GridCase& gc, const ScenarioSpec& spec,
                                              NrOptions nr = NrOptions()) {
  spec.validate();
  const int n = static_cast<int>(gc.buses.size());
  Rng rng(spec.seed);
  std::vector<Snapshot> out;
  out.reserve(spec.count);
  long failures = 0;
  while (static_cast<int>(out.size()) < spec.count) {
    std::vector<double> pd(n), qd(n);
    for (int i = 0; i < n; ++i) {
      const double f = rng.uniform(spec.lo, spec.hi);
      pd[i] = gc.buses[i].pd * f;
      qd[i] = gc.buses[i].qd * f;
    }
    try {
      out.push_back(solve_powerflow(gc, std::move(pd), std::move(qd), nr));
    } catch (const PowerflowError& e) {
      ++failures;
      if (failures * 10 > spec.count)
        throw std::runtime_error("scenario generation aborted: " + std::to_string(failures) +
                                 " non-converged draws for " + std::to_string(spec.count) +
                                 " requested snapshots; last: " + e.what());
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Feature extraction
// --------------------------------------------------------------------------
struct BranchFlowTarget {
  int from = 0, to = 0;
  bool reactive = false;
};

struct BorderBusTarget {
  int bus = 0;
  bool reactive = false;
  std::vector<int> border_buses;    // includes `bus`
  std::vector<int> internal_buses;  // flow measurement side
  bool svr_inputs = false;          // raw [v_i, v_j, sin, cos] instead of the
                                    // composite linear-model regressors
};

struct RawDataset {
  Mat values;  // m x (p+1), target last
  std::vector<std::string> names;
};

inline int find_branch(const GridCase& gc, int from, int to) {
  for (std::size_t b = 0; b < gc.branches.size(); ++b)
    if (gc.branches[b].from == from && gc.branches[b].to == to && gc.branches[b].in_service)
      return static_cast<int>(b);
  throw std::invalid_argument("target branch " + std::to_string(from) + "-" + std::to_string(to) +
                              " not in case");
}

inline RawDataset extract_features(const GridCase& gc, const std::vector<Snapshot>& snaps,
                                   const BranchFlowTarget& t) {
  const int b = find_branch(gc, t.from, t.to);
  const int i = gc.bus_pos(t.from), j = gc.bus_pos(t.to);
  RawDataset d;
  d.names = {"vi2", "vj2", "theta_i", "theta_j", std::string(t.reactive ? "Q" : "P") + "_" +
             std::to_string(t.from) + "_" + std::to_string(t.to)};
  d.values = Mat(static_cast<int>(snaps.size()), 5);
  for (std::size_t s = 0; s < snaps.size(); ++s) {
    const auto& sn = snaps[s];
    d.values(s, 0) = sn.vm[i] * sn.vm[i];
    d.values(s, 1) = sn.vm[j] * sn.vm[j];
    d.values(s, 2) = sn.va[i];
    d.values(s, 3) = sn.va[j];
    d.values(s, 4) = t.reactive ? sn.flows[b].qf : sn.flows[b].pf;
  }
  return d;
}

// Net flow from a border bus into the internal region.
inline double border_injection(const GridCase& gc, const Snapshot& sn, int bus, bool reactive,
                               const std::vector<int>& internal) {
  auto is_internal = [&](int id) {
    for (int v : internal)
      if (v == id) return true;
    return false;
  };
  double acc = 0;
  for (std::size_t b = 0; b < gc.branches.size(); ++b) {
    const auto& br = gc.branches[b];
    if (!br.in_service) continue;
    if (br.from == bus && is_internal(br.to)) acc += reactive ? sn.flows[b].qf : sn.flows[b].pf;
    else if (br.to == bus && is_internal(br.from)) acc += reactive ? sn.flows[b].qt : sn.flows[b].pt;
  }
  return acc;
}

inline RawDataset extract_features(const GridCase& gc, const std::vector<Snapshot>& snaps,
                                   const BorderBusTarget& t) {
  bool bus_in_border = false;
  for (int b : t.border_buses) bus_in_border |= (b == t.bus);
  if (!bus_in_border) throw std::invalid_argument("target bus not in border set");
  const int i = gc.bus_pos(t.bus);
  std::vector<int> others;
  for (int b : t.border_buses)
    if (b != t.bus) others.push_back(b);

  RawDataset d;
  const std::string tgt = std::string(t.reactive ? "Q" : "P") + "_b" + std::to_string(t.bus);
  if (t.svr_inputs) {
    d.names.push_back("v_" + std::to_string(t.bus));
    for (int b : others) d.names.push_back("v_" + std::to_string(b));
    for (int b : others) d.names.push_back("sin_th_" + std::to_string(t.bus) + "_" + std::to_string(b));
    for (int b : others) d.names.push_back("cos_th_" + std::to_string(t.bus) + "_" + std::to_string(b));
  } else {
    for (int b : others) {
      d.names.push_back("vv_cos_" + std::to_string(b));  // vi^2 - vi vj cos
      d.names.push_back("vv_sin_" + std::to_string(b));  // vi vj sin
    }
    d.names.push_back("vi2");
    d.names.push_back("vi");
  }
  d.names.push_back(tgt);

  const int p = static_cast<int>(d.names.size()) - 1;
  d.values = Mat(static_cast<int>(snaps.size()), p + 1);
  for (std::size_t s = 0; s < snaps.size(); ++s) {
    const auto& sn = snaps[s];
    const double vi = sn.vm[i], thi = sn.va[i];
    int c = 0;
    if (t.svr_inputs) {
      d.values(s, c++) = vi;
      for (int b : others) d.values(s, c++) = sn.vm[gc.bus_pos(b)];
      for (int b : others) d.values(s, c++) = std::sin(thi - sn.va[gc.bus_pos(b)]);
      for (int b : others) d.values(s, c++) = std::cos(thi - sn.va[gc.bus_pos(b)]);
    } else {
      for (int b : others) {
        const int jj = gc.bus_pos(b);
        const double vj = sn.vm[jj], th = thi - sn.va[jj];
        d.values(s, c++) = vi * vi - vi * vj * std::cos(th);
        d.values(s, c++) = vi * vj * std::sin(th);
      }
      d.values(s, c++) = vi * vi;
      d.values(s, c++) = vi;
    }
    d.values(s, c) = border_injection(gc, sn, t.bus, t.reactive, t.internal_buses);
  }
  return d;
}

}  // namespace mrc::powerflow
