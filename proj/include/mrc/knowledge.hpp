// knowledge.hpp
//
// Physical-knowledge constraint sets over hypothesis parameters: linear
// inequalities a.params <= ub, per-parameter boxes, and the SVR dual
// structure template. Sets compose by intersection and are checked for
// feasibility at construction (one LP).
//
// Linear-model parameter vectors are laid out [w_0..w_{p-1}, intercept] in
// the dataset's normalized feature space. Constraints stated in physical
// units are mapped through the normalization affinity before use.

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrc/case_io.hpp"
#include "mrc/optim.hpp"

namespace mrc::knowledge {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinRow {
  std::vector<double> a;  // over parameter vector
  double ub = 0.0;
};

struct SvrStructure {
  double C = 0.2;
  double eps = 0.01;
  double big_m = 0.0;  // 0 = derive from the budget (m*e)
};

struct ConstraintSet {
  int dim = 0;  // linear-class parameter count; 0 = class-agnostic
  std::vector<LinRow> rows;
  std::vector<double> param_lb, param_ub;  // per-parameter box, +-inf allowed
  std::optional<SvrStructure> svr;
  std::string description = "none";

  bool vacuous() const { return rows.empty() && param_lb.empty() && !svr; }

  void ensure_dim(int d) {
    if (dim == 0) dim = d;
    if (dim != d) throw std::invalid_argument("constraint set dimension mismatch");
    if (param_lb.empty()) {
      param_lb.assign(dim, -kInf);
      param_ub.assign(dim, kInf);
    }
  }

  // one LP feasibility solve; throws on infeasible or malformed rows
  void check_feasible() const {
    if (dim == 0) return;
    optim::MilpInstance inst;
    for (int j = 0; j < dim; ++j)
      inst.add_var(param_lb.empty() ? -kInf : param_lb[j], param_ub.empty() ? kInf : param_ub[j], 0.0);
    for (const auto& r : rows) {
      if (static_cast<int>(r.a.size()) != dim)
        throw std::invalid_argument("constraint row references parameters outside the class");
      std::vector<optim::RowTerm> terms;
      for (int j = 0; j < dim; ++j)
        if (r.a[j] != 0.0) terms.push_back({j, r.a[j]});
      inst.add_row_le(std::move(terms), r.ub);
    }
    auto sol = optim::solve_lp(inst);
    if (sol.status == optim::SolveStatus::infeasible)
      throw std::invalid_argument("infeasible constraint set: " + description);
  }
};

inline ConstraintSet none() { return ConstraintSet{}; }

// -delta <= params[idx_i] + params[idx_j] <= delta
inline ConstraintSet angle_constraint(int dim, int idx_i, int idx_j, double delta) {
  if (delta < 0) throw std::invalid_argument("angle constraint needs delta >= 0");
  if (idx_i < 0 || idx_j < 0 || idx_i >= dim || idx_j >= dim)
    throw std::invalid_argument("angle constraint indices outside parameter vector");
  ConstraintSet cs;
  cs.ensure_dim(dim);
  LinRow up;
  up.a.assign(dim, 0.0);
  up.a[idx_i] = 1.0;
  up.a[idx_j] = 1.0;
  up.ub = delta;
  LinRow dn = up;
  for (auto& v : dn.a) v = -v;
  dn.ub = delta;
  cs.rows = {up, dn};
  cs.description = "angle(" + std::to_string(delta) + ")";
  cs.check_feasible();
  return cs;
}

inline ConstraintSet box_constraint(std::vector<double> lb, std::vector<double> ub) {
  if (lb.size() != ub.size()) throw std::invalid_argument("box bounds size mismatch");
  for (std::size_t j = 0; j < lb.size(); ++j)
    if (lb[j] > ub[j]) throw std::invalid_argument("crossed box bounds at parameter " + std::to_string(j));
  ConstraintSet cs;
  cs.dim = static_cast<int>(lb.size());
  cs.param_lb = std::move(lb);
  cs.param_ub = std::move(ub);
  cs.description = "box";
  cs.check_feasible();
  return cs;
}

inline ConstraintSet svr_structure(double C, double eps, double big_m = 0.0) {
  if (!(C > 0)) throw std::invalid_argument("svr structure needs C > 0");
  if (eps < 0) throw std::invalid_argument("svr structure needs eps >= 0");
  if (big_m < 0) throw std::invalid_argument("svr structure needs M >= 0");
  ConstraintSet cs;
  cs.svr = SvrStructure{C, eps, big_m};
  cs.description = "svr(C=" + std::to_string(C) + ",eps=" + std::to_string(eps) + ")";
  return cs;
}

inline ConstraintSet intersect(const ConstraintSet& a, const ConstraintSet& b) {
  ConstraintSet cs;
  cs.dim = std::max(a.dim, b.dim);
  if (a.dim && b.dim && a.dim != b.dim) throw std::invalid_argument("intersect: dimension mismatch");
  auto merge_box = [&](const ConstraintSet& s) {
    if (s.param_lb.empty()) return;
    if (cs.param_lb.empty()) {
      cs.param_lb.assign(cs.dim, -kInf);
      cs.param_ub.assign(cs.dim, kInf);
    }
    for (int j = 0; j < cs.dim; ++j) {
      cs.param_lb[j] = std::max(cs.param_lb[j], s.param_lb[j]);
      cs.param_ub[j] = std::min(cs.param_ub[j], s.param_ub[j]);
    }
  };
  merge_box(a);
  merge_box(b);
  cs.rows = a.rows;
  cs.rows.insert(cs.rows.end(), b.rows.begin(), b.rows.end());
  if (a.svr && b.svr) throw std::invalid_argument("intersect: duplicate svr structure");
  cs.svr = a.svr ? a.svr : b.svr;
  cs.description = a.description + "+" + b.description;
  if (cs.dim) {
    if (cs.param_lb.empty()) {
      cs.param_lb.assign(cs.dim, -kInf);
      cs.param_ub.assign(cs.dim, kInf);
    }
    cs.check_feasible();
  }
  return cs;
}

// --------------------------------------------------------------------------
// Physical <-> normalized parameter mapping.
//
// A physical linear model h(x_raw) = sum wp_k x_raw_k + cp corresponds to
// normalized parameters wn_k = wp_k * xr_k / yr and
// cn = (sum wp_k xmin_k + cp - ymin)/yr. A physical row a.wp + ac*cp <= ub
// therefore becomes a linear row over (wn, cn).
// --------------------------------------------------------------------------
inline LinRow phys_row_to_norm(const std::vector<double>& a_phys, double a_intercept, double ub,
                               const case_io::Dataset& d) {
  const int p = d.p();
  if (static_cast<int>(a_phys.size()) != p) throw std::invalid_argument("phys row size mismatch");
  const auto& tn = d.norm.back();
  const double yr = tn.constant ? 1.0 : (tn.max - tn.min);
  LinRow r;
  r.a.assign(p + 1, 0.0);
  double rhs = ub - a_intercept * tn.min;
  for (int k = 0; k < p; ++k) {
    const auto& cn = d.norm[k];
    if (cn.constant) {
      // constant feature folds into the physical intercept
      rhs -= a_phys[k] * cn.min * 0.0;  // wp_k is pinned to zero downstream
      continue;
    }
    const double xr = cn.max - cn.min;
    r.a[k] += a_phys[k] * yr / xr;
    r.a[k] -= a_intercept * yr * cn.min / xr;
  }
  r.a[p] = a_intercept * yr;
  r.ub = rhs;
  return r;
}

// box stated on physical parameters -> rows on normalized parameters
inline ConstraintSet phys_box_to_norm(const std::vector<double>& lb, const std::vector<double>& ub,
                                      const case_io::Dataset& d, const std::string& desc = "box") {
  const int p = d.p();
  if (static_cast<int>(lb.size()) != p + 1 || static_cast<int>(ub.size()) != p + 1)
    throw std::invalid_argument("physical box needs p+1 entries (weights + intercept)");
  ConstraintSet cs;
  cs.ensure_dim(p + 1);
  for (int k = 0; k <= p; ++k) {
    if (lb[k] > ub[k]) throw std::invalid_argument("crossed physical box bounds");
    std::vector<double> row(p, 0.0);
    double ai = 0.0;
    if (k < p) {
      if (d.norm[k].constant) continue;  // pinned weight; no constraint needed
      row[k] = 1.0;
    } else {
      ai = 1.0;
    }
    if (std::isfinite(ub[k])) cs.rows.push_back(phys_row_to_norm(row, ai, ub[k], d));
    if (std::isfinite(lb[k])) {
      std::vector<double> neg(p, 0.0);
      for (int j = 0; j < p; ++j) neg[j] = -row[j];
      cs.rows.push_back(phys_row_to_norm(neg, -ai, -lb[k], d));
    }
  }
  cs.description = desc;
  cs.check_feasible();
  return cs;
}

// --------------------------------------------------------------------------
// Branch-flow box recipe: first-order sensitivities of the branch flow
// equation with respect to the regressors (vi^2, vj^2, theta_i, theta_j),
// scanned over a declared operating box, widened by a relative margin.
// Returns bounds in physical units; callers map them with phys_box_to_norm.
// --------------------------------------------------------------------------
struct OperatingBox {
  double v_lo = 0.94, v_hi = 1.06;
  double theta_max = 0.35;  // rad, |theta_i - theta_j|
  double margin = 0.15;     // relative widening
};

struct PhysBox {
  std::vector<double> lb, ub;  // weights then intercept
};

inline PhysBox branch_flow_box(double g, double b, bool reactive, const OperatingBox& ob = OperatingBox()) {
  const int nv = 7, nt = 21;
  std::vector<double> s1, s2, s3, c0;
  for (int iv = 0; iv < nv; ++iv)
    for (int jv = 0; jv < nv; ++jv)
      for (int it = 0; it < nt; ++it) {
        const double vi = ob.v_lo + (ob.v_hi - ob.v_lo) * iv / (nv - 1);
        const double vj = ob.v_lo + (ob.v_hi - ob.v_lo) * jv / (nv - 1);
        const double th = -ob.theta_max + 2 * ob.theta_max * it / (nt - 1);
        const double ct = std::cos(th), st = std::sin(th);
        double dvi, dvj, dth, val;
        if (!reactive) {
          val = g * (vi * vi - vi * vj * ct) - b * vi * vj * st;
          dvi = g * (2 * vi - vj * ct) - b * vj * st;
          dvj = -g * vi * ct - b * vi * st;
          dth = g * vi * vj * st - b * vi * vj * ct;
        } else {
          val = -b * (vi * vi - vi * vj * ct) - g * vi * vj * st;
          dvi = -b * (2 * vi - vj * ct) - g * vj * st;
          dvj = b * vi * ct - g * vi * st;
          dth = -b * vi * vj * st - g * vi * vj * ct;
        }
        const double a1 = dvi / (2 * vi);
        const double a2 = dvj / (2 * vj);
        s1.push_back(a1);
        s2.push_back(a2);
        s3.push_back(dth);
        // intercept consistent with theta_j = 0, theta_i = th
        c0.push_back(val - a1 * vi * vi - a2 * vj * vj - dth * th);
      }
  auto span = [&](const std::vector<double>& v, double& lo, double& hi) {
    lo = v[0];
    hi = v[0];
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    const double w = std::max(hi - lo, 1e-6 * std::max(std::abs(hi), std::abs(lo)));
    lo -= ob.margin * w;
    hi += ob.margin * w;
  };
  PhysBox box;
  box.lb.resize(5);
  box.ub.resize(5);
  span(s1, box.lb[0], box.ub[0]);
  span(s2, box.lb[1], box.ub[1]);
  span(s3, box.lb[2], box.ub[2]);
  box.lb[3] = -box.ub[2];  // theta_j coefficient mirrors theta_i
  box.ub[3] = -box.lb[2];
  span(c0, box.lb[4], box.ub[4]);
  return box;
}

// Generic external-equivalent box: admittance-scale bounds for the
// composite-feature weights, load-scale bounds for the voltage terms.
// Deliberately generous; it is configuration data, not a derivation.
inline PhysBox external_box(const case_io::GridCase& gc, int p_features) {
  double ymax = 0.0, load = 0.0;
  for (const auto& br : gc.branches) {
    if (!br.in_service) continue;
    ymax = std::max(ymax, std::hypot(br.series_g(), br.series_b()));
  }
  for (const auto& b : gc.buses) load += std::abs(b.pd) + std::abs(b.qd);
  const double K = 2.0 * ymax;
  const double S = 2.0 * load;
  PhysBox box;
  box.lb.assign(p_features + 1, -K);
  box.ub.assign(p_features + 1, K);
  // the v and intercept terms absorb aggregated load, not admittance
  box.lb[p_features - 1] = -S;
  box.ub[p_features - 1] = S;
  box.lb[p_features] = -S;
  box.ub[p_features] = S;
  return box;
}

}  // namespace mrc::knowledge
