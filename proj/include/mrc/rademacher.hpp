// rademacher.hpp
//
// Empirical Rademacher complexity of a (constrained) hypothesis class under
// an MAE budget: draw n sign vectors, solve one sup problem per vector,
// average the per-sigma suprema divided by m.
//
// The sup problem encoding follows the big-M mixed-integer form: auxiliary
// deviation splits d+ >= 0, d- >= 0 with h(x_i) - f(x_i) = d+_i - d-_i,
// complementarity binaries only at sigma = +1 samples, the linear budget
// row sum(d+ + d-) <= m*e, and the physics rows p(h) <= 0. M = m*e is valid
// because no single deviation can exceed the budget; per-sample M is
// tightened further when the parameter box bounds the residual range.
//
// Two interchangeable certified engines solve the linear-class problem: the
// MILP branch & bound and the spatial solver in supspatial.hpp. They are
// cross-checked in the tests; dispatch is by problem size. SVR-class
// problems (dual-variable hypothesis with the epsilon-sensitivity
// structure) always go through the MILP route.

#pragma once

#include <cmath>
#include <chrono>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "mrc/case_io.hpp"
#include "mrc/hypothesis.hpp"
#include "mrc/knowledge.hpp"
#include "mrc/optim.hpp"
#include "mrc/rng.hpp"
#include "mrc/supspatial.hpp"

namespace mrc::rademacher {

using case_io::Dataset;
using knowledge::ConstraintSet;

inline std::vector<std::vector<int>> draw_sigmas(int m, int n, std::uint64_t seed, bool antithetic = false) {
  Rng rng(seed);
  std::vector<std::vector<int>> out;
  out.reserve(n);
  for (int j = 0; j < n; ++j) {
    if (antithetic && (j & 1)) {
      std::vector<int> s = out.back();
      for (auto& v : s) v = -v;
      out.push_back(std::move(s));
      continue;
    }
    std::vector<int> s(m);
    for (int i = 0; i < m; ++i) s[i] = rng.rademacher();
    out.push_back(std::move(s));
  }
  return out;
}

struct LinearClassSpec {};

struct SvrClassSpec {
  double C = 0.2;
  double eps = 0.01;
  double kernel_c = 1.0;
};

using ClassSpec = std::variant<LinearClassSpec, SvrClassSpec>;

// --------------------------------------------------------------------------
// Sup problem construction
// --------------------------------------------------------------------------
struct SupProblem {
  optim::MilpInstance inst;
  int m = 0;
  int n_params = 0;
  int off_params = 0, off_dpos = 0, off_dneg = 0;
  std::vector<int> u_of_sample;  // sample -> complementarity binary, -1 if sigma=-1
  int budget_row = -1;
  double budget = 0.0, big_m = 0.0;
  std::vector<int> sigma;
};

namespace detail {

// residual range of sample i over the parameter box; +inf if unbounded
inline double residual_cap(const Dataset& d, int i, const std::vector<double>& plb,
                           const std::vector<double>& pub) {
  const int p = d.p();
  double lo = 0, hi = 0;
  for (int j = 0; j <= p; ++j) {
    const double c = j < p ? d.x(i, j) : 1.0;
    const double bl = plb[j], bh = pub[j];
    if (!std::isfinite(bl) || !std::isfinite(bh)) return knowledge::kInf;
    if (c >= 0) {
      lo += c * bl;
      hi += c * bh;
    } else {
      lo += c * bh;
      hi += c * bl;
    }
  }
  lo -= d.y[i];
  hi -= d.y[i];
  return std::max(std::abs(lo), std::abs(hi));
}

}  // namespace detail

// Linear class: parameters [w_0..w_{p-1}, intercept]; constant feature
// columns are pinned to zero weight.
inline SupProblem build_sup(const Dataset& d, const std::vector<int>& sigma, const ConstraintSet& cs,
                            double e) {
  if (e < 0) throw std::invalid_argument("build_sup: budget e must be nonnegative");
  if (static_cast<int>(sigma.size()) != d.m) throw std::invalid_argument("build_sup: sigma length mismatch");
  if (cs.svr) throw std::invalid_argument("build_sup: linear builder got an SVR structure set");
  const int m = d.m;
  const int p = d.p();
  const double me = m * e;

  SupProblem sp;
  sp.m = m;
  sp.n_params = p + 1;
  sp.sigma = sigma;
  sp.budget = me;
  sp.big_m = me;

  std::vector<double> plb(p + 1, -knowledge::kInf), pub(p + 1, knowledge::kInf);
  if (!cs.param_lb.empty()) {
    if (static_cast<int>(cs.param_lb.size()) != p + 1)
      throw std::invalid_argument("constraint box dimension mismatch with hypothesis class");
    plb = cs.param_lb;
    pub = cs.param_ub;
  }
  for (int j = 0; j < p; ++j)
    if (d.norm[j].constant) {
      plb[j] = 0.0;
      pub[j] = 0.0;
    }

  auto& inst = sp.inst;
  sp.off_params = 0;
  for (int j = 0; j <= p; ++j)
    inst.add_var(plb[j], pub[j], 0.0, j < p ? "w" + std::to_string(j) : "c");
  sp.off_dpos = inst.num_vars();
  for (int i = 0; i < m; ++i) inst.add_var(0.0, me, sigma[i], "dp" + std::to_string(i));
  sp.off_dneg = inst.num_vars();
  for (int i = 0; i < m; ++i) inst.add_var(0.0, me, sigma[i], "dn" + std::to_string(i));

  // residual identities: h(x_i) - d+_i + d-_i = y_i
  for (int i = 0; i < m; ++i) {
    std::vector<optim::RowTerm> terms;
    for (int j = 0; j < p; ++j)
      if (d.x(i, j) != 0.0 && !d.norm[j].constant) terms.push_back({sp.off_params + j, d.x(i, j)});
    terms.push_back({sp.off_params + p, 1.0});
    terms.push_back({sp.off_dpos + i, -1.0});
    terms.push_back({sp.off_dneg + i, 1.0});
    inst.add_row_eq(std::move(terms), d.y[i]);
  }
  // budget
  {
    std::vector<optim::RowTerm> terms;
    for (int i = 0; i < m; ++i) {
      terms.push_back({sp.off_dpos + i, 1.0});
      terms.push_back({sp.off_dneg + i, 1.0});
    }
    sp.budget_row = inst.add_row_le(std::move(terms), me);
  }
  // complementarity binaries at sigma = +1 samples
  sp.u_of_sample.assign(m, -1);
  for (int i = 0; i < m; ++i) {
    if (sigma[i] < 0) continue;
    double mi = std::min(me, detail::residual_cap(d, i, plb, pub));
    const int u = inst.add_var(0.0, 1.0, 0.0, "u" + std::to_string(i));
    inst.set_binary(u);
    sp.u_of_sample[i] = u;
    inst.add_row_le({{sp.off_dpos + i, 1.0}, {u, -mi}}, 0.0);
    inst.add_row_le({{sp.off_dneg + i, 1.0}, {u, mi}}, mi);
    inst.ub[sp.off_dpos + i] = std::min(inst.ub[sp.off_dpos + i], mi);
    inst.ub[sp.off_dneg + i] = std::min(inst.ub[sp.off_dneg + i], mi);
  }
  // physics rows
  for (const auto& r : cs.rows) {
    if (static_cast<int>(r.a.size()) != p + 1)
      throw std::invalid_argument("constraint row dimension mismatch with hypothesis class");
    std::vector<optim::RowTerm> terms;
    for (int j = 0; j <= p; ++j)
      if (r.a[j] != 0.0) terms.push_back({sp.off_params + j, r.a[j]});
    inst.add_row_le(std::move(terms), r.ub);
  }
  return sp;
}

// SVR class: parameters are the duals (alpha+, alpha- in [0, C]) and the
// free bias. Kernel Gram entries are constants; support inputs are the
// training inputs. The sensitivity structure gates each dual by a binary
// tied to the matching deviation split: with h - f = d+ - d-, the dual
// alpha+ (active when f - h > eps) pairs with d-, and alpha- with d+.
inline SupProblem build_sup_svr(const Dataset& d, const SvrClassSpec& svr, const std::vector<int>& sigma,
                                const ConstraintSet& cs, double e) {
  if (e < 0) throw std::invalid_argument("build_sup_svr: budget e must be nonnegative");
  if (!cs.svr) throw std::invalid_argument("build_sup_svr: constraint set lacks the SVR structure");
  const int m = d.m;
  const int p = d.p();
  const double me = m * e;
  const double C = cs.svr->C, eps = cs.svr->eps;
  const double M = cs.svr->big_m > 0 ? cs.svr->big_m : me;

  Mat K(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) {
      const double v = hypothesis::poly2_kernel(d.x.row(i), d.x.row(j), p, svr.kernel_c);
      K(i, j) = v;
      K(j, i) = v;
    }

  SupProblem sp;
  sp.m = m;
  sp.n_params = 2 * m + 1;
  sp.sigma = sigma;
  sp.budget = me;
  sp.big_m = M;
  auto& inst = sp.inst;

  sp.off_params = 0;
  for (int k = 0; k < m; ++k) inst.add_var(0.0, C, 0.0, "ap" + std::to_string(k));
  for (int k = 0; k < m; ++k) inst.add_var(0.0, C, 0.0, "am" + std::to_string(k));
  const int bias = inst.add_var(-knowledge::kInf, knowledge::kInf, 0.0, "b");
  sp.off_dpos = inst.num_vars();
  for (int i = 0; i < m; ++i) inst.add_var(0.0, me, sigma[i], "dp" + std::to_string(i));
  sp.off_dneg = inst.num_vars();
  for (int i = 0; i < m; ++i) inst.add_var(0.0, me, sigma[i], "dn" + std::to_string(i));

  for (int i = 0; i < m; ++i) {
    std::vector<optim::RowTerm> terms;
    for (int k = 0; k < m; ++k) {
      const double kv = K(k, i);
      if (kv == 0.0) continue;
      terms.push_back({k, kv});
      terms.push_back({m + k, -kv});
    }
    terms.push_back({bias, 1.0});
    terms.push_back({sp.off_dpos + i, -1.0});
    terms.push_back({sp.off_dneg + i, 1.0});
    inst.add_row_eq(std::move(terms), d.y[i]);
  }
  {
    std::vector<optim::RowTerm> terms;
    for (int i = 0; i < m; ++i) {
      terms.push_back({sp.off_dpos + i, 1.0});
      terms.push_back({sp.off_dneg + i, 1.0});
    }
    sp.budget_row = inst.add_row_le(std::move(terms), me);
  }
  sp.u_of_sample.assign(m, -1);
  for (int i = 0; i < m; ++i) {
    if (sigma[i] < 0) continue;
    const int u = inst.add_var(0.0, 1.0, 0.0, "u" + std::to_string(i));
    inst.set_binary(u);
    sp.u_of_sample[i] = u;
    inst.add_row_le({{sp.off_dpos + i, 1.0}, {u, -me}}, 0.0);
    inst.add_row_le({{sp.off_dneg + i, 1.0}, {u, me}}, me);
  }
  // sensitivity structure, sharp big-M form: for each sample,
  //   eps*g <= d <= eps + (M-eps)*g, dual <= C*g
  for (int i = 0; i < m; ++i) {
    const int gp = inst.add_var(0.0, 1.0, 0.0, "gp" + std::to_string(i));  // gates d+ (alpha- side)
    inst.set_binary(gp);
    inst.add_row_le({{sp.off_dpos + i, 1.0}, {gp, -(M - eps)}}, eps);
    inst.add_row_le({{sp.off_dpos + i, -1.0}, {gp, eps}}, 0.0);
    inst.add_row_le({{m + i, 1.0}, {gp, -C}}, 0.0);
    const int gn = inst.add_var(0.0, 1.0, 0.0, "gn" + std::to_string(i));  // gates d- (alpha+ side)
    inst.set_binary(gn);
    inst.add_row_le({{sp.off_dneg + i, 1.0}, {gn, -(M - eps)}}, eps);
    inst.add_row_le({{sp.off_dneg + i, -1.0}, {gn, eps}}, 0.0);
    inst.add_row_le({{i, 1.0}, {gn, -C}}, 0.0);
    if (sigma[i] > 0) {
      // complementarity links: one side of the split is zero
      inst.add_row_le({{gp, 1.0}, {sp.u_of_sample[i], -1.0}}, 0.0);
      inst.add_row_le({{gn, 1.0}, {sp.u_of_sample[i], 1.0}}, 1.0);
    }
  }
  return sp;
}

// --------------------------------------------------------------------------
// Single-sigma sup solves
// --------------------------------------------------------------------------
struct SupOutcome {
  double value = 0.0;   // certified upper bound on the sup (== optimum within gap)
  double lower = 0.0;   // best achievable value found
  double gap = 0.0;     // value - lower
  bool certified = false;  // gap within the requested target
  long nodes = 0;
  double millis = 0.0;
  std::string engine;
};

struct SupSolveOptions {
  double target_gap = 1e-7;  // certified relative gap of each sup value
  long milp_node_limit = 500'000;
  long milp_simplex_iters = 2'000'000;
  int milp_max_binaries = 8192;
  double spatial_seconds = 900.0;
  long spatial_nodes = 4'000'000;
  double time_limit_seconds = 0.0;  // 0 = engine defaults
};

inline SupOutcome solve_sup_milp(const Dataset& d, const SupProblem& sp, const SupSolveOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  optim::MilpOptions mo;
  mo.node_limit = opt.milp_node_limit;
  mo.max_binaries = opt.milp_max_binaries;
  mo.gap_rel = opt.target_gap;
  mo.simplex.max_iters = opt.milp_simplex_iters;
  const int p = d.p();
  const bool linear_class = sp.n_params == p + 1;
  if (linear_class) {
    // rounding heuristic: evaluate the LP's parameter point exactly
    mo.rounding = [&d, &sp, p](const std::vector<double>& z) -> std::optional<std::vector<double>> {
      std::vector<double> out = z;
      double wsum = 0;
      std::vector<double> r(sp.m);
      for (int i = 0; i < sp.m; ++i) {
        double h = z[sp.off_params + p];
        for (int j = 0; j < p; ++j) h += z[sp.off_params + j] * d.x(i, j);
        r[i] = h - d.y[i];
        wsum += std::abs(r[i]);
      }
      if (wsum > sp.budget * (1 + 1e-12)) return std::nullopt;
      for (int i = 0; i < sp.m; ++i) {
        out[sp.off_dpos + i] = std::max(r[i], 0.0);
        out[sp.off_dneg + i] = std::max(-r[i], 0.0);
        if (sp.u_of_sample[i] >= 0) out[sp.u_of_sample[i]] = r[i] >= 0 ? 1.0 : 0.0;
      }
      return out;
    };
  }
  auto sol = optim::solve_milp(sp.inst, mo);
  SupOutcome oc;
  oc.engine = "milp";
  oc.nodes = sol.nodes;
  oc.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (sol.status == optim::SolveStatus::optimal || sol.status == optim::SolveStatus::node_limit) {
    oc.lower = sol.objective;
    oc.value = sol.best_bound;
    oc.gap = oc.value - oc.lower;
    oc.certified = oc.gap <= opt.target_gap * std::max(1.0, std::abs(oc.lower)) + 1e-12;
  } else if (sol.status == optim::SolveStatus::infeasible) {
    throw std::runtime_error(
        "sup problem infeasible: the MAE budget is below the class's minimum achievable MAE");
  } else {
    throw std::runtime_error("sup problem unbounded; budget row missing?");
  }
  return oc;
}

inline SupOutcome solve_sup_spatial(const Dataset& d, const std::vector<int>& sigma, const ConstraintSet& cs,
                                    double e, const SupSolveOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const int m = d.m, p = d.p();
  supspatial::Problem prob;
  prob.z = Mat(m, p + 1);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < p; ++j) prob.z(i, j) = d.norm[j].constant ? 0.0 : d.x(i, j);
    prob.z(i, p) = 1.0;
  }
  prob.y = d.y;
  prob.sigma = sigma;
  prob.budget = m * e;
  prob.lb.assign(p + 1, -knowledge::kInf);
  prob.ub.assign(p + 1, knowledge::kInf);
  if (!cs.param_lb.empty()) {
    prob.lb = cs.param_lb;
    prob.ub = cs.param_ub;
  }
  for (int j = 0; j < p; ++j)
    if (d.norm[j].constant) {
      prob.lb[j] = 0.0;
      prob.ub[j] = 0.0;
    }
  prob.rows = cs.rows;

  supspatial::Options so;
  so.rel_gap = opt.target_gap;
  so.max_seconds = opt.time_limit_seconds > 0 ? opt.time_limit_seconds : opt.spatial_seconds;
  so.max_nodes = opt.spatial_nodes;
  auto res = supspatial::solve(std::move(prob), so);
  SupOutcome oc;
  oc.engine = "spatial";
  oc.nodes = res.nodes;
  oc.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!res.feasible)
    throw std::runtime_error(
        "sup problem infeasible: the MAE budget is below the class's minimum achievable MAE");
  oc.lower = res.value;
  oc.value = res.upper;
  oc.gap = oc.value - oc.lower;
  oc.certified = res.certified;
  return oc;
}

// --------------------------------------------------------------------------
// ERC estimation
// --------------------------------------------------------------------------
struct ErcOptions {
  enum class Engine { automatic, milp, spatial };
  Engine engine = Engine::automatic;
  SupSolveOptions sup;
  int threads = 0;  // 0 = hardware_concurrency
  bool antithetic = false;
  int milp_size_cutoff = 16;  // automatic: linear classes above this m go spatial
  bool allow_uncertified = false;
};

struct ErcResult {
  double erc = 0.0;
  std::vector<double> sup_values;   // per sigma, the raw MILP objective
  std::vector<SupOutcome> diag;
  bool certified = true;
};

inline ErcResult estimate_erc_with_sigmas(const Dataset& d, const ClassSpec& cls, const ConstraintSet& cs,
                                          double e, const std::vector<std::vector<int>>& sigmas,
                                          const ErcOptions& opt = ErcOptions());

inline ErcResult estimate_erc(const Dataset& d, const ClassSpec& cls, const ConstraintSet& cs, double e,
                              int n, std::uint64_t seed, const ErcOptions& opt = ErcOptions()) {
  if (n < 1) throw std::invalid_argument("estimate_erc: n >= 1 required");
  const auto sigmas = draw_sigmas(d.m, n, derive_seed(seed, "sigma"), opt.antithetic);
  return estimate_erc_with_sigmas(d, cls, cs, e, sigmas, opt);
}

inline ErcResult estimate_erc_with_sigmas(const Dataset& d, const ClassSpec& cls, const ConstraintSet& cs,
                                          double e, const std::vector<std::vector<int>>& sigmas,
                                          const ErcOptions& opt) {
  const int n = static_cast<int>(sigmas.size());
  const bool is_linear = std::holds_alternative<LinearClassSpec>(cls);

  auto solve_one = [&](int j) -> SupOutcome {
    const auto& sigma = sigmas[j];
    if (is_linear) {
      const bool use_milp = opt.engine == ErcOptions::Engine::milp ||
                            (opt.engine == ErcOptions::Engine::automatic && d.m <= opt.milp_size_cutoff);
      if (use_milp) {
        SupProblem sp = build_sup(d, sigma, cs, e);
        return solve_sup_milp(d, sp, opt.sup);
      }
      return solve_sup_spatial(d, sigma, cs, e, opt.sup);
    }
    const auto& svr = std::get<SvrClassSpec>(cls);
    ConstraintSet cs2 = cs;
    if (!cs2.svr) cs2.svr = knowledge::SvrStructure{svr.C, svr.eps, 0.0};
    SupProblem sp = build_sup_svr(d, svr, sigma, cs2, e);
    return solve_sup_milp(d, sp, opt.sup);
  };

  std::vector<SupOutcome> outcomes(n);
  int threads = opt.threads > 0 ? opt.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int j = 0; j < n; ++j) outcomes[j] = solve_one(j);
  } else {
    std::vector<std::future<SupOutcome>> futs;
    futs.reserve(n);
    // simple bounded fan-out: launch all, asyncs queue on the pool
    for (int j = 0; j < n; ++j) futs.push_back(std::async(std::launch::async | std::launch::deferred,
                                                          [&solve_one, j] { return solve_one(j); }));
    for (int j = 0; j < n; ++j) outcomes[j] = futs[j].get();
  }

  ErcResult res;
  res.diag = outcomes;
  res.sup_values.resize(n);
  double acc = 0;
  for (int j = 0; j < n; ++j) {
    res.sup_values[j] = outcomes[j].value;
    res.certified = res.certified && outcomes[j].certified;
    acc += outcomes[j].value / d.m;
  }
  if (!res.certified && !opt.allow_uncertified)
    throw std::runtime_error("estimate_erc: a sup solve exceeded its effort limit without certification");
  res.erc = acc / n;
  return res;
}

}  // namespace mrc::rademacher
