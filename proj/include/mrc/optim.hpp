// optim.hpp
//
// Self-contained LP / MILP backend.
//
// LP: bounded-variable revised simplex on [A | -I](x,s) = 0 with ranged
// logicals, dense explicit basis inverse with periodic refactorization,
// composite phase 1 (no artificial columns), Bland's rule fallback after
// stalling. Certificates: reduced-cost optimality, Farkas-style multipliers
// on infeasibility, unbounded direction.
//
// MILP: best-bound branch & bound over binary variables, most-fractional
// branching, warm start from the previously solved basis. An optional
// rounding heuristic hook lets callers inject problem-specific incumbents;
// anything it returns is re-verified here before acceptance.
//
// Deterministic throughout: fixed tie-breaking, no randomization.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrc::optim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct RowTerm {
  int var;
  double coef;
};

struct Row {
  std::vector<RowTerm> terms;
  double lo = -kInf;
  double hi = kInf;
};

struct MilpInstance {
  std::vector<double> obj;     // maximize obj . z
  std::vector<double> lb, ub;  // variable bounds
  std::vector<Row> rows;
  std::vector<int> binaries;   // variable indices restricted to {0,1}
  std::vector<std::string> var_names;  // optional, for dumps

  int num_vars() const { return static_cast<int>(obj.size()); }

  int add_var(double l, double u, double c, std::string name = {}) {
    obj.push_back(c);
    lb.push_back(l);
    ub.push_back(u);
    var_names.push_back(std::move(name));
    return num_vars() - 1;
  }
  void set_binary(int v) {
    lb[v] = 0.0;
    ub[v] = 1.0;
    binaries.push_back(v);
  }
  int add_row(double lo, std::vector<RowTerm> terms, double hi) {
    rows.push_back(Row{std::move(terms), lo, hi});
    return static_cast<int>(rows.size()) - 1;
  }
  int add_row_le(std::vector<RowTerm> terms, double hi) { return add_row(-kInf, std::move(terms), hi); }
  int add_row_eq(std::vector<RowTerm> terms, double rhs) { return add_row(rhs, std::move(terms), rhs); }

  void validate() const {
    for (const auto& r : rows)
      for (const auto& t : r.terms)
        if (t.var < 0 || t.var >= num_vars()) throw std::invalid_argument("row references unknown variable");
    for (int b : binaries)
      if (lb[b] < -1e-12 || ub[b] > 1.0 + 1e-12) throw std::invalid_argument("binary bounds must lie in [0,1]");
    for (int j = 0; j < num_vars(); ++j)
      if (lb[j] > ub[j] + 1e-12) throw std::invalid_argument("crossed variable bounds");
  }
};

enum class SolveStatus { optimal, infeasible, unbounded, node_limit };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::node_limit: return "node-limit";
  }
  return "?";
}

struct MilpSolution {
  SolveStatus status = SolveStatus::infeasible;
  std::vector<double> z;
  double objective = -kInf;   // incumbent value (valid when z nonempty)
  double best_bound = kInf;   // proven upper bound (maximization)
  long nodes = 0;
  long lp_pivots = 0;
  std::vector<double> farkas_ray;     // row multipliers, infeasible LPs
  std::vector<double> unbounded_dir;  // structural direction, unbounded LPs
  double gap() const { return best_bound - objective; }
};

// ---------------------------------------------------------------------------
// Revised simplex
// ---------------------------------------------------------------------------
struct SimplexOptions {
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
  long max_iters = 2'000'000;
  int refactor_every = 100;
  int stall_limit = 100;  // pivots without progress before Bland's rule
};

class Simplex {
 public:
  struct Basis {
    std::vector<int> basic;
    std::vector<std::uint8_t> at_upper;
  };

  explicit Simplex(const MilpInstance& inst, SimplexOptions opt = SimplexOptions())
      : opt_(opt), n_(inst.num_vars()), m_(static_cast<int>(inst.rows.size())) {
    cols_.resize(n_);
    for (int i = 0; i < m_; ++i)
      for (const auto& t : inst.rows[i].terms)
        if (t.coef != 0.0) cols_[t.var].push_back({i, t.coef});
    lb_.assign(inst.lb.begin(), inst.lb.end());
    ub_.assign(inst.ub.begin(), inst.ub.end());
    for (const auto& r : inst.rows) {
      lb_.push_back(r.lo);
      ub_.push_back(r.hi);
    }
    obj_.assign(inst.obj.begin(), inst.obj.end());
    obj_.resize(n_ + m_, 0.0);
  }

  void set_bounds(int var, double l, double u) {
    lb_[var] = l;
    ub_[var] = u;
  }

  void reset_basis() {
    basic_.resize(m_);
    for (int i = 0; i < m_; ++i) basic_[i] = n_ + i;
    at_upper_.assign(n_ + m_, 0);
    isbasic_.assign(n_ + m_, 0);
    for (int i = 0; i < m_; ++i) isbasic_[basic_[i]] = 1;
  }

  Basis save_basis() const { return Basis{basic_, at_upper_}; }
  void load_basis(const Basis& b) {
    basic_ = b.basic;
    at_upper_ = b.at_upper;
    isbasic_.assign(n_ + m_, 0);
    for (int i = 0; i < m_; ++i) isbasic_[basic_[i]] = 1;
  }
  bool has_basis() const {
    return static_cast<int>(basic_.size()) == m_ && static_cast<int>(isbasic_.size()) == n_ + m_;
  }

  SolveStatus solve() {
    if (!has_basis()) reset_basis();
    sanitize_nonbasic();
    // degenerate pivots on a drifting basis inverse can leave the recorded
    // basis singular; restarting from the slack basis is always sound
    for (int attempt = 0;; ++attempt) {
      try {
        if (attempt > 0) reset_basis();
        refactor();
        if (!phase1()) return SolveStatus::infeasible;
        return phase2();
      } catch (const std::runtime_error&) {
        if (attempt >= 1) throw;
      }
    }
  }

  double objective_value() const {
    double v = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int j = basic_[i];
      if (j < n_) v += obj_[j] * xb_[i];
    }
    for (int j = 0; j < n_; ++j)
      if (!isbasic_[j] && obj_[j] != 0.0) v += obj_[j] * rest_value(j);
    return v;
  }

  std::vector<double> primal_solution() const {
    std::vector<double> x(n_);
    for (int j = 0; j < n_; ++j)
      if (!isbasic_[j]) x[j] = rest_value(j);
    for (int i = 0; i < m_; ++i)
      if (basic_[i] < n_) x[basic_[i]] = xb_[i];
    return x;
  }

  const std::vector<double>& farkas() const { return farkas_; }
  const std::vector<double>& unbounded_direction() const { return unbdir_; }
  long pivots() const { return pivots_; }

  double primal_infeasibility() const {
    double v = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int j = basic_[i];
      v = std::max(v, lb_[j] - xb_[i]);
      v = std::max(v, xb_[i] - ub_[j]);
    }
    return v;
  }

 private:
  struct ColEntry {
    int row;
    double coef;
  };

  double rest_value(int j) const {
    if (at_upper_[j]) return std::isfinite(ub_[j]) ? ub_[j] : 0.0;
    return std::isfinite(lb_[j]) ? lb_[j] : 0.0;
  }

  double col_dot(int j, const std::vector<double>& y) const {
    if (j < n_) {
      double s = 0.0;
      for (const auto& e : cols_[j]) s += e.coef * y[e.row];
      return s;
    }
    return -y[j - n_];
  }

  // w = Binv * column(j); row-major friendly
  void ftran(int j, std::vector<double>& w) const {
    w.assign(m_, 0.0);
    if (j < n_) {
      const auto& col = cols_[j];
      for (int i = 0; i < m_; ++i) {
        const double* bi = binv_.data() + static_cast<std::size_t>(i) * m_;
        double s = 0.0;
        for (const auto& e : col) s += e.coef * bi[e.row];
        w[i] = s;
      }
    } else {
      const int r = j - n_;
      for (int i = 0; i < m_; ++i) w[i] = -binv_[static_cast<std::size_t>(i) * m_ + r];
    }
  }

  void sanitize_nonbasic() {
    for (int j = 0; j < n_ + m_; ++j) {
      if (isbasic_[j]) continue;
      if (at_upper_[j] && !std::isfinite(ub_[j])) at_upper_[j] = 0;
      if (!at_upper_[j] && !std::isfinite(lb_[j]) && std::isfinite(ub_[j])) at_upper_[j] = 1;
    }
  }

  // rebuild a nonsingular basis near the current one: start from the slack
  // basis and greedily re-admit the recorded structural columns, skipping
  // any that are numerically dependent on the admitted set
  void repair_basis() {
    const std::vector<int> wanted = basic_;
    reset_basis();
    refactor_raw();
    std::vector<double> w(m_);
    for (int j : wanted) {
      if (j >= n_) continue;
      ftran(j, w);
      int slot = -1;
      double best = 1e-9;
      for (int i = 0; i < m_; ++i) {
        if (basic_[i] < n_) continue;  // keep already-admitted structurals
        if (std::abs(w[i]) > best) {
          best = std::abs(w[i]);
          slot = i;
        }
      }
      if (slot < 0) continue;  // dependent column: stays nonbasic
      const int jl = basic_[slot];
      isbasic_[jl] = 0;
      isbasic_[j] = 1;
      at_upper_[jl] = std::isfinite(lb_[jl]) ? 0 : 1;
      basic_[slot] = j;
      const double inv = 1.0 / w[slot];
      double* rl = binv_.data() + static_cast<std::size_t>(slot) * m_;
      for (int k = 0; k < m_; ++k) rl[k] *= inv;
      for (int i = 0; i < m_; ++i) {
        if (i == slot) continue;
        const double f = w[i];
        if (f == 0.0) continue;
        double* ri = binv_.data() + static_cast<std::size_t>(i) * m_;
        for (int k = 0; k < m_; ++k) ri[k] -= f * rl[k];
      }
    }
    sanitize_nonbasic();
    recompute_xb();
    since_refactor_ = 0;
  }

  void refactor() {
    try {
      refactor_raw();
    } catch (const std::runtime_error&) {
      repair_basis();
    }
  }

  void refactor_raw() {
    binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    std::vector<double> bmat(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int k = 0; k < m_; ++k) {
      const int j = basic_[k];
      if (j < n_) {
        for (const auto& e : cols_[j]) bmat[static_cast<std::size_t>(e.row) * m_ + k] = e.coef;
      } else {
        bmat[static_cast<std::size_t>(j - n_) * m_ + k] = -1.0;
      }
    }
    for (int i = 0; i < m_; ++i) binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0;
    for (int k = 0; k < m_; ++k) {
      int p = -1;
      double best = 1e-11;
      for (int i = k; i < m_; ++i) {
        const double v = std::abs(bmat[static_cast<std::size_t>(i) * m_ + k]);
        if (v > best) { best = v; p = i; }
      }
      if (p < 0) throw std::runtime_error("simplex: singular basis");
      if (p != k)
        for (int j = 0; j < m_; ++j) {
          std::swap(bmat[static_cast<std::size_t>(p) * m_ + j], bmat[static_cast<std::size_t>(k) * m_ + j]);
          std::swap(binv_[static_cast<std::size_t>(p) * m_ + j], binv_[static_cast<std::size_t>(k) * m_ + j]);
        }
      const double inv = 1.0 / bmat[static_cast<std::size_t>(k) * m_ + k];
      double* bk = bmat.data() + static_cast<std::size_t>(k) * m_;
      double* vk = binv_.data() + static_cast<std::size_t>(k) * m_;
      for (int j = 0; j < m_; ++j) {
        bk[j] *= inv;
        vk[j] *= inv;
      }
      for (int i = 0; i < m_; ++i) {
        if (i == k) continue;
        const double f = bmat[static_cast<std::size_t>(i) * m_ + k];
        if (f == 0.0) continue;
        double* bi = bmat.data() + static_cast<std::size_t>(i) * m_;
        double* vi = binv_.data() + static_cast<std::size_t>(i) * m_;
        for (int j = 0; j < m_; ++j) {
          bi[j] -= f * bk[j];
          vi[j] -= f * vk[j];
        }
      }
    }
    recompute_xb();
    since_refactor_ = 0;
  }

  void recompute_xb() {
    std::vector<double> rhs(m_, 0.0);
    for (int j = 0; j < n_ + m_; ++j) {
      if (isbasic_[j]) continue;
      const double v = rest_value(j);
      if (v == 0.0) continue;
      if (j < n_) {
        for (const auto& e : cols_[j]) rhs[e.row] -= e.coef * v;
      } else {
        rhs[j - n_] += v;
      }
    }
    xb_.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const double* bi = binv_.data() + static_cast<std::size_t>(i) * m_;
      double s = 0.0;
      for (int k = 0; k < m_; ++k) s += bi[k] * rhs[k];
      xb_[i] = s;
    }
  }

  void btran(const std::vector<double>& cb, std::vector<double>& y) const {
    y.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const double c = cb[i];
      if (c == 0.0) continue;
      const double* bi = binv_.data() + static_cast<std::size_t>(i) * m_;
      for (int k = 0; k < m_; ++k) y[k] += c * bi[k];
    }
  }

  bool phase1() {
    std::vector<double> cb(m_), y(m_), w(m_);
    long stall = 0;
    double last_inf = kInf;
    for (long iter = 0;; ++iter) {
      if (iter > opt_.max_iters) throw std::runtime_error("simplex phase1: iteration limit");
      double total_inf = 0.0;
      for (int i = 0; i < m_; ++i) {
        const int j = basic_[i];
        double c = 0.0;
        if (xb_[i] < lb_[j] - opt_.feas_tol) { c = 1.0; total_inf += lb_[j] - xb_[i]; }
        else if (xb_[i] > ub_[j] + opt_.feas_tol) { c = -1.0; total_inf += xb_[i] - ub_[j]; }
        cb[i] = c;
      }
      if (total_inf <= opt_.feas_tol * std::max(1.0, 0.1 * m_)) return true;
      if (total_inf < last_inf - 1e-13) { stall = 0; last_inf = total_inf; }
      else ++stall;
      const bool bland = stall > opt_.stall_limit;

      btran(cb, y);
      // phase-1 reduced cost of nonbasic j is -y.A_j; same sign convention
      // as phase 2: move up when positive, down when negative
      int enter = -1, dir = 0;
      double best = opt_.opt_tol;
      for (int j = 0; j < n_ + m_; ++j) {
        if (isbasic_[j]) continue;
        const double d = -col_dot(j, y);
        int cand = 0;
        const bool lf = std::isfinite(lb_[j]), uf = std::isfinite(ub_[j]);
        if (!lf && !uf) {
          if (d > opt_.opt_tol) cand = 1;
          else if (d < -opt_.opt_tol) cand = -1;
        } else if (at_upper_[j]) {
          if (d < -opt_.opt_tol) cand = -1;
        } else {
          if (d > opt_.opt_tol) cand = 1;
        }
        if (cand == 0) continue;
        if (bland) { enter = j; dir = cand; break; }
        if (std::abs(d) > best) { best = std::abs(d); enter = j; dir = cand; }
      }
      if (enter < 0) {
        farkas_ = y;
        return false;
      }
      ftran(enter, w);
      if (!ratio_and_pivot(enter, dir, w, true, bland))
        throw std::runtime_error("simplex phase1: unblocked infeasibility ray");
      ++pivots_;
      if (++since_refactor_ >= opt_.refactor_every) refactor();
    }
  }

  SolveStatus phase2() {
    std::vector<double> cb(m_), y(m_), w(m_);
    long stall = 0;
    double last_obj = -kInf;
    for (long iter = 0;; ++iter) {
      if (iter > opt_.max_iters) throw std::runtime_error("simplex phase2: iteration limit");
      // guard: phase-2 pivots can lose feasibility to roundoff
      if (primal_infeasibility() > 1e-7) {
        refactor();
        if (!phase1()) return SolveStatus::infeasible;
      }
      for (int i = 0; i < m_; ++i) cb[i] = obj_[basic_[i]];
      btran(cb, y);
      const double cur = objective_value();
      if (cur > last_obj + 1e-13) { stall = 0; last_obj = cur; }
      else ++stall;
      const bool bland = stall > opt_.stall_limit;

      int enter = -1, dir = 0;
      double best = opt_.opt_tol;
      for (int j = 0; j < n_ + m_; ++j) {
        if (isbasic_[j]) continue;
        const double d = obj_[j] - col_dot(j, y);
        int cand = 0;
        const bool lf = std::isfinite(lb_[j]), uf = std::isfinite(ub_[j]);
        if (!lf && !uf) {
          if (d > opt_.opt_tol) cand = 1;
          else if (d < -opt_.opt_tol) cand = -1;
        } else if (at_upper_[j]) {
          if (d < -opt_.opt_tol) cand = -1;
        } else {
          if (d > opt_.opt_tol) cand = 1;
        }
        if (cand == 0) continue;
        if (bland) { enter = j; dir = cand; break; }
        if (std::abs(d) > best) { best = std::abs(d); enter = j; dir = cand; }
      }
      if (enter < 0) return SolveStatus::optimal;
      ftran(enter, w);
      if (!ratio_and_pivot(enter, dir, w, false, bland)) {
        unbdir_.assign(n_, 0.0);
        if (enter < n_) unbdir_[enter] = dir;
        for (int i = 0; i < m_; ++i)
          if (basic_[i] < n_) unbdir_[basic_[i]] = -dir * w[i];
        return SolveStatus::unbounded;
      }
      ++pivots_;
      if (++since_refactor_ >= opt_.refactor_every) refactor();
    }
  }

  // Entering j moves by dir*step >= 0; basic i changes at rate -dir*w[i].
  // Returns false when the move is unblocked.
  bool ratio_and_pivot(int enter, int dir, const std::vector<double>& w, bool phase1, bool bland) {
    const double tol = opt_.feas_tol;
    double best_step = kInf;
    int leave = -1;
    double leave_bound = 0.0;
    bool leave_at_upper = false;

    double self_step = kInf;
    if (std::isfinite(lb_[enter]) && std::isfinite(ub_[enter])) self_step = ub_[enter] - lb_[enter];

    for (int i = 0; i < m_; ++i) {
      const double rate = -dir * w[i];
      if (std::abs(rate) < 1e-11) continue;
      const int j = basic_[i];
      const double v = xb_[i];
      double step = kInf, bound = 0.0;
      bool to_upper = false;
      if (rate > 0) {
        // moving up
        if (phase1 && v < lb_[j] - tol) {
          step = (lb_[j] - v) / rate;  // infeasible below: blocks on entry at lower
          bound = lb_[j];
          to_upper = false;
        } else if (v <= ub_[j] + tol && std::isfinite(ub_[j])) {
          step = (ub_[j] - v) / rate;
          bound = ub_[j];
          to_upper = true;
        } else {
          continue;  // already above upper and worsening: phase-1 cost handles it
        }
      } else {
        if (phase1 && v > ub_[j] + tol) {
          step = (ub_[j] - v) / rate;
          bound = ub_[j];
          to_upper = true;
        } else if (v >= lb_[j] - tol && std::isfinite(lb_[j])) {
          step = (lb_[j] - v) / rate;
          bound = lb_[j];
          to_upper = false;
        } else {
          continue;
        }
      }
      if (step < 0.0) step = 0.0;
      bool take = false;
      if (step < best_step - 1e-12) take = true;
      else if (step <= best_step + 1e-12 && leave >= 0) {
        if (bland) take = basic_[i] < basic_[leave];
        else take = std::abs(w[i]) > std::abs(w[leave]) + 1e-12;  // stability tie-break
      }
      if (take) {
        best_step = step;
        leave = i;
        leave_bound = bound;
        leave_at_upper = to_upper;
      }
    }

    if (self_step < best_step - 1e-12) {
      for (int i = 0; i < m_; ++i) xb_[i] += -dir * w[i] * self_step;
      at_upper_[enter] ^= 1;
      return true;
    }
    if (leave < 0) {
      if (std::isfinite(self_step)) {
        for (int i = 0; i < m_; ++i) xb_[i] += -dir * w[i] * self_step;
        at_upper_[enter] ^= 1;
        return true;
      }
      return false;
    }

    const double step = best_step;
    const double enter_start = rest_value(enter);
    for (int i = 0; i < m_; ++i) xb_[i] += -dir * w[i] * step;
    const int jl = basic_[leave];
    at_upper_[jl] = leave_at_upper ? 1 : 0;
    isbasic_[jl] = 0;
    isbasic_[enter] = 1;
    basic_[leave] = enter;
    xb_[leave] = enter_start + dir * step;
    (void)leave_bound;

    const double piv = w[leave];
    if (std::abs(piv) < 1e-12) {
      refactor();
      return true;
    }
    double* rl = binv_.data() + static_cast<std::size_t>(leave) * m_;
    const double inv = 1.0 / piv;
    for (int k = 0; k < m_; ++k) rl[k] *= inv;
    for (int i = 0; i < m_; ++i) {
      if (i == leave) continue;
      const double f = w[i];
      if (f == 0.0) continue;
      double* ri = binv_.data() + static_cast<std::size_t>(i) * m_;
      for (int k = 0; k < m_; ++k) ri[k] -= f * rl[k];
    }
    return true;
  }

  SimplexOptions opt_;
  int n_ = 0, m_ = 0;
  std::vector<std::vector<ColEntry>> cols_;
  std::vector<double> lb_, ub_, obj_;
  std::vector<int> basic_;
  std::vector<std::uint8_t> at_upper_, isbasic_;
  std::vector<double> binv_;
  std::vector<double> xb_;
  std::vector<double> farkas_, unbdir_;
  long pivots_ = 0;
  int since_refactor_ = 0;
};

// ---------------------------------------------------------------------------
// LP front end
// ---------------------------------------------------------------------------
struct LpOptions {
  SimplexOptions simplex;
};

inline MilpSolution solve_lp(const MilpInstance& inst, const LpOptions& opt) {
  inst.validate();
  Simplex sx(inst, opt.simplex);
  MilpSolution sol;
  const SolveStatus st = sx.solve();
  sol.status = st;
  sol.lp_pivots = sx.pivots();
  if (st == SolveStatus::optimal) {
    sol.z = sx.primal_solution();
    sol.objective = sx.objective_value();
    sol.best_bound = sol.objective;
  } else if (st == SolveStatus::infeasible) {
    sol.farkas_ray = sx.farkas();
    sol.best_bound = -kInf;
  } else {
    sol.unbounded_dir = sx.unbounded_direction();
    sol.best_bound = kInf;
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Branch & bound
// ---------------------------------------------------------------------------
struct MilpOptions {
  long node_limit = 100'000;
  int max_binaries = 64;  // precondition guard; callers may raise it
  double int_tol = 1e-9;
  double gap_rel = 1e-7;
  SimplexOptions simplex;
  std::function<std::optional<std::vector<double>>(const std::vector<double>&)> rounding;
};

namespace detail {

inline bool point_feasible(const MilpInstance& inst, const std::vector<double>& z, double tol, double int_tol) {
  if (static_cast<int>(z.size()) != inst.num_vars()) return false;
  for (int j = 0; j < inst.num_vars(); ++j)
    if (z[j] < inst.lb[j] - tol || z[j] > inst.ub[j] + tol) return false;
  for (const auto& r : inst.rows) {
    double a = 0.0;
    for (const auto& t : r.terms) a += t.coef * z[t.var];
    if (a < r.lo - tol || a > r.hi + tol) return false;
  }
  for (int b : inst.binaries)
    if (std::abs(z[b] - std::round(z[b])) > int_tol) return false;
  return true;
}

inline double objective_of(const MilpInstance& inst, const std::vector<double>& z) {
  double v = 0.0;
  for (int j = 0; j < inst.num_vars(); ++j) v += inst.obj[j] * z[j];
  return v;
}

}  // namespace detail

inline MilpSolution solve_milp(const MilpInstance& inst, const MilpOptions& opt) {
  inst.validate();
  if (static_cast<int>(inst.binaries.size()) > opt.max_binaries)
    throw std::invalid_argument("solve_milp: binary count " + std::to_string(inst.binaries.size()) +
                                " exceeds limit " + std::to_string(opt.max_binaries));
  MilpSolution out;
  if (inst.binaries.empty()) {
    out = solve_lp(inst, LpOptions{opt.simplex});
    out.nodes = 1;
    return out;
  }

  struct Node {
    double bound;
    long id;
    int parent;
    int var = -1;
    double fixed = 0.0;
  };
  std::vector<Node> pool;
  auto cmp = [&pool](int a, int b) {
    if (pool[a].bound != pool[b].bound) return pool[a].bound < pool[b].bound;
    return pool[a].id > pool[b].id;
  };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> open(cmp);

  Simplex sx(inst, opt.simplex);
  const double ftol = opt.simplex.feas_tol;

  pool.push_back(Node{kInf, 0, -1});
  open.push(0);
  long next_id = 1;

  std::vector<double> incumbent;
  double inc_val = -kInf;
  double open_bound_at_break = -kInf;
  out.nodes = 0;

  auto apply_node_bounds = [&](int idx) {
    for (int b : inst.binaries) sx.set_bounds(b, inst.lb[b], inst.ub[b]);
    for (int cur = idx; cur >= 0; cur = pool[cur].parent)
      if (pool[cur].var >= 0) sx.set_bounds(pool[cur].var, pool[cur].fixed, pool[cur].fixed);
  };

  auto try_incumbent = [&](std::vector<double> z) {
    if (static_cast<int>(z.size()) != inst.num_vars()) return;
    for (int b : inst.binaries) z[b] = std::round(z[b]);
    if (!detail::point_feasible(inst, z, 20 * ftol, opt.int_tol)) return;
    const double v = detail::objective_of(inst, z);
    if (v > inc_val) {
      inc_val = v;
      incumbent = std::move(z);
    }
  };

  while (!open.empty()) {
    if (out.nodes >= opt.node_limit) {
      double bb = inc_val;
      while (!open.empty()) {
        bb = std::max(bb, pool[open.top()].bound);
        open.pop();
      }
      out.status = SolveStatus::node_limit;
      out.z = incumbent;
      out.objective = inc_val;
      out.best_bound = bb;
      return out;
    }
    const int cur = open.top();
    open.pop();
    const double parent_bound = pool[cur].bound;
    const double gap_tol = opt.gap_rel * std::max(1.0, std::abs(inc_val));
    if (!incumbent.empty() && parent_bound <= inc_val + gap_tol) {
      open_bound_at_break = parent_bound;
      break;
    }
    ++out.nodes;
    apply_node_bounds(cur);
    const SolveStatus st = sx.solve();
    out.lp_pivots += sx.pivots();
    if (st == SolveStatus::infeasible) continue;
    if (st == SolveStatus::unbounded) {
      out.status = SolveStatus::unbounded;
      out.best_bound = kInf;
      out.unbounded_dir = sx.unbounded_direction();
      return out;
    }
    double lpval = std::min(sx.objective_value(), parent_bound);
    if (!incumbent.empty() && lpval <= inc_val + gap_tol) continue;
    const std::vector<double> z = sx.primal_solution();

    int branch_var = -1;
    double closest = 2.0;
    for (int b : inst.binaries) {
      const double f = std::abs(z[b] - std::round(z[b]));
      if (f <= opt.int_tol) continue;
      const double dist = std::abs(z[b] - 0.5);
      if (dist < closest - 1e-15) {
        closest = dist;
        branch_var = b;
      }
    }
    if (branch_var < 0) {
      try_incumbent(z);
      continue;
    }
    if (opt.rounding) {
      if (auto cand = opt.rounding(z)) try_incumbent(std::move(*cand));
    }
    pool.push_back(Node{lpval, next_id++, cur, branch_var, 0.0});
    open.push(static_cast<int>(pool.size()) - 1);
    pool.push_back(Node{lpval, next_id++, cur, branch_var, 1.0});
    open.push(static_cast<int>(pool.size()) - 1);
  }

  if (incumbent.empty()) {
    out.status = SolveStatus::infeasible;
    out.best_bound = -kInf;
    return out;
  }
  out.status = SolveStatus::optimal;
  out.z = incumbent;
  out.objective = inc_val;
  out.best_bound = std::max(inc_val, open_bound_at_break);
  return out;
}

// ---------------------------------------------------------------------------
// LP-format text dump (for --dump-milp)
// ---------------------------------------------------------------------------
inline std::string lp_format(const MilpInstance& inst, const std::string& name = "mrc_sup") {
  std::ostringstream os;
  os.precision(17);
  auto vname = [&](int j) -> std::string {
    if (j < static_cast<int>(inst.var_names.size()) && !inst.var_names[j].empty()) return inst.var_names[j];
    return "x" + std::to_string(j);
  };
  os << "\\ " << name << "\nMaximize\n obj:";
  bool first = true;
  for (int j = 0; j < inst.num_vars(); ++j) {
    if (inst.obj[j] == 0.0) continue;
    os << (inst.obj[j] >= 0 && !first ? " +" : " ") << inst.obj[j] << " " << vname(j);
    first = false;
  }
  if (first) os << " 0 " << vname(0);
  os << "\nSubject To\n";
  for (std::size_t i = 0; i < inst.rows.size(); ++i) {
    const auto& r = inst.rows[i];
    auto terms = [&]() {
      bool f2 = true;
      for (const auto& t : r.terms) {
        os << (t.coef >= 0 && !f2 ? " +" : " ") << t.coef << " " << vname(t.var);
        f2 = false;
      }
      if (f2) os << " 0 " << vname(0);
    };
    if (r.lo == r.hi) {
      os << " r" << i << ":";
      terms();
      os << " = " << r.lo << "\n";
    } else {
      if (std::isfinite(r.hi)) {
        os << " r" << i << "u:";
        terms();
        os << " <= " << r.hi << "\n";
      }
      if (std::isfinite(r.lo)) {
        os << " r" << i << "l:";
        terms();
        os << " >= " << r.lo << "\n";
      }
    }
  }
  os << "Bounds\n";
  for (int j = 0; j < inst.num_vars(); ++j) {
    if (!std::isfinite(inst.lb[j]) && !std::isfinite(inst.ub[j])) {
      os << " " << vname(j) << " free\n";
    } else if (!std::isfinite(inst.lb[j])) {
      os << " -inf <= " << vname(j) << " <= " << inst.ub[j] << "\n";
    } else if (!std::isfinite(inst.ub[j])) {
      os << " " << inst.lb[j] << " <= " << vname(j) << " <= +inf\n";
    } else {
      os << " " << inst.lb[j] << " <= " << vname(j) << " <= " << inst.ub[j] << "\n";
    }
  }
  if (!inst.binaries.empty()) {
    os << "Binaries\n";
    for (int b : inst.binaries) os << " " << vname(b);
    os << "\n";
  }
  os << "End\n";
  return os.str();
}

inline MilpSolution solve_lp(const MilpInstance& inst) { return solve_lp(inst, LpOptions{}); }
inline MilpSolution solve_milp(const MilpInstance& inst) { return solve_milp(inst, MilpOptions{}); }

}  // namespace mrc::optim
