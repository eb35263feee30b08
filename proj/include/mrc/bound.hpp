// bound.hpp
//
// Generalization-bound assembly and the iterative tightening loop.
//
// One certified step:  L <= Lhat + 2*ERC(H(e_comp) n P) + 3 e_samp sqrt(2 log(2/delta)/m)
// The next step tightens both budgets from the current bound: the complexity
// budget with factor 1 (the ERC is already evaluated under the MAE
// relaxation), the sample budget with a calibrated factor k >= 1 turning an
// MAE level into an RMS cap. The loop continues while both budgets strictly
// decrease, which forces the accepted totals to decrease strictly.
//
// Also here: the k calibration by sampling, and the train/test
// generalization-gap experiment with its certified gap bound.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mrc/case_io.hpp"
#include "mrc/hypothesis.hpp"
#include "mrc/knowledge.hpp"
#include "mrc/powerflow.hpp"
#include "mrc/rademacher.hpp"
#include "mrc/rng.hpp"

namespace mrc::bound {

using case_io::Dataset;
using knowledge::ConstraintSet;
using rademacher::ClassSpec;

struct KFactor {
  double comp = 1.0;  // MAE level feeds the next complexity budget directly
  double samp = 1.4;  // RMS/MAE ratio bound (Gaussian calibration default)
};

inline double sample_term(double e_samp, double delta, int m) {
  return 3.0 * e_samp * std::sqrt(2.0 * std::log(2.0 / delta) / m);
}

inline double total_bound(double emp_error, double erc, double e_samp, double delta, int m) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (emp_error < 0 || erc < -1e-12 || e_samp < 0) throw std::invalid_argument("bound inputs must be nonnegative");
  return emp_error + 2.0 * erc + sample_term(e_samp, delta, m);
}

struct IterationStep {
  int step = 0;
  double e_comp = 0, e_samp = 0;
  double emp_error = 0;
  double erc = 0;
  double erc_term = 0;
  double samp_term = 0;
  double total = 0;
  std::vector<double> sup_values;  // per sigma (certified upper bounds)
};

struct BoundReport {
  std::vector<IterationStep> trace;
  double final_bound = 0;
  int final_step = 0;
  bool tightened = true;  // false: step-1 budgets did not shrink
  double delta = 0.05;
  int m = 0, n = 0;
  std::uint64_t seed = 0;
  double e0 = 1.0;
  KFactor k;
  std::string knowledge_desc, model_desc;
  bool hypothesis_in_class = true;
  double class_violation = 0.0;
  double target_scale = 1.0;  // raw units per normalized unit of the target
  double erc_gap_target = 0.0;
  std::vector<std::string> assumptions;

  double final_gap_bound() const {  // Eq-28-style: bound on L(h) - Lhat(h)
    const auto& s = trace.at(final_step - 1);
    return s.erc_term + s.samp_term;
  }
};

struct CertifyOptions {
  double delta = 0.05;
  int n = 10;
  int max_iters = 10;
  double e0 = 1.0;
  KFactor k;
  std::uint64_t seed = 1;
  rademacher::ErcOptions erc;
};

struct TrainedModel {
  double emp_error = 0.0;                // Lhat on the training data (normalized units)
  std::vector<double> params;            // linear-class parameters, for the membership check
  std::string description = "lr";
};

// membership of the trained hypothesis in the constrained class; the bound
// certifies hypotheses inside H(e) n P, so a violation is reported
inline double class_violation(const ConstraintSet& cs, const std::vector<double>& params) {
  double v = 0.0;
  if (!cs.param_lb.empty() && cs.param_lb.size() == params.size()) {
    for (std::size_t j = 0; j < params.size(); ++j) {
      v = std::max(v, cs.param_lb[j] - params[j]);
      v = std::max(v, params[j] - cs.param_ub[j]);
    }
  }
  for (const auto& r : cs.rows) {
    double a = 0;
    for (std::size_t j = 0; j < r.a.size() && j < params.size(); ++j) a += r.a[j] * params[j];
    v = std::max(v, a - r.ub);
  }
  return v;
}

inline BoundReport iterate(const Dataset& d, const ClassSpec& cls, const ConstraintSet& cs,
                           const TrainedModel& trained, const CertifyOptions& opt) {
  if (!(opt.e0 > 0)) throw std::invalid_argument("iterate: e0 must be positive");
  if (opt.max_iters < 1) throw std::invalid_argument("iterate: max_iters must be >= 1");
  if (!(opt.delta > 0 && opt.delta < 1)) throw std::invalid_argument("iterate: delta outside (0,1)");
  if (opt.k.samp < 1.0) throw std::invalid_argument("iterate: k_samp must be >= 1");

  BoundReport rep;
  rep.delta = opt.delta;
  rep.m = d.m;
  rep.n = opt.n;
  rep.seed = opt.seed;
  rep.e0 = opt.e0;
  rep.k = opt.k;
  rep.knowledge_desc = cs.description;
  rep.model_desc = trained.description;
  rep.target_scale = d.target_range();
  rep.erc_gap_target = opt.erc.sup.target_gap;
  if (!trained.params.empty()) {
    rep.class_violation = class_violation(cs, trained.params);
    rep.hypothesis_in_class = rep.class_violation <= 1e-8;
  }
  rep.assumptions = {
      "loads scaled per bus by one uniform factor applied to both P and Q",
      "snapshot draws are independent and identically distributed within the declared range",
      "polynomial kernel degree read as 2 for the svr hyperparameter l",
      "initial budget e0 covers the normalized error range",
  };

  // sigma vectors drawn once and reused across iteration steps
  const auto sigmas = rademacher::draw_sigmas(d.m, opt.n, derive_seed(opt.seed, "sigma"), opt.erc.antithetic);

  double e_comp = opt.e0, e_samp = opt.e0;
  std::vector<double> prev_sups;
  for (int step = 1;; ++step) {
    auto erc_res = rademacher::estimate_erc_with_sigmas(d, cls, cs, e_comp, sigmas, opt.erc);
    // the true per-sigma sup is nondecreasing in the budget, so earlier
    // (larger-budget) certified values remain valid upper bounds
    if (!prev_sups.empty()) {
      double acc = 0;
      for (std::size_t j = 0; j < erc_res.sup_values.size(); ++j) {
        erc_res.sup_values[j] = std::min(erc_res.sup_values[j], prev_sups[j]);
        acc += erc_res.sup_values[j] / d.m;
      }
      erc_res.erc = acc / static_cast<double>(erc_res.sup_values.size());
    }
    prev_sups = erc_res.sup_values;

    IterationStep st;
    st.step = step;
    st.e_comp = e_comp;
    st.e_samp = e_samp;
    st.emp_error = trained.emp_error;
    st.erc = erc_res.erc;
    st.erc_term = 2.0 * erc_res.erc;
    st.samp_term = sample_term(e_samp, opt.delta, d.m);
    st.total = st.emp_error + st.erc_term + st.samp_term;
    st.sup_values = erc_res.sup_values;
    rep.trace.push_back(st);

    const double e_comp_new = opt.k.comp * st.total;
    const double e_samp_new = opt.k.samp * st.total;
    const bool shrinks = e_comp_new < e_comp && e_samp_new < e_samp;
    if (step == 1 && !shrinks) {
      rep.tightened = false;
      break;
    }
    if (!shrinks || step >= opt.max_iters) break;
    e_comp = e_comp_new;
    e_samp = e_samp_new;
  }
  rep.final_step = static_cast<int>(rep.trace.size());
  rep.final_bound = rep.trace.back().total;
  return rep;
}

inline nlohmann::json report_to_json(const BoundReport& r) {
  nlohmann::json j;
  j["final_bound"] = r.final_bound;
  j["final_bound_raw_units"] = r.final_bound * r.target_scale;
  j["final_step"] = r.final_step;
  j["final_gap_bound"] = r.final_gap_bound();
  j["tightened"] = r.tightened;
  j["delta"] = r.delta;
  j["m"] = r.m;
  j["n"] = r.n;
  j["seed"] = r.seed;
  j["e0"] = r.e0;
  j["k_comp"] = r.k.comp;
  j["k_samp"] = r.k.samp;
  j["knowledge"] = r.knowledge_desc;
  j["model"] = r.model_desc;
  j["hypothesis_in_class"] = r.hypothesis_in_class;
  j["class_violation"] = r.class_violation;
  j["target_scale"] = r.target_scale;
  j["erc_gap_target"] = r.erc_gap_target;
  j["assumptions"] = r.assumptions;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.trace) {
    steps.push_back({{"step", s.step},
                     {"e_comp", s.e_comp},
                     {"e_samp", s.e_samp},
                     {"empirical_error", s.emp_error},
                     {"erc", s.erc},
                     {"erc_term", s.erc_term},
                     {"sample_term", s.samp_term},
                     {"total", s.total},
                     {"sup_values", s.sup_values}});
  }
  j["trace"] = steps;
  return j;
}

// --------------------------------------------------------------------------
// k calibration: smallest k bounding the sampled RMS/MAE ratio, +1% margin
// --------------------------------------------------------------------------
struct ErrorModel {
  enum class Kind { gaussian, constant, two_point } kind = Kind::gaussian;
  int m = 500;
  double p_hi = 0.5, hi = 1.0;  // two_point: |error| = hi with prob p_hi else 0
};

inline double calibrate_k(const ErrorModel& model, long trials, std::uint64_t seed) {
  if (trials < 10'000) throw std::invalid_argument("calibrate_k: need at least 1e4 trials");
  Rng rng(seed);
  double worst = 0.0;
  for (long t = 0; t < trials; ++t) {
    double sum = 0, sumsq = 0;
    for (int i = 0; i < model.m; ++i) {
      double v = 0;
      switch (model.kind) {
        case ErrorModel::Kind::gaussian: v = std::abs(rng.normal()); break;
        case ErrorModel::Kind::constant: v = 1.0; break;
        case ErrorModel::Kind::two_point: v = rng.uniform01() < model.p_hi ? model.hi : 0.0; break;
      }
      sum += v;
      sumsq += v * v;
    }
    if (sum <= 0) continue;
    const double ratio = std::sqrt(sumsq / model.m) / (sum / model.m);
    worst = std::max(worst, ratio);
  }
  if (worst <= 0) throw std::invalid_argument("calibrate_k: degenerate error distribution (all zero)");
  return 1.01 * worst;
}

// --------------------------------------------------------------------------
// Generalization-gap experiment: T trained models x S test sets, empirical
// gaps against the certified gap bound from a nominal certification run.
// --------------------------------------------------------------------------
struct GapTarget {
  std::variant<powerflow::BranchFlowTarget, powerflow::BorderBusTarget> target;
  powerflow::RawDataset extract(const case_io::GridCase& gc,
                                const std::vector<powerflow::Snapshot>& snaps) const {
    if (std::holds_alternative<powerflow::BranchFlowTarget>(target))
      return powerflow::extract_features(gc, snaps, std::get<powerflow::BranchFlowTarget>(target));
    return powerflow::extract_features(gc, snaps, std::get<powerflow::BorderBusTarget>(target));
  }
};

struct GapOptions {
  int trainers = 20;
  int testers = 20;
  int m = 300;
  double train_lo = 0.95, train_hi = 1.05;
  double test_lo = 0.95, test_hi = 1.05;
  CertifyOptions certify;
  bool svr = false;
  double svr_C = 0.2, svr_eps = 0.01, svr_kernel_c = 1.0;
};

struct GapReport {
  BoundReport nominal;           // certification on the nominal dataset
  double gap_bound = 0;          // 2 ERC + sample term at the final step
  std::vector<double> gaps;      // trainers x testers, row-major (normalized units)
  std::vector<double> train_mae; // per trainer
  int exceedances = 0;
  int trainers = 0, testers = 0;
};

inline GapReport gap_experiment(const case_io::GridCase& gc, const GapTarget& target,
                                const ConstraintSet& cs, const GapOptions& opt) {
  if (opt.trainers < 1 || opt.testers < 1) throw std::invalid_argument("gap_experiment: T, S >= 1");
  GapReport rep;
  rep.trainers = opt.trainers;
  rep.testers = opt.testers;

  auto make_raw = [&](double lo, double hi, std::uint64_t seed) {
    powerflow::ScenarioSpec spec;
    spec.lo = lo;
    spec.hi = hi;
    spec.count = opt.m;
    spec.seed = seed;
    auto snaps = powerflow::sample_scenarios(gc, spec);
    return target.extract(gc, snaps);
  };

  // nominal dataset fixes the normalization scale for the whole experiment
  const auto nominal_raw = make_raw(opt.train_lo, opt.train_hi, derive_seed(opt.certify.seed, "nominal"));
  Dataset nominal = case_io::normalize(nominal_raw.values, nominal_raw.names);

  ClassSpec cls;
  ConstraintSet cs_run = cs;
  TrainedModel trained;
  if (opt.svr) {
    cls = rademacher::SvrClassSpec{opt.svr_C, opt.svr_eps, opt.svr_kernel_c};
    if (!cs_run.svr) cs_run.svr = knowledge::SvrStructure{opt.svr_C, opt.svr_eps, 0.0};
    auto h = hypothesis::fit_svr(nominal, opt.svr_C, opt.svr_eps, opt.svr_kernel_c);
    trained.emp_error = hypothesis::empirical_error(h, nominal);
    trained.description = "svr";
  } else {
    cls = rademacher::LinearClassSpec{};
    auto h = hypothesis::fit_ols(nominal);
    trained.emp_error = hypothesis::empirical_error(h, nominal);
    trained.params = h.params();
    trained.description = "lr";
  }
  rep.nominal = iterate(nominal, cls, cs_run, trained, opt.certify);
  rep.gap_bound = rep.nominal.final_gap_bound();

  // fresh train/test sets share the nominal normalization
  std::vector<Dataset> tests;
  tests.reserve(opt.testers);
  for (int s = 0; s < opt.testers; ++s) {
    const auto raw = make_raw(opt.test_lo, opt.test_hi, derive_seed(opt.certify.seed, "test" + std::to_string(s)));
    tests.push_back(case_io::normalize_with(raw.values, raw.names, nominal.norm));
  }
  rep.gaps.reserve(static_cast<std::size_t>(opt.trainers) * opt.testers);
  for (int t = 0; t < opt.trainers; ++t) {
    const auto raw = make_raw(opt.train_lo, opt.train_hi, derive_seed(opt.certify.seed, "train" + std::to_string(t)));
    Dataset dt = case_io::normalize_with(raw.values, raw.names, nominal.norm);
    double mae_train = 0;
    std::vector<double> mae_tests(opt.testers, 0.0);
    if (opt.svr) {
      auto h = hypothesis::fit_svr(dt, opt.svr_C, opt.svr_eps, opt.svr_kernel_c);
      mae_train = hypothesis::empirical_error(h, dt);
      for (int s = 0; s < opt.testers; ++s) mae_tests[s] = hypothesis::empirical_error(h, tests[s]);
    } else {
      auto h = hypothesis::fit_ols(dt);
      mae_train = hypothesis::empirical_error(h, dt);
      for (int s = 0; s < opt.testers; ++s) mae_tests[s] = hypothesis::empirical_error(h, tests[s]);
    }
    rep.train_mae.push_back(mae_train);
    for (int s = 0; s < opt.testers; ++s) {
      const double gap = mae_tests[s] - mae_train;
      rep.gaps.push_back(gap);
      if (gap > rep.gap_bound) ++rep.exceedances;
    }
  }
  return rep;
}

}  // namespace mrc::bound
