// Bound assembly, iteration behaviour, k calibration, gap experiment
// mechanics at toy scale.

#include "doctest.h"

#include <cmath>

#include "mrc/bound.hpp"
#include "mrc/case_io.hpp"
#include "mrc/hypothesis.hpp"
#include "mrc/knowledge.hpp"
#include "mrc/rng.hpp"

using namespace mrc;
using namespace mrc::bound;
using case_io::Dataset;

static Dataset affine_dataset(int m, double noise, std::uint64_t seed) {
  Rng rng(seed);
  Mat x(m, 1);
  std::vector<double> y(m);
  for (int i = 0; i < m; ++i) {
    x(i, 0) = rng.uniform01();
    y[i] = 0.2 + 0.55 * x(i, 0) + noise * rng.normal();
  }
  Dataset d;
  d.m = m;
  d.x = x;
  d.y = y;
  case_io::ColNorm c;
  c.name = "f0";
  c.min = 0;
  c.max = 1;
  d.norm = {c, c};
  d.norm[1].name = "y";
  d.feature_names = {"f0"};
  d.target_name = "y";
  return d;
}

TEST_CASE("total_bound: exact three-term sum and validation") {
  CHECK(total_bound(0, 0, 0, 0.05, 100) == 0.0);
  // e = 1, delta = 0.05, m = 800 -> sample term 3 sqrt(2 ln 40 / 800)
  const double expect = 3.0 * std::sqrt(2.0 * std::log(40.0) / 800.0);
  CHECK(total_bound(0, 0, 1.0, 0.05, 800) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(0.28809).epsilon(1e-4));  // frozen reference value
  const double t = total_bound(0.1, 0.2, 0.5, 0.05, 400);
  CHECK(t == doctest::Approx(0.1 + 0.4 + sample_term(0.5, 0.05, 400)).epsilon(1e-15));
  CHECK_THROWS(total_bound(0, 0, 0, 0.0, 10));
  CHECK_THROWS(total_bound(0, 0, 0, 1.0, 10));
  CHECK_THROWS(total_bound(0, 0, 0, 0.5, 0));
}

TEST_CASE("iterate: accepted totals strictly decrease and decompose exactly") {
  Dataset d = affine_dataset(24, 0.01, 99);
  auto h = hypothesis::fit_ols(d);
  TrainedModel tm;
  tm.emp_error = hypothesis::empirical_error(h, d);
  tm.params = h.params();
  CertifyOptions opt;
  opt.n = 4;
  opt.max_iters = 8;
  opt.seed = 5;
  opt.erc.threads = 2;
  auto cs = knowledge::box_constraint({-1.0, -1.0}, {1.5, 1.5});
  BoundReport rep = iterate(d, rademacher::LinearClassSpec{}, cs, tm, opt);
  REQUIRE(!rep.trace.empty());
  for (std::size_t i = 0; i < rep.trace.size(); ++i) {
    const auto& s = rep.trace[i];
    CHECK(s.total == s.emp_error + s.erc_term + s.samp_term);  // bit-exact decomposition
    if (i > 0) {
      CHECK(s.total < rep.trace[i - 1].total);
      CHECK(s.e_comp < rep.trace[i - 1].e_comp);
      CHECK(s.e_samp < rep.trace[i - 1].e_samp);
    }
  }
  CHECK(rep.final_bound == rep.trace.back().total);
  CHECK(rep.hypothesis_in_class);
  // reproducibility: identical options give an identical report
  BoundReport rep2 = iterate(d, rademacher::LinearClassSpec{}, cs, tm, opt);
  CHECK(rep2.final_bound == rep.final_bound);
  CHECK(rep2.trace.size() == rep.trace.size());
}

TEST_CASE("iterate: perfect model on noiseless data tightens toward the noise floor") {
  // m large enough that the step-1 sample term leaves room below e0
  Dataset d = affine_dataset(300, 0.0, 7);
  auto h = hypothesis::fit_ols(d);
  TrainedModel tm;
  tm.emp_error = hypothesis::empirical_error(h, d);
  tm.params = h.params();
  CHECK(tm.emp_error < 1e-12);
  CertifyOptions opt;
  opt.n = 3;
  opt.max_iters = 6;
  opt.seed = 2;
  opt.erc.threads = 2;
  opt.erc.sup.target_gap = 1e-4;
  auto cs = knowledge::box_constraint({0.3, 0.0}, {0.8, 0.4});  // contains (0.55, 0.2)
  BoundReport rep = iterate(d, rademacher::LinearClassSpec{}, cs, tm, opt);
  for (const auto& s : rep.trace) CHECK(s.emp_error < 1e-12);
  CHECK(rep.trace.size() > 1);  // tightening happens
  CHECK(rep.final_bound < rep.trace.front().total);
}

TEST_CASE("iterate: no-tightening divergence returns step-1 bound with flag") {
  // huge empirical error forces e_new >= e0 at the first step
  Dataset d = affine_dataset(12, 0.0, 3);
  TrainedModel tm;
  tm.emp_error = 2.0;  // already above e0
  CertifyOptions opt;
  opt.n = 2;
  opt.max_iters = 5;
  opt.e0 = 1.0;
  opt.erc.threads = 1;
  auto cs = knowledge::box_constraint({-0.5, -0.5}, {1.0, 1.0});
  BoundReport rep = iterate(d, rademacher::LinearClassSpec{}, cs, tm, opt);
  CHECK(!rep.tightened);
  CHECK(rep.trace.size() == 1);
  CHECK(rep.final_bound == rep.trace[0].total);
}

TEST_CASE("knowledge dominance at every step under shared sigmas") {
  Dataset d = affine_dataset(20, 0.01, 123);
  auto h = hypothesis::fit_ols(d);
  TrainedModel tm;
  tm.emp_error = hypothesis::empirical_error(h, d);
  tm.params = h.params();
  CertifyOptions opt;
  opt.n = 4;
  opt.max_iters = 4;
  opt.seed = 77;
  opt.erc.threads = 2;
  auto wide = knowledge::box_constraint({-2.0, -2.0}, {2.0, 2.0});
  auto narrow = knowledge::box_constraint({-0.3, -0.3}, {1.0, 1.0});
  BoundReport rw = iterate(d, rademacher::LinearClassSpec{}, wide, tm, opt);
  BoundReport rn = iterate(d, rademacher::LinearClassSpec{}, narrow, tm, opt);
  CHECK(rn.final_bound <= rw.final_bound + 1e-9);
  const std::size_t steps = std::min(rn.trace.size(), rw.trace.size());
  for (std::size_t i = 0; i < steps; ++i) CHECK(rn.trace[i].total <= rw.trace[i].total + 1e-9);
}

TEST_CASE("calibrate_k: gaussian near 1.4, constant near 1.01, two-point near sqrt(2)") {
  ErrorModel g;
  g.kind = ErrorModel::Kind::gaussian;
  g.m = 500;
  const double kg = calibrate_k(g, 20'000, 11);
  CHECK(kg > 1.25);
  CHECK(kg < 1.5);

  ErrorModel c;
  c.kind = ErrorModel::Kind::constant;
  c.m = 100;
  CHECK(calibrate_k(c, 10'000, 1) == doctest::Approx(1.01).epsilon(1e-12));

  ErrorModel tp;
  tp.kind = ErrorModel::Kind::two_point;
  tp.m = 2000;
  tp.p_hi = 0.5;
  const double kt = calibrate_k(tp, 100'000, 5);
  CHECK(kt == doctest::Approx(1.01 * std::sqrt(2.0)).epsilon(0.03));

  CHECK_THROWS(calibrate_k(g, 100, 1));  // too few trials
  ErrorModel z;
  z.kind = ErrorModel::Kind::two_point;
  z.p_hi = 0.0;
  CHECK_THROWS(calibrate_k(z, 10'000, 1));
}

TEST_CASE("gap experiment at toy scale: bound covers the empirical gaps") {
  auto gc = case_io::parse_case_file(std::string(DATA_DIR) + "/case39.m");
  GapTarget target;
  powerflow::BranchFlowTarget bft;
  bft.from = 16;
  bft.to = 17;
  bft.reactive = true;
  target.target = bft;

  GapOptions opt;
  opt.trainers = 3;
  opt.testers = 4;
  opt.m = 40;
  opt.certify.n = 3;
  opt.certify.max_iters = 3;
  opt.certify.seed = 31;
  opt.certify.erc.threads = 2;
  const int bi = powerflow::find_branch(gc, 16, 17);
  // physically derived box for the studied branch, in normalized units
  powerflow::ScenarioSpec spec;
  spec.lo = opt.train_lo;
  spec.hi = opt.train_hi;
  spec.count = opt.m;
  spec.seed = derive_seed(opt.certify.seed, "nominal");
  auto snaps = powerflow::sample_scenarios(gc, spec);
  auto rd = powerflow::extract_features(gc, snaps, bft);
  Dataset nominal = case_io::normalize(rd.values, rd.names);
  auto box = knowledge::branch_flow_box(gc.branches[bi].series_g(), gc.branches[bi].series_b(), true);
  auto cs = knowledge::phys_box_to_norm(box.lb, box.ub, nominal, "box");

  GapReport rep = gap_experiment(gc, target, cs, opt);
  REQUIRE(rep.gaps.size() == 12);
  CHECK(rep.gap_bound > 0);
  CHECK(rep.exceedances == 0);  // theoretical bound far above empirical gaps
  for (double g : rep.gaps) CHECK(g <= rep.gap_bound);
  // report serialization smoke test
  auto j = report_to_json(rep.nominal);
  CHECK(j["final_bound"].get<double>() == rep.nominal.final_bound);
  CHECK(j["trace"].size() == rep.nominal.trace.size());
}
