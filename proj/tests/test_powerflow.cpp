// Newton-Raphson solver against hand-iterated Gauss-Seidel, snapshot
// invariants, scenario generation determinism, feature extraction.

#include "doctest.h"

#include <cmath>
#include <complex>

#include "mrc/case_io.hpp"
#include "mrc/powerflow.hpp"

using namespace mrc;
using namespace mrc::case_io;
using namespace mrc::powerflow;

static GridCase two_bus_case() {
  GridCase gc;
  gc.base_mva = 100.0;
  Bus b1;
  b1.id = 1;
  b1.type = BusType::slack;
  b1.v_setpoint = 1.0;
  Bus b2;
  b2.id = 2;
  b2.type = BusType::pq;
  b2.pd = 0.1;
  b2.qd = 0.05;
  gc.buses = {b1, b2};
  Branch br;
  br.from = 1;
  br.to = 2;
  br.r = 0.01;
  br.x = 0.1;
  gc.branches = {br};
  Gen g;
  g.bus = 1;
  g.v_setpoint = 1.0;
  gc.gens = {g};
  gc.validate();
  return gc;
}

TEST_CASE("zero injection network solves to the flat fixed point") {
  GridCase gc;
  gc.base_mva = 100.0;
  for (int i = 1; i <= 4; ++i) {
    Bus b;
    b.id = i;
    b.type = i == 1 ? BusType::slack : (i == 2 ? BusType::pv : BusType::pq);
    b.v_setpoint = 1.0;
    gc.buses.push_back(b);
  }
  const int links[4][2] = {{1, 2}, {2, 3}, {3, 4}, {4, 1}};
  for (auto& l : links) {
    Branch br;
    br.from = l[0];
    br.to = l[1];
    br.r = 0.02;
    br.x = 0.08;
    gc.branches.push_back(br);
  }
  Gen g1;
  g1.bus = 1;
  g1.v_setpoint = 1.0;
  Gen g2;
  g2.bus = 2;
  g2.v_setpoint = 1.0;
  gc.gens = {g1, g2};
  gc.validate();

  Snapshot s = solve_powerflow(gc);
  for (int i = 0; i < 4; ++i) {
    CHECK(s.vm[i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(s.va[i]) < 1e-12);
  }
  for (const auto& f : s.flows) {
    CHECK(std::abs(f.pf) < 1e-12);
    CHECK(std::abs(f.qf) < 1e-12);
  }
}

TEST_CASE("2-bus case matches independent Gauss-Seidel oracle") {
  GridCase gc = two_bus_case();
  Snapshot s = solve_powerflow(gc);
  CHECK(s.mismatch <= 1e-8);

  // Gauss-Seidel on the PQ bus: V2 <- (S2*/V2* - Y21 V1) / Y22
  using cd = std::complex<double>;
  const cd z(0.01, 0.1);
  const cd y = 1.0 / z;
  const cd Y21 = -y, Y22 = y;
  const cd S2(-0.1, -0.05);  // net injection at the load bus
  cd V1(1.0, 0.0), V2(1.0, 0.0);
  for (int it = 0; it < 500; ++it) {
    const cd rhs = std::conj(S2 / V2) - Y21 * V1;
    V2 = rhs / Y22;
  }
  CHECK(s.vm[1] == doctest::Approx(std::abs(V2)).epsilon(1e-8));
  CHECK(s.va[1] == doctest::Approx(std::arg(V2)).epsilon(1e-8));
  verify_snapshot(gc, s);
}

TEST_CASE("39-bus base case converges fast and balances") {
  GridCase gc = parse_case_file(std::string(DATA_DIR) + "/case39.m");
  Snapshot s = solve_powerflow(gc);
  CHECK(s.iterations <= 10);
  CHECK(s.mismatch <= 1e-8);
  verify_snapshot(gc, s);
  // sane voltage profile
  for (double v : s.vm) {
    CHECK(v > 0.90);
    CHECK(v < 1.10);
  }
}

TEST_CASE("118-bus case converges and balances") {
  GridCase gc = parse_case_file(std::string(DATA_DIR) + "/case118.m");
  Snapshot s = solve_powerflow(gc);
  CHECK(s.mismatch <= 1e-8);
  verify_snapshot(gc, s);
}

TEST_CASE("scenario spec validation") {
  ScenarioSpec bad;
  bad.lo = 0.0;
  bad.hi = 1.0;
  CHECK_THROWS(bad.validate());
  bad.lo = 1.2;
  bad.hi = 1.0;
  CHECK_THROWS(bad.validate());
  bad.lo = 0.9;
  bad.hi = 1.0;
  bad.count = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("zero-width range yields identical snapshots equal to base case") {
  GridCase gc = parse_case_file(std::string(DATA_DIR) + "/case39.m");
  ScenarioSpec spec;
  spec.lo = spec.hi = 1.0;
  spec.count = 3;
  spec.seed = 7;
  auto snaps = sample_scenarios(gc, spec);
  REQUIRE(snaps.size() == 3);
  Snapshot base = solve_powerflow(gc);
  for (const auto& s : snaps)
    for (std::size_t i = 0; i < base.vm.size(); ++i) {
      CHECK(s.vm[i] == doctest::Approx(base.vm[i]).epsilon(1e-12));
      CHECK(s.va[i] == doctest::Approx(base.va[i]).epsilon(1e-12));
    }
}

TEST_CASE("scenario generation is deterministic given the seed") {
  GridCase gc = parse_case_file(std::string(DATA_DIR) + "/case39.m");
  ScenarioSpec spec;
  spec.lo = 0.95;
  spec.hi = 1.05;
  spec.count = 20;
  spec.seed = 12345;
  auto a = sample_scenarios(gc, spec);
  auto b = sample_scenarios(gc, spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t s = 0; s < a.size(); ++s) {
    for (std::size_t i = 0; i < a[s].vm.size(); ++i) {
      CHECK(a[s].vm[i] == b[s].vm[i]);  // bitwise
      CHECK(a[s].va[i] == b[s].va[i]);
    }
  }
}

TEST_CASE("load ranges order the sampled demand: low < normal < high") {
  GridCase gc = parse_case_file(std::string(DATA_DIR) + "/case39.m");
  auto mean_load = [&](double lo, double hi) {
    ScenarioSpec spec;
    spec.lo = lo;
    spec.hi = hi;
    spec.count = 30;
    spec.seed = 99;
    auto snaps = sample_scenarios(gc, spec);
    double acc = 0;
    for (const auto& s : snaps)
      for (double p : s.pd) acc += p;
    return acc / snaps.size();
  };
  const double low = mean_load(0.85, 0.95);
  const double normal = mean_load(0.95, 1.05);
  const double high = mean_load(1.05, 1.15);
  CHECK(low < normal);
  CHECK(normal < high);
}

TEST_CASE("branch-flow feature extraction layout") {
  GridCase gc = two_bus_case();
  Snapshot s = solve_powerflow(gc);
  BranchFlowTarget t;
  t.from = 1;
  t.to = 2;
  t.reactive = false;
  RawDataset d = extract_features(gc, {s}, t);
  REQUIRE(d.values.rows() == 1);
  REQUIRE(d.values.cols() == 5);
  CHECK(d.values(0, 0) == doctest::Approx(s.vm[0] * s.vm[0]));
  CHECK(d.values(0, 1) == doctest::Approx(s.vm[1] * s.vm[1]));
  CHECK(d.values(0, 2) == doctest::Approx(s.va[0]));
  CHECK(d.values(0, 3) == doctest::Approx(s.va[1]));
  CHECK(d.values(0, 4) == doctest::Approx(s.flows[0].pf));
  CHECK_THROWS(extract_features(gc, {s}, BranchFlowTarget{1, 9, false}));
}

TEST_CASE("border-bus feature extraction, both input styles") {
  GridCase gc = parse_case_file(std::string(DATA_DIR) + "/case39.m");
  Snapshot s = solve_powerflow(gc);
  BorderBusTarget t;
  t.bus = 17;
  t.reactive = false;
  t.border_buses = {3, 9, 17};
  t.internal_buses = {4, 5, 6, 7, 8, 10, 11, 12, 13, 14, 15, 16, 18, 19, 20, 21, 22, 23, 24, 31, 32, 33, 34, 35, 36};
  RawDataset lr = extract_features(gc, {s}, t);
  CHECK(lr.values.cols() == 2 * 2 + 2 + 1);  // composite pairs + vi2 + vi + target
  t.svr_inputs = true;
  RawDataset sv = extract_features(gc, {s}, t);
  CHECK(sv.values.cols() == 1 + 2 + 2 + 2 + 1);  // vi, vj..., sin..., cos..., target

  // target equals the sum of flows from 17 into internal neighbours 16 and 18
  const int b1 = find_branch(gc, 16, 17);  // stored as 16-17: flow at the to side
  const int b2 = find_branch(gc, 17, 18);
  const double expect = s.flows[b1].pt + s.flows[b2].pf;
  CHECK(lr.values(0, lr.values.cols() - 1) == doctest::Approx(expect).epsilon(1e-12));
}
