// LP/MILP backend tests: trivial cases, degenerate instances, random
// cross-checks against the independent tableau oracle, enumeration-oracle
// equivalence for small MILPs, determinism, certificates.

#include "doctest.h"

#include <cmath>

#include "mrc/optim.hpp"
#include "mrc/rng.hpp"
#include "oracle_simplex.hpp"

using namespace mrc::optim;

TEST_CASE("lp: max x s.t. x <= 3, x >= 0") {
  MilpInstance inst;
  const int x = inst.add_var(0.0, kInf, 1.0);
  inst.add_row_le({{x, 1.0}}, 3.0);
  auto sol = solve_lp(inst);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(sol.z[x] == doctest::Approx(3.0));
}

TEST_CASE("lp: bound flip only, no rows needed") {
  MilpInstance inst;
  const int a = inst.add_var(0.0, 1.0, 1.0);
  const int b = inst.add_var(0.0, 1.0, 1.0);
  inst.add_row_le({{a, 1.0}, {b, 1.0}}, 10.0);
  auto sol = solve_lp(inst);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective == doctest::Approx(2.0));
}

TEST_CASE("lp: degenerate instance with redundant rows converges") {
  // multiple copies of the same facet plus zero-step vertices
  MilpInstance inst;
  const int x = inst.add_var(0.0, kInf, 0.75);
  const int y = inst.add_var(0.0, kInf, -150.0);
  const int z = inst.add_var(0.0, kInf, 0.02);
  const int w = inst.add_var(0.0, kInf, -6.0);
  // Beale's cycling example constraints
  inst.add_row_le({{x, 0.25}, {y, -60.0}, {z, -0.04}, {w, 9.0}}, 0.0);
  inst.add_row_le({{x, 0.5}, {y, -90.0}, {z, -0.02}, {w, 3.0}}, 0.0);
  inst.add_row_le({{z, 1.0}}, 1.0);
  inst.add_row_le({{z, 1.0}}, 1.0);  // redundant
  inst.add_row_le({{x, 0.25}, {y, -60.0}, {z, -0.04}, {w, 9.0}}, 0.0);  // redundant
  auto sol = solve_lp(inst);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("lp: infeasible with certificate") {
  MilpInstance inst;
  const int x = inst.add_var(2.0, kInf, 1.0);
  inst.add_row_le({{x, 1.0}}, 1.0);
  auto sol = solve_lp(inst);
  REQUIRE(sol.status == SolveStatus::infeasible);
  CHECK(!sol.farkas_ray.empty());
}

TEST_CASE("lp: unbounded with direction") {
  MilpInstance inst;
  const int x = inst.add_var(-kInf, kInf, 1.0);
  const int y = inst.add_var(0.0, 5.0, 0.0);
  inst.add_row_le({{x, -1.0}, {y, 1.0}}, 4.0);
  auto sol = solve_lp(inst);
  REQUIRE(sol.status == SolveStatus::unbounded);
  REQUIRE(!sol.unbounded_dir.empty());
  // direction must increase the objective
  double c_dot = 0.0;
  for (int j = 0; j < inst.num_vars(); ++j) c_dot += inst.obj[j] * sol.unbounded_dir[j];
  CHECK(c_dot > 1e-9);
}

static MilpInstance random_lp(mrc::Rng& rng, int m, int n, bool boxed) {
  MilpInstance inst;
  for (int j = 0; j < n; ++j) {
    const double c = rng.uniform(-2.0, 2.0);
    if (boxed) {
      const double l = rng.uniform(-3.0, 0.0);
      inst.add_var(l, l + rng.uniform(0.5, 4.0), c);
    } else {
      const int kind = static_cast<int>(rng.next_u64() % 3);
      if (kind == 0) inst.add_var(0.0, kInf, c);
      else if (kind == 1) inst.add_var(-1.0, 2.5, c);
      else inst.add_var(0.0, 3.0, c);
    }
  }
  for (int i = 0; i < m; ++i) {
    std::vector<RowTerm> terms;
    for (int j = 0; j < n; ++j)
      if (rng.uniform01() < 0.6) terms.push_back({j, rng.uniform(-1.5, 1.5)});
    if (terms.empty()) terms.push_back({0, 1.0});
    const int kind = static_cast<int>(rng.next_u64() % 3);
    const double r1 = rng.uniform(-1.0, 6.0);
    if (kind == 0) inst.add_row_le(terms, r1);
    else if (kind == 1) inst.add_row(r1 - rng.uniform(0.5, 3.0), terms, r1);
    else inst.add_row_eq(terms, rng.uniform(-0.5, 0.5));
  }
  return inst;
}

TEST_CASE("lp: random 10x20 instances match tableau oracle within 1e-8") {
  mrc::Rng rng(20240817);
  int solved = 0;
  for (int t = 0; t < 60; ++t) {
    MilpInstance inst = random_lp(rng, 10, 20, t % 2 == 0);
    auto ours = solve_lp(inst);
    auto ref = oracle::tableau_solve(inst);
    REQUIRE(ours.status == ref.status);
    if (ours.status == SolveStatus::optimal) {
      CHECK(ours.objective == doctest::Approx(ref.objective).epsilon(1e-8));
      ++solved;
    }
  }
  CHECK(solved > 20);  // the generator should produce plenty of solvable LPs
}

TEST_CASE("milp: all binaries fixed by bounds reduces to lp") {
  MilpInstance inst;
  const int x = inst.add_var(0.0, 10.0, 1.0);
  const int u = inst.add_var(0.0, 1.0, 0.5);
  inst.set_binary(u);
  inst.lb[u] = 1.0;  // fixed
  inst.add_row_le({{x, 1.0}, {u, 2.0}}, 6.0);
  auto sol = solve_milp(inst);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(sol.objective == doctest::Approx(4.0 + 0.5));
  CHECK(sol.z[u] == doctest::Approx(1.0));
}

TEST_CASE("milp: random instances with up to 12 binaries match enumeration oracle") {
  mrc::Rng rng(77001);
  for (int t = 0; t < 40; ++t) {
    const int nb = 4 + static_cast<int>(rng.next_u64() % 9);  // 4..12
    const int nc = 3 + static_cast<int>(rng.next_u64() % 4);
    MilpInstance inst;
    for (int j = 0; j < nc; ++j) inst.add_var(0.0, rng.uniform(0.5, 3.0), rng.uniform(-1.0, 2.0));
    for (int j = 0; j < nb; ++j) {
      const int v = inst.add_var(0.0, 1.0, rng.uniform(-2.0, 2.0));
      inst.set_binary(v);
    }
    for (int i = 0; i < 6; ++i) {
      std::vector<RowTerm> terms;
      for (int j = 0; j < inst.num_vars(); ++j)
        if (rng.uniform01() < 0.5) terms.push_back({j, rng.uniform(-1.0, 2.0)});
      if (terms.empty()) terms.push_back({0, 1.0});
      inst.add_row_le(terms, rng.uniform(1.0, 5.0));
    }
    auto ours = solve_milp(inst);
    auto ref = oracle::enumerate_milp(inst);
    REQUIRE(ours.status == ref.status);
    if (ours.status == SolveStatus::optimal) {
      CHECK(ours.objective == doctest::Approx(ref.objective).epsilon(1e-7));
      CHECK(ours.gap() <= 1e-7 * std::max(1.0, std::abs(ours.objective)) + 1e-12);
      for (int b : inst.binaries) CHECK(std::abs(ours.z[b] - std::round(ours.z[b])) <= 1e-9);
    }
  }
}

TEST_CASE("milp: determinism - identical instances give identical results") {
  mrc::Rng rng(5150);
  MilpInstance inst;
  for (int j = 0; j < 6; ++j) inst.add_var(0.0, 2.0, rng.uniform(-1.0, 1.0));
  for (int j = 0; j < 8; ++j) {
    const int v = inst.add_var(0.0, 1.0, rng.uniform(-1.0, 1.5));
    inst.set_binary(v);
  }
  for (int i = 0; i < 5; ++i) {
    std::vector<RowTerm> terms;
    for (int j = 0; j < inst.num_vars(); ++j) terms.push_back({j, rng.uniform(-1.0, 1.0)});
    inst.add_row_le(terms, 2.0);
  }
  auto a = solve_milp(inst);
  auto b = solve_milp(inst);
  REQUIRE(a.status == b.status);
  CHECK(a.objective == b.objective);
  CHECK(a.nodes == b.nodes);
  CHECK(a.z == b.z);
}

TEST_CASE("milp: binary cap precondition") {
  MilpInstance inst;
  for (int j = 0; j < 70; ++j) {
    const int v = inst.add_var(0.0, 1.0, 1.0);
    inst.set_binary(v);
  }
  CHECK_THROWS(solve_milp(inst));  // default limit 64
  MilpOptions opt;
  opt.max_binaries = 128;
  auto sol = solve_milp(inst, opt);
  CHECK(sol.status == SolveStatus::optimal);
  CHECK(sol.objective == doctest::Approx(70.0));
}

TEST_CASE("lp_format dump contains sections") {
  MilpInstance inst;
  const int x = inst.add_var(0.0, 2.0, 1.0, "alpha");
  const int u = inst.add_var(0.0, 1.0, 0.0, "u0");
  inst.set_binary(u);
  inst.add_row_le({{x, 1.0}, {u, -3.0}}, 1.5);
  const std::string s = lp_format(inst);
  CHECK(s.find("Maximize") != std::string::npos);
  CHECK(s.find("Subject To") != std::string::npos);
  CHECK(s.find("Binaries") != std::string::npos);
  CHECK(s.find("alpha") != std::string::npos);
}
