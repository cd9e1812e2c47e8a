#include <cmath>

#include "doctest.h"
#include "json.hpp"
#include "rbsde/stopping.hpp"
#include "support.hpp"

using namespace rbsde;
using namespace rbsde::testing;

namespace {

const RegressionBasis kBasis({Feature::state(0)}, 3, 1e-8);

BundleFactory factory(const FsdeCoefficients& c, double dt, std::size_t paths, std::uint64_t seed) {
  return [c, dt, paths, seed](double t) {
    return simulate_driftless(c, build_grid(t, static_cast<std::size_t>(std::lround(t / dt))), paths, seed);
  };
}

RobustStoppingProblem zero_game() {
  auto pb = bang_bang(2.0);
  pb.ham.psi = [](const PathPrefix&) { return 0.0; };
  pb.ham.cg_psi = 0.0;
  return pb;
}

/// Log-price with drift fixed by a one-point control set; discounted put reward.
RobustStoppingProblem singleton_put() {
  RobustStoppingProblem pb;
  pb.coeffs = controlled_1d([](const PathPrefix&, const Eigen::VectorXd& a) { return a; }, 0.3, 0.0, 1.0);
  pb.coeffs.k_L = 1.0;
  pb.control_set = interval(-0.1, -0.1, 1);
  pb.ham.phi = [](const PathPrefix&, const Eigen::VectorXd&) { return 0.0; };
  pb.ham.psi = [](const PathPrefix& p) { return std::max(1.1 - std::exp(p.x[0]), 0.0); };
  pb.ham.rho = [](double t) { return t; };
  pb.ham.q = 0.0;
  pb.ham.cg_phi = 0.0;
  pb.ham.cg_psi = 1.1;
  pb.schedule.levels_m = {6};
  pb.schedule.levels_n = {6};
  pb.schedule.levels_l = {6};
  pb.schedule.t_solve = 6.0;
  pb.schedule.tol = 1e-2;
  return pb;
}

}  // namespace

TEST_CASE("zero game: zero driver, zero barrier, zero value, exact saddle") {
  const auto pb = zero_game();
  const auto inf = build_rbsde(pb);
  const auto b = simulate_driftless(pb.coeffs, build_grid(2.0, 20), 50, 1);
  for (std::size_t p = 0; p < 50; p += 7)
    for (std::size_t i = 0; i <= 20; i += 3) {
      CHECK(inf.driver(b.prefix(p, i), 0.3, vec({0.0})) == 0.0);
      CHECK(inf.barrier(b.prefix(p, i)) == 0.0);
    }
  const auto sol = solve_infinite(inf, pb.schedule, factory(pb.coeffs, 0.1, 500, 2), kBasis);
  REQUIRE(sol.report.converged);
  CHECK(sol.limit.y.cwiseAbs().maxCoeff() == 0.0);
  const auto pair = extract_pair(sol, pb);
  const auto rep = saddle_check(pb, sol, pair, standard_stopping_challengers(pb, 3),
                                constant_control_challengers(pb.control_set), 500, 4, 0.0);
  CHECK(rep.y0 == 0.0);
  CHECK(rep.optimal.mean == 0.0);
  CHECK(rep.value_gap == 0.0);
  CHECK(rep.exceedances == 0);
  CHECK(rep.gate);
  for (const auto& c : rep.challengers) CHECK(c.mean == 0.0);
}

TEST_CASE("singleton control set needs no minimization") {
  auto pb = bang_bang();
  pb.control_set = interval(0.4, 0.4, 1);
  pb.ham.phi = [](const PathPrefix& p, const Eigen::VectorXd& a) { return std::cos(p.x[0]) * a[0]; };
  pb.ham.cg_phi = 1.0;
  const auto inf = build_rbsde(pb);
  const auto b = simulate_driftless(pb.coeffs, build_grid(8.0, 40), 20, 1);
  for (std::size_t p = 0; p < 20; ++p)
    for (std::size_t i = 0; i <= 40; i += 5) {
      const auto pre = b.prefix(p, i);
      for (double z : {-2.0, 0.0, 1.5}) {
        const double expected = z * 0.4 + std::exp(-pre.t) * std::cos(pre.x[0]) * 0.4;
        CHECK(inf.driver(pre, 0.0, vec({z})) == doctest::Approx(expected).epsilon(1e-14));
      }
    }
}

TEST_CASE("linear minimization gives -kappa |z| in the controlled coordinate") {
  const double kappa = 0.7;
  RobustStoppingProblem pb = bang_bang();
  auto& c = pb.coeffs;
  c.dim1 = 1;
  c.dim2 = 1;
  c.a1 = [](const PathPrefix&) { return vec({0.0}); };
  c.sigma11 = [](const PathPrefix&) { return Eigen::MatrixXd::Identity(1, 1).eval(); };
  c.sigma21 = [](const PathPrefix&) { return Eigen::MatrixXd::Zero(1, 1).eval(); };
  c.x0 = vec({0.0, 0.0});
  c.cg_sigma = [](double) { return std::sqrt(2.0) * 1.0001; };  // Frobenius norm of I_2
  pb.control_set = interval(-kappa, kappa, 5);
  const auto inf = build_rbsde(pb);
  const double x[] = {0.3, -0.2};
  const PathPrefix pre(0, 0, 1.0, x, 2, 0.36);
  for (double z1 : {-1.0, 2.0})
    for (double z2 : {-1.5, 0.0, 0.8}) CHECK(inf.driver(pre, 0.0, vec({z1, z2})) == doctest::Approx(-kappa * std::abs(z2)));
}

TEST_CASE("inadmissible discount and failed validators are rejected with a report") {
  auto pb = bang_bang();
  pb.ham.q = 1.0;
  pb.ham.cg_psi = 2.0;
  pb.ham.rho = [](double t) { return 0.4 * t; };  // slope 0.4 < q C_a = 1
  try {
    build_rbsde(pb);
    FAIL("expected ProblemRejected");
  } catch (const ProblemRejected& e) {
    const auto report = nlohmann::json::parse(e.report());
    CHECK(report["check"] == "rho_admissible");
    CHECK(report["epsilon"].get<double>() <= 0.0);
  }
  pb.ham.rho = [](double t) { return 2.0 * t; };
  CHECK_NOTHROW(build_rbsde(pb));
  auto big = bang_bang();
  big.ham.psi = [](const PathPrefix& p) { return 10.0 + p.x[0] * p.x[0]; };
  CHECK_THROWS_AS(build_rbsde(big), ProblemRejected);
}

TEST_CASE("barrier is the discounted stopping reward") {
  const auto pb = bang_bang();
  const auto inf = build_rbsde(pb);
  const double x[] = {1.3};
  const PathPrefix pre(0, 0, 2.0, x, 1, 1.3);
  CHECK(inf.barrier(pre) == doctest::Approx(std::exp(-2.0) * (1.0 - std::exp(-1.69))));
}

TEST_CASE("value of explicit rules") {
  auto pb = bang_bang(8.0);
  pb.ham.phi = [](const PathPrefix&, const Eigen::VectorXd&) { return 1.0; };
  pb.ham.psi = [](const PathPrefix&) { return 0.0; };
  pb.ham.cg_phi = 1.0;
  pb.ham.cg_psi = 0.0;
  const auto grid = build_grid(8.0, 200);
  const ControlPolicy zero = [](const PathPrefix&) { return vec({0.0}); };
  const auto never = evaluate_J(pb, [](const PathPrefix&) { return false; }, zero, grid, 100, 5);
  double riemann = 0.0;
  for (std::size_t i = 0; i < 200; ++i) riemann += std::exp(-grid.time(i)) * grid.dt();
  CHECK(never.mean == doctest::Approx(riemann).epsilon(1e-12));
  CHECK(std::abs(never.mean - (1.0 - std::exp(-8.0))) <= grid.dt());
  CHECK(never.std_error <= 1e-12);
  CHECK(never.unstopped_fraction == 1.0);
  CHECK(never.horizon_used == 8.0);

  const auto bb = bang_bang(8.0);
  const auto now = evaluate_J(bb, [](const PathPrefix&) { return true; }, zero, grid, 100, 5);
  CHECK(now.mean == bb.ham.psi(PathPrefix(0, 0, 0.0, bb.coeffs.x0.data(), 1, 0.0)));
  CHECK(now.std_error == 0.0);
  CHECK_THROWS_AS(evaluate_J(bb, nullptr, zero, grid, 10, 1), std::invalid_argument);
}

TEST_CASE("policy never stops early when Y stays above the barrier") {
  auto pb = bang_bang(8.0);
  pb.ham.phi = [](const PathPrefix&, const Eigen::VectorXd&) { return 1.0; };
  pb.ham.psi = [](const PathPrefix&) { return 0.0; };
  pb.ham.cg_phi = 1.0;
  pb.ham.cg_psi = 0.0;
  const auto inf = build_rbsde(pb);
  const auto sol = solve_infinite(inf, pb.schedule, factory(pb.coeffs, 0.04, 500, 6), kBasis);
  REQUIRE(sol.report.converged);
  const auto& lim = sol.limit;
  const Eigen::Index last = lim.y.cols() - 1;
  CHECK((lim.y.leftCols(last) - lim.barrier.leftCols(last)).minCoeff() > 0.0);
  const auto pair = extract_pair(sol, pb);
  const auto j = evaluate_J(pb, pair, 200, 7);
  double riemann = 0.0;
  for (std::size_t i = 0; i < 200; ++i) riemann += std::exp(-pair.grid.time(i)) * pair.grid.dt();
  CHECK(j.mean == doctest::Approx(riemann).epsilon(1e-12));
  CHECK(std::abs(sol.limit.y0.mean - j.mean) <= 1e-6);
}

TEST_CASE("immediate stopping when the reward peaks at the start") {
  auto pb = bang_bang(8.0);
  pb.ham.psi = [](const PathPrefix& p) { return std::exp(-p.x[0] * p.x[0]); };
  const auto inf = build_rbsde(pb);
  const auto sol = solve_infinite(inf, pb.schedule, factory(pb.coeffs, 0.08, 2000, 8), kBasis);
  REQUIRE(sol.report.converged);
  const auto pair = extract_pair(sol, pb);
  CHECK(sol.limit.y0.mean == doctest::Approx(1.0));
  const auto j = evaluate_J(pb, pair, 300, 9);
  CHECK(j.mean == 1.0);
  CHECK(j.std_error == 0.0);
}

TEST_CASE("non-converged solutions are rejected") {
  auto pb = bang_bang(2.0);
  InfiniteSolution bad{RbsdeSolution{}, simulate_driftless(pb.coeffs, build_grid(2.0, 4), 2, 1), ConvergenceReport{}};
  bad.report.converged = false;
  bad.report.failures = {"doubling"};
  CHECK_THROWS_AS(extract_pair(bad, pb), std::invalid_argument);
}

TEST_CASE("bang-bang selector, feasibility and adaptedness of the pair") {
  auto pb = bang_bang(6.0);
  const auto inf = build_rbsde(pb);
  const auto sol = solve_infinite(inf, pb.schedule, factory(pb.coeffs, 0.05, 2000, 10), kBasis);
  REQUIRE(sol.report.converged);
  const auto pair = extract_pair(sol, pb);
  const double x[] = {0.4};
  const PathPrefix pre(0, 3, 0.15, x, 1, 0.4);
  for (double z : {-2.0, -0.1, 0.3, 5.0}) CHECK(pair.control_map(pre, vec({z}))[0] == (z > 0 ? -1.0 : 1.0));

  auto fresh = simulate_driftless(pb.coeffs, pair.grid, 50, 77);
  for (std::size_t p = 0; p < 50; p += 5)
    for (std::size_t i = 0; i < pair.grid.n_nodes(); i += 7) {
      CHECK(pb.control_set.contains(pair.control(fresh.prefix(p, i)), 0.0));
      const bool decision = pair.stop_rule(fresh.prefix(p, i));
      auto replay = fresh;
      for (std::size_t j = i + 1; j < pair.grid.n_nodes(); ++j) {
        replay.state(p, j).setZero();
        replay.running_sup(p, j) = 0.0;
      }
      CHECK(pair.stop_rule(replay.prefix(p, i)) == decision);
    }
}

TEST_CASE("refined selector stays inside the control set") {
  auto pb = bang_bang(4.0);
  pb.control_set = interval(-0.75, 0.5, 7, 6);
  pb.ham.phi = [](const PathPrefix&, const Eigen::VectorXd& a) { return a[0] * a[0]; };
  pb.ham.cg_phi = 1.0;
  const auto ham = completed_hamiltonian(pb);
  const double x[] = {0.0};
  for (double z : {-3.0, -0.4, 0.0, 0.2, 4.0}) {
    const auto m = min_hamiltonian(ham, pb.control_set, PathPrefix(0, 0, 0.0, x, 1, 0.0), vec({z}));
    CHECK(pb.control_set.contains(m.argmin, 0.0));
  }
}

TEST_CASE("challenger suites") {
  const auto pb = bang_bang();
  const auto rules = standard_stopping_challengers(pb, 11);
  CHECK(rules.size() == 5);
  const auto again = standard_stopping_challengers(pb, 11);
  for (std::size_t k = 0; k < 5; ++k) CHECK(rules[k].name == again[k].name);
  const auto three = constant_control_challengers(interval(-1, 1, 3));
  REQUIRE(three.size() == 3);
  const double x[] = {0.0};
  const PathPrefix pre(0, 0, 0.0, x, 1, 0.0);
  CHECK(three[0].policy(pre)[0] == -1.0);
  CHECK(three[1].policy(pre)[0] == 0.0);
  CHECK(three[2].policy(pre)[0] == 1.0);
  CHECK(constant_control_challengers(interval(-1, 1, 21)).size() == 9);
}

TEST_CASE("pure optimal stopping with a singleton control set matches the lattice") {
  const auto pb = singleton_put();
  const auto inf = build_rbsde(pb);
  const std::size_t n = 120;
  const RegressionBasis basis({Feature::state(0)}, 4, 1e-10);
  const auto sol = solve_infinite(inf, pb.schedule, factory(pb.coeffs, 6.0 / n, 20000, 12), basis);
  REQUIRE(sol.report.converged);
  const auto pair = extract_pair(sol, pb);
  const auto j = evaluate_J(pb, pair, 20000, 13);

  MarkovianProblem mp;
  mp.drift = [](double, double) { return -0.1; };
  mp.vol = [](double, double) { return 0.3; };
  mp.barrier = [](double t, double x) { return std::exp(-t) * std::max(1.1 - std::exp(x), 0.0); };
  mp.terminal = [](double) { return 0.0; };
  mp.t_max = 6.0;
  mp.exercise_steps = n;
  mp.substeps = 10;
  const double lattice = lattice_oracle(mp).value0;
  CHECK(std::abs(j.mean - lattice) <= 0.01 * lattice + 3.0 * j.std_error);
  CHECK(std::abs(sol.limit.y0.mean - lattice) <= 0.01 * lattice + 3.0 * sol.limit.y0.std_error);

  const auto rep = saddle_check(pb, sol, pair, standard_stopping_challengers(pb, 14),
                                constant_control_challengers(pb.control_set), 20000, 15, 0.0);
  CHECK(rep.value_ok);
  for (const auto& c : rep.challengers)
    if (c.kind == "stopping") CHECK(c.mean <= rep.y0 + c.band);
  CHECK(rep.gate);
}
