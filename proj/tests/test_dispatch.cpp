#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "carbonlace/dispatch.hpp"

using namespace carbonlace;
using namespace carbonlace::dispatch;

namespace {

const std::string kDataDir = CARBONLACE_DATA_DIR;

GridCase load(const std::string& name) {
  std::ifstream in(kDataDir + name);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  bool mp = name.size() > 2 && name.substr(name.size() - 2) == ".m";
  return parse_case(ss.str(), mp ? CaseDialect::MatpowerSubset : CaseDialect::Native);
}

GridCase case30_with_fuels() {
  return apply_fuel_assignment(load("/case30.m"), FuelTable{},
                               {{1, Fuel::CCGT}, {2, Fuel::PEL}, {13, Fuel::PEL},
                                {22, Fuel::ANT}, {23, Fuel::ANT}, {27, Fuel::ANT}});
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("two-bus dispatch reproduces the congestion story") {
  GridCase c = load("/case2.json");
  DcopfModel model = build_model(c);

  DispatchResult r55 = solve_dispatch(model, vec2(5, 5));
  CHECK(r55.g_star[0] == doctest::Approx(10.0));
  CHECK(r55.g_star[1] == doctest::Approx(0.0));
  CHECK(r55.total_emissions == doctest::Approx(10.0));

  DispatchResult r46 = solve_dispatch(model, vec2(4, 6));
  CHECK(r46.g_star[0] == doctest::Approx(9.0));
  CHECK(r46.g_star[1] == doctest::Approx(1.0));
  CHECK(r46.total_emissions == doctest::Approx(9.0));
  CHECK(r46.flows[0] == doctest::Approx(5.0));  // line at its limit

  DispatchResult zero = solve_dispatch(model, vec2(0, 0));
  CHECK(zero.g_star.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(zero.objective == doctest::Approx(0.0));
}

TEST_CASE("dispatch result satisfies its arithmetic invariants") {
  GridCase c = case30_with_fuels();
  DcopfModel model = build_model(c);
  Eigen::VectorXd d(model.n_load());
  for (int i = 0; i < d.size(); ++i) d[i] = model.grid.loads[i].nominal_mw * 1.2;
  DispatchResult r = solve_dispatch(model, d);
  CHECK(std::abs(r.total_emissions - r.per_gen_emissions.sum()) <= 1e-9);
  for (int j = 0; j < model.n_gen(); ++j)
    CHECK(r.per_gen_emissions[j] == doctest::Approx(model.emission_factors[j] * r.g_star[j]).epsilon(1e-12));
  CHECK(std::abs(r.g_star.sum() - d.sum()) <= 1e-6);
  MESSAGE("case30 E at 120% load: " << r.total_emissions);
}

TEST_CASE("two-bus LMCE values and degeneracy flags") {
  GridCase c = load("/case2.json");
  DcopfModel model = build_model(c);

  LmceVector at46 = compute_lmce(model, vec2(4, 6), LmceMethod::Basis);
  CHECK(at46.mu[0] == 1.0);
  CHECK(at46.mu[1] == 0.0);
  CHECK(at46.degenerate_flags[0] == 0);
  CHECK(at46.degenerate_flags[1] == 0);

  LmceVector at55 = compute_lmce(model, vec2(5, 5), LmceMethod::Basis);
  CHECK(at55.mu[0] == doctest::Approx(1.0));
  CHECK(at55.mu[1] == doctest::Approx(1.0));
  CHECK(at55.degenerate_flags[1] == 1);  // boundary of congestion

  LmceVector fd46 = compute_lmce(model, vec2(4, 6), LmceMethod::FiniteDiff);
  CHECK(fd46.mu[0] == doctest::Approx(1.0));
  CHECK(fd46.mu[1] == doctest::Approx(0.0));

  LmceVector fd55 = compute_lmce(model, vec2(5, 5), LmceMethod::FiniteDiff);
  CHECK(fd55.degenerate_flags[1] == 1);
}

TEST_CASE("basis and finite-difference LMCE agree where unflagged") {
  GridCase c = case30_with_fuels();
  DcopfModel model = build_model(c);
  for (double scale : {1.0, 1.15, 1.25}) {
    Eigen::VectorXd d(model.n_load());
    for (int i = 0; i < d.size(); ++i) d[i] = model.grid.loads[i].nominal_mw * scale;
    LmceVector basis = compute_lmce(model, d, LmceMethod::Basis);
    LmceVector fdiff = compute_lmce(model, d, LmceMethod::FiniteDiff);
    for (int i = 0; i < d.size(); ++i) {
      if (!basis.degenerate_flags[i] && !fdiff.degenerate_flags[i]) {
        CHECK(basis.mu[i] == doctest::Approx(fdiff.mu[i]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("uncongested LMCE entries all equal the marginal emission factor") {
  GridCase c = case30_with_fuels();
  DcopfModel model = build_model(c);
  Eigen::VectorXd d(model.n_load());
  // 80% loading leaves every line limit slack under linear-cost dispatch
  for (int i = 0; i < d.size(); ++i) d[i] = model.grid.loads[i].nominal_mw * 0.8;
  LmceVector v = compute_lmce(model, d, LmceMethod::Basis);
  double fmin = model.emission_factors.minCoeff();
  double fmax = model.emission_factors.maxCoeff();
  for (int i = 0; i < d.size(); ++i) {
    CHECK(v.mu[i] >= fmin - 1e-6);
    CHECK(v.mu[i] <= fmax + 1e-6);
    CHECK(v.mu[i] == doctest::Approx(v.mu[0]).epsilon(1e-9));
  }
}

TEST_CASE("dispatch jacobian is consistent with LMCE and the cheap-unit picture") {
  GridCase c = load("/case2.json");
  DcopfModel model = build_model(c);

  SUBCASE("uncongested: every column is the cheapest generator's indicator") {
    Eigen::MatrixXd j = dispatch_jacobian(model, vec2(2, 2));
    for (int i = 0; i < 2; ++i) {
      CHECK(j(0, i) == doctest::Approx(1.0));
      CHECK(j(1, i) == doctest::Approx(0.0));
    }
  }

  SUBCASE("f' J reproduces the basis LMCE exactly") {
    Eigen::MatrixXd j = dispatch_jacobian(model, vec2(4, 6));
    LmceVector v = compute_lmce(model, vec2(4, 6), LmceMethod::Basis);
    Eigen::VectorXd via_j = j.transpose() * model.emission_factors;
    for (int i = 0; i < 2; ++i) CHECK(via_j[i] == v.mu[i]);
  }
}

TEST_CASE("emissions are piecewise linear along a load ray") {
  GridCase c = case30_with_fuels();
  DcopfModel model = build_model(c);
  Eigen::VectorXd d0(model.n_load());
  for (int i = 0; i < d0.size(); ++i) d0[i] = model.grid.loads[i].nominal_mw;

  const int points = 100;
  std::vector<double> e(points + 1);
  std::vector<std::vector<int>> active(points + 1);
  for (int k = 0; k <= points; ++k) {
    double scale = 1.0 + 0.3 * k / points;
    DispatchResult r = solve_dispatch(model, (d0 * scale).eval());
    e[k] = r.total_emissions;
    active[k] = r.active_set;
  }
  for (int k = 1; k + 1 <= points; ++k) {
    if (active[k - 1] == active[k] && active[k] == active[k + 1]) {
      double lin = 0.5 * (e[k - 1] + e[k + 1]);
      CHECK(std::abs(e[k] - lin) <= 1e-6 * (1.0 + std::abs(e[k])));
    }
  }
}

TEST_CASE("islanded network is rejected") {
  GridCase c = load("/case2.json");
  c.zones.reset();
  c.buses.push_back({3, 0});
  c.loads.push_back({3, 1.0});
  CHECK_THROWS_WITH_AS(build_model(c), doctest::Contains("islanded"), Error);
}

TEST_CASE("infeasible load vector names the load in the error") {
  GridCase c = load("/case2.json");
  DcopfModel model = build_model(c);
  CHECK_THROWS_WITH_AS(solve_dispatch(model, vec2(40, 40)), doctest::Contains("load vector"), Error);
}
