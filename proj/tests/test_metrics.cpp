#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "carbonlace/metrics.hpp"

using namespace carbonlace;
using namespace carbonlace::metrics;
using dispatch::DcopfModel;

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

TEST_CASE("ACE reproduces the two-bus rates") {
  DcopfModel m = dispatch::build_model(load("/case2.json"));
  CHECK(ace(m, vec2(4, 6)) == doctest::Approx(0.9));
  CHECK(ace(m, vec2(5, 5)) == doctest::Approx(1.0));
  CHECK_THROWS(ace(m, vec2(0, 0)));
}

TEST_CASE("ACE is zero on an all-clean system") {
  GridCase c = load("/case2.json");
  for (auto& g : c.generators) {
    g.fuel = Fuel::Other;
    g.emission_factor = 0.0;
  }
  CHECK(ace(c, vec2(3, 3)) == doctest::Approx(0.0));
}

TEST_CASE("two-bus LACE-R matches the reported path integrals") {
  DcopfModel m = dispatch::build_model(load("/case2.json"));
  MetricVector at46 = lace_r(m, vec2(4, 6), 600);
  CHECK(at46.values[0] == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(at46.values[1] == doctest::Approx(5.0 / 6.0).epsilon(2e-3));

  MetricVector at55 = lace_r(m, vec2(5, 5), 600);
  CHECK(at55.values[0] == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(at55.values[1] == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("uniform emission factors make LACE-R constant for any segment count") {
  GridCase c = load("/case2.json");
  for (auto& g : c.generators) {
    g.fuel = Fuel::Other;
    g.emission_factor = 0.42;
  }
  DcopfModel m = dispatch::build_model(c);
  for (int n : {2, 7, 50}) {
    MetricVector v = lace_r(m, vec2(4, 6), n);
    CHECK(v.values[0] == doctest::Approx(0.42).epsilon(1e-9));
    CHECK(v.values[1] == doctest::Approx(0.42).epsilon(1e-9));
  }
}

TEST_CASE("LACE-R balance against the emission difference along the path") {
  DcopfModel m = dispatch::build_model(case30_with_fuels());
  Eigen::VectorXd d(m.n_load());
  for (int i = 0; i < d.size(); ++i) d[i] = m.grid.loads[i].nominal_mw * 1.2;
  const int N = 200;
  MetricVector v = lace_r(m, d, N);
  double e_d = dispatch::solve_dispatch(m, d).total_emissions;
  double e_0 = dispatch::solve_dispatch(m, (0.0 * d).eval()).total_emissions;
  double fmax = m.emission_factors.maxCoeff();
  CHECK(std::abs(d.dot(v.values) - (e_d - e_0)) <= fmax * d.sum() / N);
  // with breakpoint capture the quadrature is near-exact
  CHECK(std::abs(d.dot(v.values) - (e_d - e_0)) <= 1e-4 * (1.0 + e_d));
}

TEST_CASE("LACE-R refinement error shrinks monotonically after breakpoint capture") {
  DcopfModel m = dispatch::build_model(load("/case2.json"));
  Eigen::VectorXd d = vec2(4, 6);
  const int k = 50;
  auto vals = [&](int n) { return lace_r(m, d, n).values; };
  Eigen::VectorXd vk = vals(k), v2k = vals(2 * k), v4k = vals(4 * k);
  double coarse = (vk - v2k).cwiseAbs().maxCoeff();
  double fine = (v2k - v4k).cwiseAbs().maxCoeff();
  CHECK(fine <= coarse + 1e-12);
}

TEST_CASE("zero-load entries take the endpoint LMCE and are flagged") {
  DcopfModel m = dispatch::build_model(load("/case2.json"));
  MetricVector v = lace_r(m, vec2(8, 0), 50);
  CHECK(v.flagged[1] == 1);
  CHECK(v.flagged[0] == 0);
  CHECK(v.values[1] == doctest::Approx(1.0));  // uncongested, marginal unit is G1
}

TEST_CASE("two-bus CEF hand-value: bus-2 intensity mixes line import with local gen") {
  DcopfModel m = dispatch::build_model(load("/case2.json"));
  MetricVector v = cef(m, vec2(4, 6));
  CHECK(v.values[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(v.values[1] == doctest::Approx(5.0 / 6.0).epsilon(1e-9));  // (5*1 + 1*0)/6
}

TEST_CASE("single-bus CEF equals the running generator's factor") {
  GridCase c;
  c.base_mva = 100;
  c.buses = {{1, 0}};
  c.generators = {{1, 5.0, 0.0, 50.0, Fuel::Other, 0.77}};
  c.loads = {{1, 10.0}};
  c.slack_bus = 1;
  Eigen::VectorXd d(1);
  d << 10.0;
  MetricVector v = cef(c, d);
  CHECK(v.values[0] == doctest::Approx(0.77).epsilon(1e-12));
}

TEST_CASE("CEF conserves emissions and stays within factor range") {
  DcopfModel m = dispatch::build_model(case30_with_fuels());
  double fmin = m.emission_factors.minCoeff();
  double fmax = m.emission_factors.maxCoeff();
  for (double scale : {0.8, 1.1, 1.2, 1.3}) {
    Eigen::VectorXd d(m.n_load());
    for (int i = 0; i < d.size(); ++i) d[i] = m.grid.loads[i].nominal_mw * scale;
    MetricVector v = cef(m, d);
    double e = dispatch::solve_dispatch(m, d).total_emissions;
    CHECK(std::abs(d.dot(v.values) - e) <= 1e-6 * e);
    for (int i = 0; i < v.values.size(); ++i) {
      CHECK(v.values[i] >= fmin - 1e-9);
      CHECK(v.values[i] <= fmax + 1e-9);
    }
  }
}

TEST_CASE("metric vectors are invariant to generator ordering") {
  GridCase c = load("/case2.json");
  GridCase swapped = c;
  std::swap(swapped.generators[0], swapped.generators[1]);
  Eigen::VectorXd d = vec2(4, 6);
  CHECK(ace(c, d) == doctest::Approx(ace(swapped, d)).epsilon(1e-12));
  CHECK((cef(c, d).values - cef(swapped, d).values).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((lace_r(c, d, 100).values - lace_r(swapped, d, 100).values).cwiseAbs().maxCoeff() <= 1e-9);
}
