#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <sstream>

#include "carbonlace/case.hpp"

using namespace carbonlace;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kDataDir = CARBONLACE_DATA_DIR;

std::map<int, Fuel> table1_fuels() {
  return {{1, Fuel::CCGT}, {2, Fuel::PEL}, {13, Fuel::PEL},
          {22, Fuel::ANT}, {23, Fuel::ANT}, {27, Fuel::ANT}};
}

}  // namespace

TEST_CASE("two-bus native case parses with expected shape") {
  GridCase c = parse_case(read_file(kDataDir + "/case2.json"), CaseDialect::Native);
  CHECK(c.buses.size() == 2);
  CHECK(c.lines.size() == 1);
  CHECK(c.lines[0].flow_limit == 5.0);
  CHECK(c.generators.size() == 2);
  CHECK(c.generators[0].emission_factor == 1.0);
  CHECK(c.generators[1].emission_factor == 0.0);
  CHECK(c.slack_bus == 1);
}

TEST_CASE("case30 MATPOWER subset parses: 6 generators, 20 loads") {
  ParseReport rep;
  GridCase c = parse_case(read_file(kDataDir + "/case30.m"), CaseDialect::MatpowerSubset, &rep);
  CHECK(c.buses.size() == 30);
  CHECK(c.generators.size() == 6);
  CHECK(c.loads.size() == 20);
  CHECK(c.lines.size() == 41);
  CHECK(c.slack_bus == 1);
  std::set<int> gen_buses;
  for (const auto& g : c.generators) gen_buses.insert(g.bus);
  CHECK(gen_buses == std::set<int>{1, 2, 13, 22, 23, 27});
  // loads are bus-ascending
  for (std::size_t i = 1; i < c.loads.size(); ++i) CHECK(c.loads[i - 1].bus < c.loads[i].bus);
  CHECK(c.loads[0].bus == 2);
  CHECK(c.loads[0].nominal_mw == 21.7);
  // linear cost term extracted from quadratic gencost rows
  CHECK(c.generators[0].cost_linear == 2.0);
  CHECK(c.generators[2].cost_linear == 1.0);
}

TEST_CASE("Table-style fuel assignment sets factors") {
  GridCase c = parse_case(read_file(kDataDir + "/case30.m"), CaseDialect::MatpowerSubset);
  GridCase with_fuels = apply_fuel_assignment(c, FuelTable{}, table1_fuels());
  for (const auto& g : with_fuels.generators) {
    if (g.bus == 1) CHECK(g.emission_factor == doctest::Approx(0.3625));
    if (g.bus == 2 || g.bus == 13) CHECK(g.emission_factor == doctest::Approx(0.7018));
    if (g.bus == 22 || g.bus == 23 || g.bus == 27) CHECK(g.emission_factor == doctest::Approx(0.9143));
  }
  SUBCASE("empty mapping is the identity") {
    GridCase same = apply_fuel_assignment(c, FuelTable{}, {});
    CHECK(same == c);
  }
  SUBCASE("bus without generator is an error") {
    CHECK_THROWS_WITH_AS(apply_fuel_assignment(c, FuelTable{}, {{99, Fuel::CCGT}}),
                         doctest::Contains("no generator at bus 99"), Error);
  }
}

TEST_CASE("empty generator section is a semantic error") {
  std::string text = R"(
mpc.baseMVA = 100;
mpc.bus = [ 1 3 0 0 0 0 1 1 0 135 1 1.05 0.95; 2 1 5 0 0 0 1 1 0 135 1 1.05 0.95; ];
mpc.gen = [ ];
mpc.branch = [ 1 2 0.01 0.1 0 10 10 10 0 0 1 -360 360; ];
)";
  CHECK_THROWS_WITH_AS(parse_case(text, CaseDialect::MatpowerSubset),
                       doctest::Contains("no generators"), Error);
}

TEST_CASE("unknown sections warn instead of failing") {
  std::string text = read_file(kDataDir + "/case30.m") + "\nmpc.bus_name = [ 1; 2 ];\n";
  ParseReport rep;
  GridCase c = parse_case(text, CaseDialect::MatpowerSubset, &rep);
  CHECK(c.buses.size() == 30);
  REQUIRE(!rep.warnings.empty());
  CHECK(rep.warnings[0].find("bus_name") != std::string::npos);
}

TEST_CASE("dangling line endpoint names the entity") {
  GridCase c = parse_case(read_file(kDataDir + "/case2.json"), CaseDialect::Native);
  c.lines.push_back({1, 7, 0.2, 3.0});
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("line 1"), Error);
}

TEST_CASE("fuel factor inconsistent with category is rejected") {
  GridCase c = parse_case(read_file(kDataDir + "/case2.json"), CaseDialect::Native);
  c.generators[0].fuel = Fuel::CCGT;  // factor stays 1.0, table says 0.3625
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("inconsistent with fuel"), Error);
}

TEST_CASE("native round-trip is the identity on bundled cases") {
  for (std::string name : {"/case2.json"}) {
    GridCase c = parse_case(read_file(kDataDir + name), CaseDialect::Native);
    GridCase back = parse_case(serialize_case(c), CaseDialect::Native);
    CHECK(back == c);
  }
  GridCase c30 = apply_fuel_assignment(
      parse_case(read_file(kDataDir + "/case30.m"), CaseDialect::MatpowerSubset), FuelTable{}, table1_fuels());
  GridCase back = parse_case(serialize_case(c30), CaseDialect::Native);
  CHECK(back == c30);

  SUBCASE("zone and cluster annotations round-trip") {
    ZoneMap z;
    z.K = 4;
    z.assignment.assign(c30.loads.size(), 0);
    for (std::size_t i = 0; i < z.assignment.size(); ++i) z.assignment[i] = static_cast<int>(i % 4);
    c30.zones = z;
    c30.clusters = ClusterAnnotation{2, std::vector<int>(c30.loads.size(), 1)};
    for (auto& v : c30.clusters->assignment) v = 0;
    c30.clusters->assignment[3] = 1;
    c30.clusters->count = 2;
    GridCase round = parse_case(serialize_case(c30), CaseDialect::Native);
    CHECK(round == c30);
  }
}

TEST_CASE("zone map invariants") {
  ZoneMap z{2, {0, 0, 1}};
  z.validate(3);
  CHECK_THROWS(ZoneMap{2, {0, 0, 0}}.validate(3));  // empty zone
  CHECK_THROWS(ZoneMap{2, {0, 1}}.validate(3));     // wrong cover
  auto ind = z.indicator();
  CHECK(ind[0] == std::vector<int>{1, 1, 0});
  CHECK(ind[1] == std::vector<int>{0, 0, 1});
}
