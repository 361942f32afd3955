#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carbonlace/util.hpp"

namespace carbonlace {

enum class Fuel { CCGT, PEL, ANT, Other };

std::string fuel_name(Fuel f);
Fuel fuel_from_name(const std::string& name);

// Built-in CO2e intensities (tCO2e/MWh) per fuel category.
struct FuelTable {
  std::map<Fuel, double> factor = {
      {Fuel::CCGT, 0.3625},
      {Fuel::PEL, 0.7018},
      {Fuel::ANT, 0.9143},
  };
  double lookup(Fuel f) const;
};

struct Bus {
  int id = 0;
  int zone_id = 0;
  bool operator==(const Bus&) const = default;
};

struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double reactance = 0.0;   // p.u.
  double flow_limit = 0.0;  // MW
  bool operator==(const Line&) const = default;
};

struct Generator {
  int bus = 0;
  double cost_linear = 0.0;  // $/MWh
  double g_min = 0.0;        // MW
  double g_max = 0.0;        // MW
  Fuel fuel = Fuel::Other;
  double emission_factor = 0.0;  // tCO2e/MWh
  bool operator==(const Generator&) const = default;
};

struct Load {
  int bus = 0;
  double nominal_mw = 0.0;
  bool operator==(const Load&) const = default;
};

// Partition of loads into K market zones. `assignment[i]` is the zone of load i.
struct ZoneMap {
  int K = 0;
  std::vector<int> assignment;
  bool operator==(const ZoneMap&) const = default;

  // K x D binary indicator; row k marks loads of zone k.
  std::vector<std::vector<int>> indicator() const;
  void validate(int n_loads) const;
};

struct ClusterAnnotation {
  int count = 0;
  std::vector<int> assignment;
  bool operator==(const ClusterAnnotation&) const = default;
};

struct GridCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  int slack_bus = 0;
  std::optional<ZoneMap> zones;
  std::optional<ClusterAnnotation> clusters;
  bool operator==(const GridCase&) const = default;

  int bus_index(int bus_id) const;  // -1 when absent
  void validate(const FuelTable& table = FuelTable{}) const;
};

enum class CaseDialect { MatpowerSubset, Native };

struct ParseReport {
  std::vector<std::string> warnings;
};

GridCase parse_case(const std::string& text, CaseDialect dialect, ParseReport* report = nullptr);
GridCase apply_fuel_assignment(const GridCase& c, const FuelTable& table, const std::map<int, Fuel>& bus_to_fuel);
std::string serialize_case(const GridCase& c);

GridCase load_case_file(const std::string& path, ParseReport* report = nullptr);  // dialect by extension
std::uint64_t case_hash(const GridCase& c);

}  // namespace carbonlace
