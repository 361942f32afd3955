#include "carbonlace/case.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace carbonlace {

using nlohmann::json;

std::string fuel_name(Fuel f) {
  switch (f) {
    case Fuel::CCGT: return "CCGT";
    case Fuel::PEL: return "PEL";
    case Fuel::ANT: return "ANT";
    case Fuel::Other: return "OTHER";
  }
  return "OTHER";
}

Fuel fuel_from_name(const std::string& name) {
  if (name == "CCGT") return Fuel::CCGT;
  if (name == "PEL") return Fuel::PEL;
  if (name == "ANT") return Fuel::ANT;
  if (name == "OTHER") return Fuel::Other;
  throw semantic_error("unknown fuel: " + name);
}

double FuelTable::lookup(Fuel f) const {
  auto it = factor.find(f);
  if (it == factor.end()) throw semantic_error("fuel has no table entry: " + fuel_name(f));
  return it->second;
}

std::vector<std::vector<int>> ZoneMap::indicator() const {
  std::vector<std::vector<int>> m(K, std::vector<int>(assignment.size(), 0));
  for (std::size_t i = 0; i < assignment.size(); ++i) m[assignment[i]][i] = 1;
  return m;
}

void ZoneMap::validate(int n_loads) const {
  if (static_cast<int>(assignment.size()) != n_loads)
    throw semantic_error("zone assignment covers " + std::to_string(assignment.size()) +
                         " loads, case has " + std::to_string(n_loads));
  std::vector<int> count(K, 0);
  for (int z : assignment) {
    if (z < 0 || z >= K) throw semantic_error("zone index out of range: " + std::to_string(z));
    ++count[z];
  }
  for (int k = 0; k < K; ++k)
    if (count[k] == 0) throw semantic_error("zone " + std::to_string(k) + " is empty");
}

int GridCase::bus_index(int bus_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].id == bus_id) return static_cast<int>(i);
  return -1;
}

void GridCase::validate(const FuelTable& table) const {
  if (buses.empty()) throw semantic_error("case has no buses");
  std::set<int> ids;
  for (const auto& b : buses) {
    if (!ids.insert(b.id).second) throw semantic_error("duplicate bus id " + std::to_string(b.id));
  }
  if (!ids.count(slack_bus)) throw semantic_error("slack bus " + std::to_string(slack_bus) + " not in bus list");
  if (generators.empty()) throw semantic_error("no generators");
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    if (!ids.count(l.from_bus) || !ids.count(l.to_bus))
      throw semantic_error("line " + std::to_string(i) + " references missing bus " +
                           std::to_string(ids.count(l.from_bus) ? l.to_bus : l.from_bus));
    if (!(l.reactance > 0)) throw semantic_error("line " + std::to_string(i) + " reactance must be > 0");
    if (!(l.flow_limit > 0)) throw semantic_error("line " + std::to_string(i) + " flow limit must be > 0");
  }
  for (std::size_t i = 0; i < generators.size(); ++i) {
    const auto& g = generators[i];
    if (!ids.count(g.bus)) throw semantic_error("generator " + std::to_string(i) + " at missing bus " + std::to_string(g.bus));
    if (g.g_min > g.g_max) throw semantic_error("generator " + std::to_string(i) + " has g_min > g_max");
    if (g.emission_factor < 0) throw semantic_error("generator " + std::to_string(i) + " has negative emission factor");
    if (g.fuel != Fuel::Other && std::abs(g.emission_factor - table.lookup(g.fuel)) > 1e-12)
      throw semantic_error("generator " + std::to_string(i) + " emission factor inconsistent with fuel " + fuel_name(g.fuel));
  }
  for (std::size_t i = 0; i < loads.size(); ++i) {
    if (!ids.count(loads[i].bus))
      throw semantic_error("load " + std::to_string(i) + " at missing bus " + std::to_string(loads[i].bus));
    if (loads[i].nominal_mw < 0) throw semantic_error("load " + std::to_string(i) + " has negative demand");
  }
  if (zones) zones->validate(static_cast<int>(loads.size()));
  if (clusters) {
    if (clusters->assignment.size() != loads.size()) throw semantic_error("cluster assignment does not cover loads");
    for (int c : clusters->assignment)
      if (c < 0 || c >= clusters->count) throw semantic_error("cluster index out of range");
  }
}

// ---------------------------------------------------------------------------
// MATPOWER subset
// ---------------------------------------------------------------------------

namespace {

struct MpSection {
  std::string name;
  std::vector<std::vector<double>> rows;
  int line_no = 0;
};

std::string strip_comments(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char ch : text) {
    if (ch == '%') in_comment = true;
    if (ch == '\n') in_comment = false;
    out.push_back(in_comment ? (ch == '\n' ? '\n' : ' ') : ch);
  }
  return out;
}

// Parses `mpc.<name> = [ rows ];` matrices plus scalar `mpc.baseMVA = v;`.
void parse_matpower_text(const std::string& raw, double& base_mva, bool& saw_base,
                         std::vector<MpSection>& sections) {
  const std::string text = strip_comments(raw);
  std::size_t pos = 0;
  int line_no = 1;
  auto line_of = [&](std::size_t p) {
    int n = 1;
    for (std::size_t i = 0; i < p && i < text.size(); ++i)
      if (text[i] == '\n') ++n;
    return n;
  };
  while ((pos = text.find("mpc.", pos)) != std::string::npos) {
    std::size_t name_start = pos + 4;
    std::size_t name_end = name_start;
    while (name_end < text.size() && (std::isalnum(static_cast<unsigned char>(text[name_end])) || text[name_end] == '_'))
      ++name_end;
    std::string name = text.substr(name_start, name_end - name_start);
    std::size_t eq = text.find('=', name_end);
    if (eq == std::string::npos) throw parse_error("line " + std::to_string(line_of(pos)) + ": mpc." + name + " missing '='");
    std::size_t val = eq + 1;
    while (val < text.size() && std::isspace(static_cast<unsigned char>(text[val]))) ++val;
    line_no = line_of(pos);
    if (val < text.size() && text[val] == '[') {
      std::size_t close = text.find(']', val);
      if (close == std::string::npos)
        throw parse_error("line " + std::to_string(line_no) + ": mpc." + name + " matrix not closed");
      MpSection sec;
      sec.name = name;
      sec.line_no = line_no;
      std::string body = text.substr(val + 1, close - val - 1);
      for (char& ch : body)
        if (ch == ';' || ch == ',') ch = '\n';
      std::istringstream rows(body);
      std::string row;
      while (std::getline(rows, row)) {
        std::istringstream cells(row);
        std::vector<double> vals;
        double v;
        while (cells >> v) vals.push_back(v);
        std::string rest;
        if (!cells.eof()) {
          cells.clear();
          cells >> rest;
          if (!rest.empty())
            throw parse_error("line " + std::to_string(line_no) + ": mpc." + name + " has non-numeric cell '" + rest + "'");
        }
        if (!vals.empty()) sec.rows.push_back(std::move(vals));
      }
      sections.push_back(std::move(sec));
      pos = close + 1;
    } else if (val < text.size() && text[val] == '\'') {
      // string assignment (e.g. mpc.version): skip
      std::size_t close = text.find('\'', val + 1);
      pos = (close == std::string::npos) ? text.size() : close + 1;
      if (name != "version") sections.push_back({name, {}, line_no});
    } else {
      std::size_t semi = text.find(';', val);
      std::string tok = text.substr(val, (semi == std::string::npos ? text.size() : semi) - val);
      if (name == "baseMVA") {
        std::istringstream is(tok);
        if (!(is >> base_mva)) throw parse_error("line " + std::to_string(line_no) + ": bad baseMVA value");
        saw_base = true;
      } else {
        sections.push_back({name, {}, line_no});
      }
      pos = (semi == std::string::npos) ? text.size() : semi + 1;
    }
  }
}

GridCase parse_matpower(const std::string& text, ParseReport* report) {
  double base_mva = 100.0;
  bool saw_base = false;
  std::vector<MpSection> sections;
  parse_matpower_text(text, base_mva, saw_base, sections);

  const MpSection* bus = nullptr;
  const MpSection* gen = nullptr;
  const MpSection* branch = nullptr;
  const MpSection* gencost = nullptr;
  for (const auto& s : sections) {
    if (s.name == "bus") bus = &s;
    else if (s.name == "gen") gen = &s;
    else if (s.name == "branch") branch = &s;
    else if (s.name == "gencost") gencost = &s;
    else if (report)
      report->warnings.push_back("ignoring unknown section mpc." + s.name + " (line " + std::to_string(s.line_no) + ")");
  }
  if (!bus) throw parse_error("missing mpc.bus section");
  if (!gen) throw parse_error("missing mpc.gen section");
  if (!branch) throw parse_error("missing mpc.branch section");

  GridCase c;
  c.base_mva = base_mva;
  int slack = -1;
  for (const auto& row : bus->rows) {
    if (row.size() < 3) throw parse_error("mpc.bus row needs at least bus_i, type, Pd");
    Bus b;
    b.id = static_cast<int>(row[0]);
    c.buses.push_back(b);
    if (static_cast<int>(row[1]) == 3) slack = b.id;
  }
  // Loads are the Pd > 0 rows; ordering is bus-id ascending for a stable index map.
  std::vector<std::pair<int, double>> pd;
  for (const auto& row : bus->rows)
    if (row[2] > 0) pd.emplace_back(static_cast<int>(row[0]), row[2]);
  std::sort(pd.begin(), pd.end());
  for (auto& [b, mw] : pd) c.loads.push_back({b, mw});

  for (const auto& row : gen->rows) {
    if (row.size() < 10) throw parse_error("mpc.gen row needs at least 10 columns");
    Generator g;
    g.bus = static_cast<int>(row[0]);
    g.g_max = row[8];
    g.g_min = row[9];
    c.generators.push_back(g);
  }
  if (gencost) {
    if (gencost->rows.size() != c.generators.size())
      throw parse_error("mpc.gencost rows do not match mpc.gen");
    for (std::size_t i = 0; i < gencost->rows.size(); ++i) {
      const auto& row = gencost->rows[i];
      if (row.size() < 5 || static_cast<int>(row[0]) != 2)
        throw parse_error("mpc.gencost row " + std::to_string(i) + ": only polynomial model 2 supported");
      int n = static_cast<int>(row[3]);
      if (static_cast<int>(row.size()) < 4 + n)
        throw parse_error("mpc.gencost row " + std::to_string(i) + ": trailing coefficients missing");
      // linear term only: second-to-last polynomial coefficient for n >= 2
      c.generators[i].cost_linear = (n >= 2) ? row[4 + n - 2] : 0.0;
    }
  }
  for (const auto& row : branch->rows) {
    if (row.size() < 6) throw parse_error("mpc.branch row needs at least 6 columns");
    Line l;
    l.from_bus = static_cast<int>(row[0]);
    l.to_bus = static_cast<int>(row[1]);
    l.reactance = row[3];
    l.flow_limit = row[5] > 0 ? row[5] : 1e6;  // rateA 0 means unlimited in MATPOWER
    c.lines.push_back(l);
  }
  c.slack_bus = slack >= 0 ? slack : (c.buses.empty() ? 0 : c.buses.front().id);
  if (slack < 0 && report) report->warnings.push_back("no slack (type 3) bus; using first bus");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Native structured-text format (JSON schema)
// ---------------------------------------------------------------------------

GridCase parse_native(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw parse_error(std::string("native case: ") + e.what());
  }
  try {
    GridCase c;
    c.base_mva = j.at("base_mva").get<double>();
    c.slack_bus = j.at("slack_bus").get<int>();
    for (const auto& b : j.at("buses"))
      c.buses.push_back({b.at("id").get<int>(), b.value("zone_id", 0)});
    for (const auto& l : j.at("lines"))
      c.lines.push_back({l.at("from").get<int>(), l.at("to").get<int>(),
                         l.at("reactance").get<double>(), l.at("flow_limit").get<double>()});
    for (const auto& g : j.at("generators"))
      c.generators.push_back({g.at("bus").get<int>(), g.at("cost_linear").get<double>(),
                              g.at("g_min").get<double>(), g.at("g_max").get<double>(),
                              fuel_from_name(g.value("fuel", std::string("OTHER"))),
                              g.at("emission_factor").get<double>()});
    for (const auto& d : j.at("loads"))
      c.loads.push_back({d.at("bus").get<int>(), d.at("nominal_mw").get<double>()});
    if (j.contains("zones")) {
      ZoneMap z;
      z.K = j["zones"].at("K").get<int>();
      z.assignment = j["zones"].at("assignment").get<std::vector<int>>();
      c.zones = z;
    }
    if (j.contains("clusters")) {
      ClusterAnnotation a;
      a.count = j["clusters"].at("count").get<int>();
      a.assignment = j["clusters"].at("assignment").get<std::vector<int>>();
      c.clusters = a;
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw parse_error(std::string("native case: ") + e.what());
  }
}

json number_token(double v) {
  // keep integral values readable; others carry full precision
  if (v == static_cast<long long>(v) && std::abs(v) < 1e15) return json(static_cast<long long>(v));
  return json(v);
}

}  // namespace

GridCase parse_case(const std::string& text, CaseDialect dialect, ParseReport* report) {
  return dialect == CaseDialect::Native ? parse_native(text) : parse_matpower(text, report);
}

GridCase apply_fuel_assignment(const GridCase& c, const FuelTable& table, const std::map<int, Fuel>& bus_to_fuel) {
  GridCase out = c;
  for (const auto& [bus, fuel] : bus_to_fuel) {
    double factor = table.lookup(fuel);
    bool found = false;
    for (auto& g : out.generators) {
      if (g.bus == bus) {
        g.fuel = fuel;
        g.emission_factor = factor;
        found = true;
      }
    }
    if (!found) throw semantic_error("no generator at bus " + std::to_string(bus));
  }
  out.validate(table);
  return out;
}

std::string serialize_case(const GridCase& c) {
  json j;
  j["base_mva"] = number_token(c.base_mva);
  j["slack_bus"] = c.slack_bus;
  j["buses"] = json::array();
  for (const auto& b : c.buses) j["buses"].push_back({{"id", b.id}, {"zone_id", b.zone_id}});
  j["lines"] = json::array();
  for (const auto& l : c.lines)
    j["lines"].push_back({{"from", l.from_bus},
                          {"to", l.to_bus},
                          {"reactance", number_token(l.reactance)},
                          {"flow_limit", number_token(l.flow_limit)}});
  j["generators"] = json::array();
  for (const auto& g : c.generators)
    j["generators"].push_back({{"bus", g.bus},
                               {"cost_linear", number_token(g.cost_linear)},
                               {"g_min", number_token(g.g_min)},
                               {"g_max", number_token(g.g_max)},
                               {"fuel", fuel_name(g.fuel)},
                               {"emission_factor", number_token(g.emission_factor)}});
  j["loads"] = json::array();
  for (const auto& d : c.loads)
    j["loads"].push_back({{"bus", d.bus}, {"nominal_mw", number_token(d.nominal_mw)}});
  if (c.zones) j["zones"] = {{"K", c.zones->K}, {"assignment", c.zones->assignment}};
  if (c.clusters) j["clusters"] = {{"count", c.clusters->count}, {"assignment", c.clusters->assignment}};
  return j.dump(2) + "\n";
}

GridCase load_case_file(const std::string& path, ParseReport* report) {
  std::ifstream in(path);
  if (!in) throw Error(Error::Kind::Io, "cannot open case file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  bool matpower = path.size() > 2 && path.substr(path.size() - 2) == ".m";
  return parse_case(ss.str(), matpower ? CaseDialect::MatpowerSubset : CaseDialect::Native, report);
}

std::uint64_t case_hash(const GridCase& c) { return fnv1a64(serialize_case(c)); }

}  // namespace carbonlace
