#include "carbonlace/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace carbonlace::metrics {

using dispatch::DcopfModel;
using dispatch::DispatchResult;

std::uint64_t scenario_hash(const GridCase& c, const Eigen::VectorXd& d) {
  std::uint64_t h = case_hash(c);
  return fnv1a64(d.data(), d.size() * sizeof(double), h);
}

double ace(const DcopfModel& model, const Eigen::VectorXd& d) {
  double total = d.sum();
  if (total <= 0) throw Error(Error::Kind::Config, "ACE undefined at zero total load");
  return dispatch::solve_dispatch(model, d).total_emissions / total;
}

double ace(const GridCase& c, const Eigen::VectorXd& d) { return ace(dispatch::build_model(c), d); }

// ---------------------------------------------------------------------------
// LACE-R
// ---------------------------------------------------------------------------

namespace {

struct PathNode {
  double rho;
  Eigen::VectorXd mu;
};

std::vector<int> active_signature(const DcopfModel& model, const Eigen::VectorXd& d, double rho) {
  return dispatch::solve_dispatch(model, (rho * d).eval()).active_set;
}

// first active-set change in (lo, hi], assuming signatures differ at the ends
double bisect_breakpoint(const DcopfModel& model, const Eigen::VectorXd& d, double lo,
                         const std::vector<int>& sig_lo, double hi) {
  for (int it = 0; it < 40 && hi - lo > 1e-7; ++it) {
    double mid = 0.5 * (lo + hi);
    if (active_signature(model, d, mid) == sig_lo) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

void collect_breakpoints(const DcopfModel& model, const Eigen::VectorXd& d, double lo, double hi,
                         std::vector<double>& out, int depth = 0) {
  if (depth > 24) return;
  std::vector<int> sig_lo = active_signature(model, d, lo);
  std::vector<int> sig_hi = active_signature(model, d, hi);
  if (sig_lo == sig_hi) return;
  double b = bisect_breakpoint(model, d, lo, sig_lo, hi);
  out.push_back(b);
  const double h = 1e-6;
  if (b + h < hi) collect_breakpoints(model, d, b + h, hi, out, depth + 1);
}

}  // namespace

MetricVector lace_r(const DcopfModel& model, const Eigen::VectorXd& d, int segments) {
  if (segments < 2) throw Error(Error::Kind::Config, "lace_r needs at least 2 segments");
  const int D = model.n_load();
  const double h = 1e-6;

  std::vector<double> nodes;
  nodes.reserve(segments + 1);
  for (int k = 0; k <= segments; ++k) nodes.push_back(static_cast<double>(k) / segments);

  std::vector<double> breakpoints;
  for (int k = 0; k < segments; ++k) {
    try {
      collect_breakpoints(model, d, nodes[k], nodes[k + 1], breakpoints);
    } catch (const Error& e) {
      throw Error(Error::Kind::Infeasible,
                  std::string("lace_r: path node infeasible near rho=") + fmt_double(nodes[k]) + ": " + e.what());
    }
  }
  for (double b : breakpoints) {
    if (b - h > 0.0) nodes.push_back(b - h);
    if (b + h < 1.0) nodes.push_back(b + h);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  std::vector<PathNode> evals;
  evals.reserve(nodes.size());
  for (double rho : nodes) {
    dispatch::LmceVector v;
    try {
      v = dispatch::compute_lmce(model, (rho * d).eval(), dispatch::LmceMethod::Basis);
    } catch (const Error& e) {
      throw Error(Error::Kind::Infeasible,
                  std::string("lace_r: dispatch infeasible at rho=") + fmt_double(rho) + ": " + e.what());
    }
    evals.push_back({rho, v.mu});
  }

  Eigen::VectorXd integral = Eigen::VectorXd::Zero(D);
  for (std::size_t k = 0; k + 1 < evals.size(); ++k) {
    double w = evals[k + 1].rho - evals[k].rho;
    integral += 0.5 * w * (evals[k].mu + evals[k + 1].mu);
  }

  // residual emissions at zero load (nonzero only when some g_min > 0) are
  // allocated uniformly per MWh, ACE-style
  double e0 = dispatch::solve_dispatch(model, (0.0 * d).eval()).total_emissions;
  double total = d.sum();
  if (e0 > 1e-12 && total > 0) integral.array() += e0 / total;

  MetricVector out;
  out.kind = MetricKind::LaceR;
  out.provenance = scenario_hash(model.grid, d);
  out.values = integral;
  out.flagged.assign(D, 0);
  Eigen::VectorXd mu_end = evals.back().mu;
  for (int i = 0; i < D; ++i) {
    if (d[i] == 0.0) {
      out.values[i] = mu_end[i];
      out.flagged[i] = 1;
    }
  }
  return out;
}

MetricVector lace_r(const GridCase& c, const Eigen::VectorXd& d, int segments) {
  return lace_r(dispatch::build_model(c), d, segments);
}

// ---------------------------------------------------------------------------
// CEF: proportional sharing over the directed DC flows
// ---------------------------------------------------------------------------

MetricVector cef(const DcopfModel& model, const Eigen::VectorXd& d) {
  const int N = static_cast<int>(model.grid.buses.size());
  DispatchResult r = dispatch::solve_dispatch(model, d);
  constexpr double kFlowTol = 1e-9;

  // w(m,n): MW flowing m -> n after sign orientation
  std::vector<std::vector<std::pair<int, double>>> inflow(N);  // per node: (source, MW)
  for (int l = 0; l < model.n_line(); ++l) {
    int i = model.grid.bus_index(model.grid.lines[l].from_bus);
    int j = model.grid.bus_index(model.grid.lines[l].to_bus);
    double f = r.flows[l];
    if (f > kFlowTol) inflow[j].push_back({i, f});
    else if (f < -kFlowTol) inflow[i].push_back({j, -f});
  }

  Eigen::VectorXd gen_mw = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd gen_emis = Eigen::VectorXd::Zero(N);
  for (int g = 0; g < model.n_gen(); ++g) {
    int n = model.gen_bus_index[g];
    gen_mw[n] += std::max(r.g_star[g], 0.0);
    gen_emis[n] += model.emission_factors[g] * std::max(r.g_star[g], 0.0);
  }
  Eigen::VectorXd load_mw = Eigen::VectorXd::Zero(N);
  for (int i = 0; i < model.n_load(); ++i) load_mw[model.load_bus_index[i]] += d[i];

  Eigen::MatrixXd share = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);
  for (int n = 0; n < N; ++n) {
    double through = gen_mw[n];
    for (auto& [m, w] : inflow[n]) through += w;
    if (through <= kFlowTol) {
      if (load_mw[n] > 1e-6)
        throw Error(Error::Kind::Semantic,
                    "CEF: bus " + std::to_string(model.grid.buses[n].id) + " has load but no supply");
      share(n, n) = 1.0;  // intensity pinned to zero on dead buses
      rhs[n] = 0.0;
      continue;
    }
    share(n, n) = through;
    for (auto& [m, w] : inflow[n]) share(n, m) -= w;
    rhs[n] = gen_emis[n];
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(share);
  if (!lu.isInvertible()) throw Error(Error::Kind::Numerical, "CEF: singular sharing matrix");
  Eigen::VectorXd rho = lu.solve(rhs);

  MetricVector out;
  out.kind = MetricKind::Cef;
  out.provenance = scenario_hash(model.grid, d);
  out.values.resize(model.n_load());
  for (int i = 0; i < model.n_load(); ++i) out.values[i] = rho[model.load_bus_index[i]];
  out.flagged.assign(model.n_load(), 0);
  return out;
}

MetricVector cef(const GridCase& c, const Eigen::VectorXd& d) { return cef(dispatch::build_model(c), d); }

}  // namespace carbonlace::metrics
