#include "carbonlace/dispatch.hpp"

#include <algorithm>
#include <cmath>

namespace carbonlace::dispatch {

namespace {
constexpr double kBindTol = 1e-6;

bool near_bound(double x, double bound) { return std::abs(x - bound) <= kBindTol * (1.0 + std::abs(bound)); }
}  // namespace

DcopfModel build_model(const GridCase& c) {
  c.validate();
  DcopfModel m;
  m.grid = c;
  const int N = static_cast<int>(c.buses.size());
  const int L = static_cast<int>(c.lines.size());

  int slack = c.bus_index(c.slack_bus);
  Eigen::MatrixXd bbus = Eigen::MatrixXd::Zero(N, N);
  Eigen::MatrixXd bf = Eigen::MatrixXd::Zero(L, N);
  for (int l = 0; l < L; ++l) {
    int i = c.bus_index(c.lines[l].from_bus);
    int j = c.bus_index(c.lines[l].to_bus);
    double y = 1.0 / c.lines[l].reactance;
    bbus(i, i) += y;
    bbus(j, j) += y;
    bbus(i, j) -= y;
    bbus(j, i) -= y;
    bf(l, i) = y;
    bf(l, j) = -y;
  }
  std::vector<int> keep;
  for (int i = 0; i < N; ++i)
    if (i != slack) keep.push_back(i);
  Eigen::MatrixXd bred(N - 1, N - 1);
  for (int a = 0; a < N - 1; ++a)
    for (int b = 0; b < N - 1; ++b) bred(a, b) = bbus(keep[a], keep[b]);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(bred);
  if (N > 1 && (!lu.isInvertible()))
    throw Error(Error::Kind::Semantic, "singular susceptance matrix (islanded network)");

  m.ptdf = Eigen::MatrixXd::Zero(L, N);
  if (N > 1) {
    Eigen::MatrixXd bf_red(L, N - 1);
    for (int a = 0; a < N - 1; ++a) bf_red.col(a) = bf.col(keep[a]);
    Eigen::MatrixXd x = lu.solve(bf_red.transpose());  // (N-1) x L
    for (int a = 0; a < N - 1; ++a) m.ptdf.col(keep[a]) = x.row(a).transpose();
  }

  m.gen_bus_index.reserve(c.generators.size());
  for (const auto& g : c.generators) m.gen_bus_index.push_back(c.bus_index(g.bus));
  m.load_bus_index.reserve(c.loads.size());
  for (const auto& d : c.loads) m.load_bus_index.push_back(c.bus_index(d.bus));

  m.emission_factors.resize(c.generators.size());
  m.cost.resize(c.generators.size());
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    m.emission_factors[i] = c.generators[i].emission_factor;
    m.cost[i] = c.generators[i].cost_linear;
  }
  return m;
}

lp::Problem build_dcopf(const DcopfModel& m, const Eigen::VectorXd& d) {
  const int G = m.n_gen();
  const int L = m.n_line();
  const int D = m.n_load();
  if (d.size() != D) throw Error(Error::Kind::Config, "load vector has wrong dimension");
  if ((d.array() < 0).any()) throw Error(Error::Kind::Config, "load vector must be nonnegative");

  lp::Problem p;
  p.eq_matrix = Eigen::MatrixXd::Zero(1 + L, G + L);
  p.eq_rhs = Eigen::VectorXd::Zero(1 + L);
  p.cost = Eigen::VectorXd::Zero(G + L);
  p.lower.resize(G + L);
  p.upper.resize(G + L);

  for (int j = 0; j < G; ++j) {
    p.eq_matrix(0, j) = 1.0;
    p.cost[j] = m.cost[j];
    p.lower[j] = m.grid.generators[j].g_min;
    p.upper[j] = m.grid.generators[j].g_max;
  }
  p.eq_rhs[0] = d.sum();

  for (int l = 0; l < L; ++l) {
    p.eq_matrix(1 + l, G + l) = 1.0;
    for (int j = 0; j < G; ++j) p.eq_matrix(1 + l, j) = -m.ptdf(l, m.gen_bus_index[j]);
    double rhs = 0.0;
    for (int i = 0; i < D; ++i) rhs -= m.ptdf(l, m.load_bus_index[i]) * d[i];
    p.eq_rhs[1 + l] = rhs;
    p.lower[G + l] = -m.grid.lines[l].flow_limit;
    p.upper[G + l] = m.grid.lines[l].flow_limit;
  }
  return p;
}

lp::Problem build_dcopf(const GridCase& c, const Eigen::VectorXd& d) {
  return build_dcopf(build_model(c), d);
}

DispatchResult solve_dispatch(const DcopfModel& m, const Eigen::VectorXd& d) {
  lp::Problem p = build_dcopf(m, d);
  lp::Solution sol;
  try {
    sol = lp::solve_lp(p);
  } catch (const lp::LpInfeasible& e) {
    std::string dtxt;
    for (int i = 0; i < d.size(); ++i) dtxt += (i ? "," : "") + fmt_double(d[i]);
    throw Error(Error::Kind::Infeasible, std::string(e.what()) + " for load vector [" + dtxt + "]");
  }

  const int G = m.n_gen();
  const int L = m.n_line();
  DispatchResult r;
  r.g_star = sol.x.head(G);
  r.flows = sol.x.tail(L);
  r.objective = sol.objective;
  r.per_gen_emissions = m.emission_factors.cwiseProduct(r.g_star);
  r.total_emissions = r.per_gen_emissions.sum();

  for (int j = 0; j < G + L; ++j) {
    if (near_bound(sol.x[j], p.lower[j])) r.active_set.push_back(2 * j);
    if (near_bound(sol.x[j], p.upper[j]) && p.upper[j] != p.lower[j]) r.active_set.push_back(2 * j + 1);
  }
  std::sort(r.active_set.begin(), r.active_set.end());

  std::uint64_t h = 0xcbf29ce484222325ull;
  std::vector<int> sorted_basis = sol.basis;
  std::sort(sorted_basis.begin(), sorted_basis.end());
  h = fnv1a64(sorted_basis.data(), sorted_basis.size() * sizeof(int), h);
  for (int j = 0; j < G + L; ++j) {
    int s = (sol.status[j] == lp::VarStatus::AtUpper) ? 1 : 0;
    h = fnv1a64(&s, sizeof(s), h);
  }
  r.basis_signature = h;
  r.lp = std::move(sol);
  return r;
}

DispatchResult solve_dispatch(const GridCase& c, const Eigen::VectorXd& d) {
  return solve_dispatch(build_model(c), d);
}

namespace {

// rhs derivative of the DC-OPF with respect to load i
Eigen::VectorXd load_rhs_direction(const DcopfModel& m, int load) {
  Eigen::VectorXd drhs = Eigen::VectorXd::Zero(1 + m.n_line());
  drhs[0] = 1.0;
  for (int l = 0; l < m.n_line(); ++l) drhs[1 + l] = -m.ptdf(l, m.load_bus_index[load]);
  return drhs;
}

// true when the fixed-basis direction immediately leaves a binding bound,
// i.e. the basis derivative is one-sided
bool direction_blocked(const lp::Problem& p, const lp::Solution& sol, const Eigen::VectorXd& dx) {
  for (int idx : sol.basis) {
    if (std::abs(dx[idx]) <= 1e-9) continue;
    if (std::isfinite(p.lower[idx]) && near_bound(sol.x[idx], p.lower[idx])) return true;
    if (std::isfinite(p.upper[idx]) && near_bound(sol.x[idx], p.upper[idx])) return true;
  }
  return false;
}

}  // namespace

LmceVector compute_lmce(const DcopfModel& m, const Eigen::VectorXd& d, LmceMethod method, double delta_mw) {
  const int D = m.n_load();
  LmceVector out;
  out.mu.resize(D);
  out.degenerate_flags.assign(D, 0);

  if (method == LmceMethod::Basis) {
    DispatchResult base = solve_dispatch(m, d);
    lp::Problem p = build_dcopf(m, d);
    for (int i = 0; i < D; ++i) {
      Eigen::VectorXd dx = lp::basis_sensitivity(base.lp, p, load_rhs_direction(m, i));
      out.mu[i] = m.emission_factors.dot(dx.head(m.n_gen()));
      if (direction_blocked(p, base.lp, dx)) out.degenerate_flags[i] = 1;
    }
    return out;
  }

  if (delta_mw <= 0) throw Error(Error::Kind::Config, "finite-difference step must be positive");
  DispatchResult base = solve_dispatch(m, d);
  for (int i = 0; i < D; ++i) {
    Eigen::VectorXd dp = d, dm = d;
    dp[i] += delta_mw;
    dm[i] -= delta_mw;
    bool minus_ok = dm[i] >= 0.0;
    DispatchResult rp, rm;
    bool plus_ok = true;
    try {
      rp = solve_dispatch(m, dp);
    } catch (const Error&) {
      plus_ok = false;
    }
    if (minus_ok) {
      try {
        rm = solve_dispatch(m, dm);
      } catch (const Error&) {
        minus_ok = false;
      }
    }
    if (plus_ok && minus_ok) {
      if (rp.active_set == rm.active_set) {
        out.mu[i] = (rp.total_emissions - rm.total_emissions) / (2.0 * delta_mw);
      } else {
        out.mu[i] = (rp.total_emissions - base.total_emissions) / delta_mw;  // right-sided at a kink
        out.degenerate_flags[i] = 1;
      }
    } else if (plus_ok) {
      out.mu[i] = (rp.total_emissions - base.total_emissions) / delta_mw;
      out.degenerate_flags[i] = 1;
    } else if (minus_ok) {
      out.mu[i] = (base.total_emissions - rm.total_emissions) / delta_mw;
      out.degenerate_flags[i] = 1;
    } else {
      throw Error(Error::Kind::Infeasible, "both finite-difference perturbations infeasible at load " + std::to_string(i));
    }
  }
  return out;
}

LmceVector compute_lmce(const GridCase& c, const Eigen::VectorXd& d, LmceMethod method, double delta_mw) {
  return compute_lmce(build_model(c), d, method, delta_mw);
}

Eigen::MatrixXd dispatch_jacobian(const DcopfModel& m, const Eigen::VectorXd& d) {
  DispatchResult base = solve_dispatch(m, d);
  lp::Problem p = build_dcopf(m, d);
  Eigen::MatrixXd jac(m.n_gen(), m.n_load());
  for (int i = 0; i < m.n_load(); ++i) {
    Eigen::VectorXd dx = lp::basis_sensitivity(base.lp, p, load_rhs_direction(m, i));
    jac.col(i) = dx.head(m.n_gen());
  }
  return jac;
}

Eigen::MatrixXd dispatch_jacobian(const GridCase& c, const Eigen::VectorXd& d) {
  return dispatch_jacobian(build_model(c), d);
}

}  // namespace carbonlace::dispatch
