#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "carbonlace/case.hpp"
#include "carbonlace/lp.hpp"

namespace carbonlace::dispatch {

// PTDF and index maps for one case; build once, dispatch many load vectors.
struct DcopfModel {
  GridCase grid;
  Eigen::MatrixXd ptdf;            // L x N, slack column zero
  std::vector<int> gen_bus_index;  // generator -> bus position
  std::vector<int> load_bus_index; // load -> bus position
  Eigen::VectorXd emission_factors;
  Eigen::VectorXd cost;

  int n_gen() const { return static_cast<int>(grid.generators.size()); }
  int n_load() const { return static_cast<int>(grid.loads.size()); }
  int n_line() const { return static_cast<int>(grid.lines.size()); }
};

DcopfModel build_model(const GridCase& c);

// LP over [g; line flows]: balance row + per-line PTDF flow definitions.
lp::Problem build_dcopf(const DcopfModel& model, const Eigen::VectorXd& d);
lp::Problem build_dcopf(const GridCase& c, const Eigen::VectorXd& d);

struct DispatchResult {
  Eigen::VectorXd g_star;             // MW
  double objective = 0.0;             // $/h
  Eigen::VectorXd flows;              // MW, per line
  Eigen::VectorXd per_gen_emissions;  // tCO2e/h
  double total_emissions = 0.0;       // tCO2e/h
  std::vector<int> active_set;        // sorted binding bound ids (2*var + at_upper)
  std::uint64_t basis_signature = 0;
  lp::Solution lp;                    // full LP solution for sensitivity consumers
};

DispatchResult solve_dispatch(const DcopfModel& model, const Eigen::VectorXd& d);
DispatchResult solve_dispatch(const GridCase& c, const Eigen::VectorXd& d);

enum class LmceMethod { Basis, FiniteDiff };

struct LmceVector {
  Eigen::VectorXd mu;                  // tCO2e/MWh
  std::vector<std::uint8_t> degenerate_flags;
};

// mu_i = f' dg*/dd_i. Basis: one sensitivity solve per load under the fixed
// optimal basis; entries whose direction immediately leaves a binding bound
// are flagged. Finite-diff: central difference with active-set cross-check.
LmceVector compute_lmce(const DcopfModel& model, const Eigen::VectorXd& d,
                        LmceMethod method = LmceMethod::Basis, double delta_mw = 1e-3);
LmceVector compute_lmce(const GridCase& c, const Eigen::VectorXd& d,
                        LmceMethod method = LmceMethod::Basis, double delta_mw = 1e-3);

// G x D, column i = dg*/dd_i under the fixed optimal basis.
Eigen::MatrixXd dispatch_jacobian(const DcopfModel& model, const Eigen::VectorXd& d);
Eigen::MatrixXd dispatch_jacobian(const GridCase& c, const Eigen::VectorXd& d);

}  // namespace carbonlace::dispatch
