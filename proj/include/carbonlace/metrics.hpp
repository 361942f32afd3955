#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "carbonlace/dispatch.hpp"

namespace carbonlace::metrics {

enum class MetricKind { AceBroadcast, LaceR, Cef, LaceS, ZaceSExpanded };

struct MetricVector {
  Eigen::VectorXd values;              // tCO2e/MWh, one entry per load
  MetricKind kind = MetricKind::AceBroadcast;
  std::uint64_t provenance = 0;        // scenario hash
  std::vector<std::uint8_t> flagged;   // per-entry marks (e.g. zero-load LACE-R entries)
};

std::uint64_t scenario_hash(const GridCase& c, const Eigen::VectorXd& d);

// eta = E / total load
double ace(const dispatch::DcopfModel& model, const Eigen::VectorXd& d);
double ace(const GridCase& c, const Eigen::VectorXd& d);

// Average of the LMCE along the proportional loading path rho*d, rho in [0,1].
// Trapezoid over `segments` uniform intervals; active-set breakpoints are located
// by bisection and inserted as paired quadrature nodes, making the rule exact for
// the piecewise-constant integrand. Zero-load entries take the endpoint LMCE and
// are flagged.
MetricVector lace_r(const dispatch::DcopfModel& model, const Eigen::VectorXd& d, int segments = 200);
MetricVector lace_r(const GridCase& c, const Eigen::VectorXd& d, int segments = 200);

// Flow-based carbon intensity by proportional sharing of emissions through the
// DC flows; load at bus n receives the bus intensity rho_n.
MetricVector cef(const dispatch::DcopfModel& model, const Eigen::VectorXd& d);
MetricVector cef(const GridCase& c, const Eigen::VectorXd& d);

}  // namespace carbonlace::metrics
