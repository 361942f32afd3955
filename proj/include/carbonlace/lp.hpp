#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "carbonlace/util.hpp"

namespace carbonlace::lp {

// min cost'x  s.t.  eq_matrix x = eq_rhs,  lower <= x <= upper
// Bounds may be +-infinity.
struct Problem {
  Eigen::MatrixXd eq_matrix;  // m x n
  Eigen::VectorXd eq_rhs;     // m
  Eigen::VectorXd cost;       // n
  Eigen::VectorXd lower;      // n
  Eigen::VectorXd upper;      // n

  int n() const { return static_cast<int>(cost.size()); }
  int m() const { return static_cast<int>(eq_rhs.size()); }
  void check() const;
};

enum class VarStatus { Basic, AtLower, AtUpper, FreeZero };

struct Solution {
  Eigen::VectorXd x;
  double objective = 0.0;
  std::vector<int> basis;            // m structural indices, ordered to match rows of the factorized basis
  std::vector<VarStatus> status;     // n entries
  Eigen::VectorXd duals;             // m
  Eigen::VectorXd reduced_costs;     // n
  int iterations = 0;
};

class LpInfeasible : public Error {
 public:
  explicit LpInfeasible(int row)
      : Error(Kind::Infeasible, "LP infeasible (Farkas certificate row " + std::to_string(row) + ")"),
        farkas_row(row) {}
  int farkas_row;
};

class LpUnbounded : public Error {
 public:
  explicit LpUnbounded(int var)
      : Error(Kind::Unbounded, "LP unbounded (ray variable " + std::to_string(var) + ")"), ray_var(var) {}
  int ray_var;
};

class LpMaxIterations : public Error {
 public:
  LpMaxIterations() : Error(Kind::Numerical, "LP iteration limit reached") {}
};

class SingularBasis : public Error {
 public:
  SingularBasis() : Error(Kind::Numerical, "singular LP basis factorization") {}
};

// Deterministic revised simplex: Dantzig pricing with a switch to Bland's rule
// after 3(m+n) iterations, bounded variables handled explicitly, two-phase start.
Solution solve_lp(const Problem& p);

// dx = d(x*)/d(rhs) . drhs under the fixed optimal basis; nonbasic entries zero.
// Valid only while the basis stays optimal.
Eigen::VectorXd basis_sensitivity(const Solution& sol, const Problem& p, const Eigen::VectorXd& drhs);

}  // namespace carbonlace::lp
