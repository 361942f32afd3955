#include "carbonlace/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace carbonlace::lp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-9;
constexpr double kOptTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kPhase1Tol = 1e-7;

struct Lu {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  bool singular = false;
};

Lu factorize(const Eigen::MatrixXd& B) {
  Lu f;
  f.lu.compute(B);
  Eigen::VectorXd diag = f.lu.matrixLU().diagonal().cwiseAbs();
  double dmax = diag.maxCoeff();
  f.singular = (dmax <= 0.0) || (diag.minCoeff() < 1e-13 * dmax);
  return f;
}

// Working state over n structural + m artificial columns.
struct Tableau {
  Eigen::MatrixXd A;   // m x (n + m)
  Eigen::VectorXd b;   // m
  Eigen::VectorXd lo;  // n + m
  Eigen::VectorXd up;  // n + m
  Eigen::VectorXd c;   // n + m, current phase costs
  std::vector<int> basis;            // m
  std::vector<VarStatus> status;     // n + m
  int n = 0;
  int m = 0;

  int total() const { return n + m; }

  double nonbasic_value(int j) const {
    switch (status[j]) {
      case VarStatus::AtLower: return lo[j];
      case VarStatus::AtUpper: return up[j];
      default: return 0.0;
    }
  }

  Eigen::VectorXd full_x(const Lu& f) const {
    Eigen::VectorXd x(total());
    for (int j = 0; j < total(); ++j) x[j] = (status[j] == VarStatus::Basic) ? 0.0 : nonbasic_value(j);
    Eigen::VectorXd rhs = b - A * x;
    Eigen::VectorXd xb = f.lu.solve(rhs);
    for (int k = 0; k < m; ++k) x[basis[k]] = xb[k];
    return x;
  }

  Eigen::MatrixXd basis_matrix() const {
    Eigen::MatrixXd B(m, m);
    for (int k = 0; k < m; ++k) B.col(k) = A.col(basis[k]);
    return B;
  }
};

struct PriceResult {
  int j = -1;
  double sigma = 0.0;  // +1 entering increases, -1 decreases
};

PriceResult price(const Tableau& t, const Eigen::VectorXd& d, bool bland) {
  PriceResult best;
  double best_violation = kOptTol;
  for (int j = 0; j < t.total(); ++j) {
    double violation = 0.0;
    double sigma = 0.0;
    switch (t.status[j]) {
      case VarStatus::Basic: continue;
      case VarStatus::AtLower:
        if (t.lo[j] < t.up[j] && d[j] < -kOptTol) { violation = -d[j]; sigma = 1.0; }
        break;
      case VarStatus::AtUpper:
        if (t.lo[j] < t.up[j] && d[j] > kOptTol) { violation = d[j]; sigma = -1.0; }
        break;
      case VarStatus::FreeZero:
        if (std::abs(d[j]) > kOptTol) { violation = std::abs(d[j]); sigma = d[j] < 0 ? 1.0 : -1.0; }
        break;
    }
    if (sigma == 0.0) continue;
    if (bland) return {j, sigma};
    if (violation > best_violation) {
      best_violation = violation;
      best = {j, sigma};
    }
  }
  return best;
}

// One simplex phase over the current costs. Returns false on iteration blowup.
void run_simplex(Tableau& t, int& iterations, int max_iterations, int bland_after, bool phase_one) {
  for (;;) {
    if (iterations >= max_iterations) throw LpMaxIterations();
    bool bland = iterations >= bland_after;

    Eigen::MatrixXd B = t.basis_matrix();
    Lu f = factorize(B);
    if (f.singular) throw SingularBasis();

    Eigen::VectorXd x = t.full_x(f);
    Eigen::VectorXd cb(t.m);
    for (int k = 0; k < t.m; ++k) cb[k] = t.c[t.basis[k]];
    Eigen::VectorXd y = f.lu.transpose().solve(cb);
    Eigen::VectorXd d = t.c - t.A.transpose() * y;

    PriceResult pr = price(t, d, bland);
    if (pr.j < 0) return;  // optimal for this phase
    ++iterations;

    Eigen::VectorXd w = f.lu.solve(t.A.col(pr.j));

    // ratio test
    double t_best = kInf;
    int leave_k = -1;          // index into basis
    bool leave_at_upper = false;
    double own_range = t.up[pr.j] - t.lo[pr.j];  // inf for free/one-sided
    for (int k = 0; k < t.m; ++k) {
      double dir = pr.sigma * w[k];
      int bk = t.basis[k];
      double tk = kInf;
      bool at_up = false;
      if (dir > kPivotTol) {
        if (t.lo[bk] > -kInf) tk = (x[bk] - t.lo[bk]) / dir;
      } else if (dir < -kPivotTol) {
        if (t.up[bk] < kInf) { tk = (t.up[bk] - x[bk]) / (-dir); at_up = true; }
      }
      if (tk == kInf) continue;
      tk = std::max(tk, 0.0);
      bool better = false;
      if (tk < t_best - 1e-12) {
        better = true;
      } else if (tk < t_best + 1e-12 && leave_k >= 0) {
        if (bland) {
          better = bk < t.basis[leave_k];
        } else {
          double cur = std::abs(w[leave_k]);
          double cand = std::abs(w[k]);
          better = cand > cur + 1e-12 || (std::abs(cand - cur) <= 1e-12 && bk < t.basis[leave_k]);
        }
      }
      if (better || leave_k < 0) {
        t_best = tk;
        leave_k = k;
        leave_at_upper = at_up;
      }
    }

    if (t_best == kInf && own_range == kInf) {
      if (phase_one) throw SingularBasis();  // phase-1 objective is bounded below; cannot happen
      throw LpUnbounded(pr.j);
    }

    if (own_range <= t_best) {
      // bound flip, basis unchanged
      t.status[pr.j] = (t.status[pr.j] == VarStatus::AtLower) ? VarStatus::AtUpper : VarStatus::AtLower;
      continue;
    }

    // pivot: pr.j enters, basis[leave_k] leaves
    int leaving = t.basis[leave_k];
    t.status[leaving] = leave_at_upper ? VarStatus::AtUpper
                        : (t.lo[leaving] > -kInf ? VarStatus::AtLower : VarStatus::FreeZero);
    t.status[pr.j] = VarStatus::Basic;
    t.basis[leave_k] = pr.j;
  }
}

void drive_out_artificials(Tableau& t) {
  for (int k = 0; k < t.m; ++k) {
    if (t.basis[k] < t.n) continue;
    Eigen::MatrixXd B = t.basis_matrix();
    Lu f = factorize(B);
    if (f.singular) throw SingularBasis();
    // row k of B^-1
    Eigen::VectorXd ek = Eigen::VectorXd::Zero(t.m);
    ek[k] = 1.0;
    Eigen::VectorXd row = f.lu.transpose().solve(ek);
    int enter = -1;
    for (int j = 0; j < t.n; ++j) {
      if (t.status[j] == VarStatus::Basic) continue;
      if (std::abs(row.dot(t.A.col(j))) > 1e-7) { enter = j; break; }
    }
    if (enter < 0) throw Error(Error::Kind::Numerical, "redundant equality row " + std::to_string(k));
    int art = t.basis[k];
    t.status[art] = VarStatus::AtLower;
    t.status[enter] = VarStatus::Basic;
    t.basis[k] = enter;
  }
}

}  // namespace

void Problem::check() const {
  int nn = n(), mm = m();
  if (eq_matrix.rows() != mm || eq_matrix.cols() != nn)
    throw Error(Error::Kind::Config, "LP dimension mismatch");
  if (lower.size() != nn || upper.size() != nn)
    throw Error(Error::Kind::Config, "LP bound dimension mismatch");
  for (int j = 0; j < nn; ++j)
    if (!(lower[j] <= upper[j]))
      throw Error(Error::Kind::Config, "LP has lower > upper at variable " + std::to_string(j));
}

Solution solve_lp(const Problem& p) {
  p.check();
  const int n = p.n();
  const int m = p.m();

  // equilibrate: rows then columns by max-abs
  Eigen::VectorXd rscale = Eigen::VectorXd::Ones(m);
  for (int i = 0; i < m; ++i) {
    double mx = p.eq_matrix.row(i).cwiseAbs().maxCoeff();
    if (mx > 0) rscale[i] = 1.0 / mx;
  }
  Eigen::MatrixXd Ar = rscale.asDiagonal() * p.eq_matrix;
  Eigen::VectorXd cscale = Eigen::VectorXd::Ones(n);
  for (int j = 0; j < n; ++j) {
    double mx = Ar.col(j).cwiseAbs().maxCoeff();
    if (mx > 0) cscale[j] = 1.0 / mx;
  }

  Tableau t;
  t.n = n;
  t.m = m;
  t.A.resize(m, n + m);
  t.A.leftCols(n) = Ar * cscale.asDiagonal();
  t.b = rscale.cwiseProduct(p.eq_rhs);
  t.lo.resize(n + m);
  t.up.resize(n + m);
  t.c = Eigen::VectorXd::Zero(n + m);
  for (int j = 0; j < n; ++j) {
    t.lo[j] = p.lower[j] / cscale[j];
    t.up[j] = p.upper[j] / cscale[j];
  }
  t.status.assign(n + m, VarStatus::AtLower);
  for (int j = 0; j < n; ++j) {
    if (t.lo[j] > -kInf) t.status[j] = VarStatus::AtLower;
    else if (t.up[j] < kInf) t.status[j] = VarStatus::AtUpper;
    else t.status[j] = VarStatus::FreeZero;
  }

  // artificial columns sized to the initial residual sign
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n + m);
  for (int j = 0; j < n; ++j) x0[j] = t.nonbasic_value(j);
  Eigen::VectorXd resid = t.b - t.A.leftCols(n) * x0.head(n);
  t.basis.resize(m);
  for (int i = 0; i < m; ++i) {
    int aj = n + i;
    t.A.col(aj) = Eigen::VectorXd::Zero(m);
    t.A(i, aj) = (resid[i] >= 0) ? 1.0 : -1.0;
    t.lo[aj] = 0.0;
    t.up[aj] = kInf;
    t.c[aj] = 1.0;
    t.basis[i] = aj;
    t.status[aj] = VarStatus::Basic;
  }

  int iterations = 0;
  const int bland_after = 3 * (m + n);
  const int max_iterations = 50 * (m + n) + 10000;

  run_simplex(t, iterations, max_iterations, bland_after, /*phase_one=*/true);

  {
    Lu f = factorize(t.basis_matrix());
    if (f.singular) throw SingularBasis();
    Eigen::VectorXd x = t.full_x(f);
    double infeas = x.tail(m).sum();
    if (infeas > kPhase1Tol) {
      int worst = 0;
      x.tail(m).maxCoeff(&worst);
      throw LpInfeasible(worst);
    }
  }
  drive_out_artificials(t);

  // phase 2: real costs, artificials pinned at zero
  for (int j = 0; j < n; ++j) t.c[j] = p.cost[j] * cscale[j];
  for (int i = 0; i < m; ++i) {
    t.c[n + i] = 0.0;
    t.up[n + i] = 0.0;
  }
  run_simplex(t, iterations, max_iterations, bland_after, /*phase_one=*/false);

  Lu f = factorize(t.basis_matrix());
  if (f.singular) throw SingularBasis();
  Eigen::VectorXd xs = t.full_x(f);
  Eigen::VectorXd cb(m);
  for (int k = 0; k < m; ++k) cb[k] = t.c[t.basis[k]];
  Eigen::VectorXd ys = f.lu.transpose().solve(cb);
  Eigen::VectorXd ds = t.c.head(n) - t.A.leftCols(n).transpose() * ys;

  Solution sol;
  sol.x = cscale.cwiseProduct(xs.head(n));
  // clamp solver dust so bound invariants are exact-ish in original units
  for (int j = 0; j < n; ++j) {
    if (p.lower[j] > -kInf) sol.x[j] = std::max(sol.x[j], p.lower[j] - 1e-9);
    if (p.upper[j] < kInf) sol.x[j] = std::min(sol.x[j], p.upper[j] + 1e-9);
    if (t.status[j] == VarStatus::AtLower) sol.x[j] = p.lower[j];
    if (t.status[j] == VarStatus::AtUpper) sol.x[j] = p.upper[j];
  }
  sol.objective = p.cost.dot(sol.x);
  sol.basis = t.basis;
  sol.status.assign(t.status.begin(), t.status.begin() + n);
  sol.duals = rscale.cwiseProduct(ys);
  sol.reduced_costs = ds.cwiseQuotient(cscale);
  sol.iterations = iterations;
  for (int k = 0; k < m; ++k)
    if (sol.basis[k] >= n) throw Error(Error::Kind::Numerical, "artificial variable left in basis");
  return sol;
}

Eigen::VectorXd basis_sensitivity(const Solution& sol, const Problem& p, const Eigen::VectorXd& drhs) {
  if (drhs.size() != p.m()) throw Error(Error::Kind::Config, "drhs dimension mismatch");
  Eigen::MatrixXd B(p.m(), p.m());
  for (int k = 0; k < p.m(); ++k) B.col(k) = p.eq_matrix.col(sol.basis[k]);
  Lu f = factorize(B);
  if (f.singular) throw SingularBasis();
  Eigen::VectorXd dxb = f.lu.solve(drhs);
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(p.n());
  for (int k = 0; k < p.m(); ++k) dx[sol.basis[k]] = dxb[k];
  return dx;
}

}  // namespace carbonlace::lp
