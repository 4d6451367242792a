#include "dhn/nlp_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "dhn/errors.hpp"
#include "dhn/log.hpp"

namespace dhn {

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::LocalOptimum: return "LocalOptimum";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::IterationLimit: return "IterationLimit";
    case SolveStatus::NumericFailure: return "NumericFailure";
  }
  return "unknown";
}

std::vector<double> SolverOptions::relaxation_schedule() const {
  std::vector<double> out;
  double d = delta_start;
  for (int i = 0; i < max_homotopy_steps; ++i) {
    if (d <= delta_end * (1.0 + 1e-9) || i + 1 == max_homotopy_steps) {
      out.push_back(delta_end);
      break;
    }
    out.push_back(d);
    d *= delta_factor;
  }
  return out;
}

void SolverOptions::validate() const {
  if (!(feasibility_tol > 0) || !(stationarity_tol > 0)) throw Error("solver tolerances must be positive");
  if (!(delta_factor > 0 && delta_factor < 1)) throw Error("relaxation factor must lie in (0, 1)");
  if (!(initial_barrier > 0) || !(warm_barrier > 0)) throw Error("barrier parameters must be positive");
  if (!(activity_tol >= 0)) throw Error("activity_tol must be non-negative");
  if (!(delta_start >= delta_end) || delta_end < 0) throw Error("relaxation schedule must decrease");
  if (max_homotopy_steps < 1 || max_inner_iterations < 1 || max_outer_iterations < 1)
    throw Error("solver iteration limits must be positive");
}

namespace {

// Bound-constrained augmented Lagrangian subproblem in z = (x, s).
class Subproblem {
 public:
  Subproblem(const NlpProblem& p) : p_(p), n_(p.variable_count()) {
    slack_.assign(p.row_count(), -1);
    for (int r = 0; r < p.row_count(); ++r) {
      if (!p.rows()[r].is_equality()) {
        slack_[r] = static_cast<int>(ineq_.size());
        ineq_.push_back(r);
      }
    }
    ms_ = static_cast<int>(ineq_.size());
    lo_.resize(n_ + ms_);
    hi_.resize(n_ + ms_);
    lo_.head(n_) = p.lower_bounds();
    hi_.head(n_) = p.upper_bounds();
    for (int k = 0; k < ms_; ++k) {
      lo_[n_ + k] = p.rows()[ineq_[k]].lower;
      hi_[n_ + k] = p.rows()[ineq_[k]].upper;
    }
  }

  int size() const { return n_ + ms_; }
  int n() const { return n_; }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }

  Vector project(const Vector& z) const { return z.cwiseMax(lo_).cwiseMin(hi_); }

  Vector make_start(const Vector& x) const {
    Vector z(size());
    z.head(n_) = x;
    Vector c = p_.constraints(x);
    for (int k = 0; k < ms_; ++k) z[n_ + k] = c[ineq_[k]];
    return project(z);
  }

  Vector residual(const Vector& z, const Vector& c) const {
    Vector h(c.size());
    for (int r = 0; r < p_.row_count(); ++r) {
      h[r] = slack_[r] >= 0 ? c[r] - z[n_ + slack_[r]] : c[r] - p_.rows()[r].lower;
    }
    return h;
  }

  Vector residual(const Vector& z) const { return residual(z, p_.constraints(z.head(n_))); }

  double merit(const Vector& z, const Vector& lambda, double rho) const {
    Vector h = residual(z);
    return p_.objective(z.head(n_)) + lambda.dot(h) + 0.5 * rho * h.squaredNorm();
  }

  // Gradient of f + y^T h with respect to z.
  Vector gradient(const Vector& z, const SparseMatrix& J, const Vector& y) const {
    Vector g(size());
    g.head(n_) = p_.objective_gradient(z.head(n_)) + J.transpose() * y;
    for (int k = 0; k < ms_; ++k) g[n_ + k] = -y[ineq_[k]];
    return g;
  }

  SparseMatrix hessian(const Vector& z, const SparseMatrix& J, const Vector& y, double rho) const {
    SparseMatrix Hx = p_.lagrangian_hessian(z.head(n_), 1.0, y);
    SparseMatrix JtJ = SparseMatrix(J.transpose()) * J;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(Hx.nonZeros() + JtJ.nonZeros() + 4 * ms_);
    for (int col = 0; col < Hx.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(Hx, col); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
    for (int col = 0; col < JtJ.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(JtJ, col); it; ++it)
        trip.emplace_back(it.row(), it.col(), rho * it.value());
    SparseMatrix Jr = J;  // row access through column-major iteration
    for (int col = 0; col < Jr.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(Jr, col); it; ++it) {
        int k = slack_[it.row()];
        if (k < 0) continue;
        trip.emplace_back(it.col(), n_ + k, -rho * it.value());
        trip.emplace_back(n_ + k, it.col(), -rho * it.value());
      }
    }
    for (int k = 0; k < ms_; ++k) trip.emplace_back(n_ + k, n_ + k, rho);
    SparseMatrix K(size(), size());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
  }

  // Multipliers of inequality rows are those of their slack equations.
  const NlpProblem& problem() const { return p_; }

 private:
  const NlpProblem& p_;
  int n_;
  int ms_ = 0;
  std::vector<int> ineq_;
  std::vector<int> slack_;
  Vector lo_, hi_;
};

double projected_gradient_norm(const Vector& z, const Vector& g, const Subproblem& sp) {
  return (z - sp.project(z - g)).lpNorm<Eigen::Infinity>();
}

struct InnerOutcome {
  int iterations = 0;
  bool converged = false;
  bool numeric_failure = false;
};

// Projected Newton on the augmented Lagrangian with fixed lambda, rho.
InnerOutcome minimize_subproblem(const Subproblem& sp, Vector& z, const Vector& lambda, double rho,
                                 double tol, const SolverOptions& opts, double& shift_memory) {
  InnerOutcome out;
  const NlpProblem& p = sp.problem();
  const int N = sp.size();
  for (int it = 0; it < opts.max_inner_iterations; ++it) {
    Vector x = z.head(sp.n());
    Vector c = p.constraints(x);
    Vector h = sp.residual(z, c);
    Vector y = lambda + rho * h;
    SparseMatrix J = p.jacobian(x);
    Vector g = sp.gradient(z, J, y);
    double pg = projected_gradient_norm(z, g, sp);
    if (!std::isfinite(pg)) {
      out.numeric_failure = true;
      return out;
    }
    if (pg <= tol) {
      out.converged = true;
      return out;
    }
    out.iterations = it + 1;

    const double eps = std::min(1e-3, pg);
    std::vector<int> free_index(N, -1);
    std::vector<int> free_vars;
    for (int i = 0; i < N; ++i) {
      bool fixed = sp.lo()[i] == sp.hi()[i];
      bool at_lo = z[i] - sp.lo()[i] <= eps && g[i] > 0;
      bool at_hi = sp.hi()[i] - z[i] <= eps && g[i] < 0;
      if (!(fixed || at_lo || at_hi)) {
        free_index[i] = static_cast<int>(free_vars.size());
        free_vars.push_back(i);
      }
    }

    SparseMatrix K = sp.hessian(z, J, y, rho);
    Vector d = Vector::Zero(N);
    for (int i = 0; i < N; ++i) {
      if (free_index[i] >= 0) continue;
      double kii = K.coeff(i, i);
      d[i] = -g[i] / (kii > 0 ? kii : 1.0);
    }

    const int nf = static_cast<int>(free_vars.size());
    if (nf > 0) {
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(K.nonZeros());
      for (int col = 0; col < K.outerSize(); ++col) {
        int fc = free_index[col];
        if (fc < 0) continue;
        for (SparseMatrix::InnerIterator kt(K, col); kt; ++kt) {
          int fr = free_index[kt.row()];
          if (fr >= 0) trip.emplace_back(fr, fc, kt.value());
        }
      }
      SparseMatrix Kf(nf, nf);
      Kf.setFromTriplets(trip.begin(), trip.end());
      Vector gf(nf);
      for (int k = 0; k < nf; ++k) gf[k] = g[free_vars[k]];

      // Levenberg shift: try the remembered shift first, then grow by 2.
      double shift = shift_memory > 0 ? std::max(opts.regularization_floor, shift_memory / 4.0) : 0.0;
      bool solved = false;
      Vector df;
      Eigen::SimplicialLDLT<SparseMatrix> ldlt;
      bool analyzed = false;
      for (int attempt = 0; attempt < 200; ++attempt) {
        SparseMatrix Ks = Kf;
        if (shift > 0) {
          for (int k = 0; k < nf; ++k) Ks.coeffRef(k, k) += shift;
        }
        if (!analyzed) {
          ldlt.analyzePattern(Ks);
          analyzed = true;
        }
        ldlt.factorize(Ks);
        if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0) {
          df = ldlt.solve(-gf);
          if (df.allFinite()) {
            solved = true;
            break;
          }
        }
        shift = shift == 0.0 ? opts.regularization_floor : 2.0 * shift;
        if (shift > 1e20) break;
      }
      if (!solved) {
        out.numeric_failure = true;
        return out;
      }
      shift_memory = shift;
      for (int k = 0; k < nf; ++k) d[free_vars[k]] = df[k];
    }

    // Armijo search along the projected path.
    const double phi0 = p.objective(x) + lambda.dot(h) + 0.5 * rho * h.squaredNorm();
    double alpha = 1.0;
    bool accepted = false;
    Vector znew;
    for (int ls = 0; ls < 60; ++ls) {
      znew = sp.project(z + alpha * d);
      double decrease = g.dot(znew - z);
      if (decrease >= 0 && ls == 0) {
        d = -g;  // not a descent path: fall back to the projected gradient
        znew = sp.project(z + alpha * d);
        decrease = g.dot(znew - z);
      }
      double phi = sp.merit(znew, lambda, rho);
      if (std::isfinite(phi) && phi <= phi0 + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No progress possible at working precision.
      out.converged = pg <= 1e3 * tol;
      return out;
    }
    z = znew;
  }
  return out;
}

// Least-squares multipliers minimizing |grad f + J^T lambda| over free variables.
Vector estimate_multipliers(const NlpProblem& p, const Vector& x) {
  const int n = p.variable_count();
  Vector g = p.objective_gradient(x);
  SparseMatrix J = p.jacobian(x);
  Vector lo = p.lower_bounds(), hi = p.upper_bounds();
  std::vector<Eigen::Triplet<double>> trip;
  for (int col = 0; col < J.outerSize(); ++col) {
    bool free = !(x[col] - lo[col] <= 1e-10 || hi[col] - x[col] <= 1e-10);
    if (!free) continue;
    for (SparseMatrix::InnerIterator it(J, col); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
  }
  SparseMatrix Jf(p.row_count(), n);
  Jf.setFromTriplets(trip.begin(), trip.end());
  for (int i = 0; i < n; ++i) {
    if (x[i] - lo[i] <= 1e-10 || hi[i] - x[i] <= 1e-10) g[i] = 0.0;
  }
  SparseMatrix A = Jf * SparseMatrix(Jf.transpose());
  for (int r = 0; r < p.row_count(); ++r) A.coeffRef(r, r) += 1e-8;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(A);
  if (ldlt.info() != Eigen::Success) return Vector::Zero(p.row_count());
  Vector lam = ldlt.solve(-(Jf * g));
  if (!lam.allFinite()) return Vector::Zero(p.row_count());
  return lam;
}

}  // namespace

BackendResult AugmentedLagrangianBackend::solve(const NlpProblem& problem, const Vector& start,
                                                const Vector* duals, const SolverOptions& opts) {
  opts.validate();
  Subproblem sp(problem);
  BackendResult res;
  Vector z = sp.make_start(start);
  const int m = problem.row_count();

  Vector lambda;
  if (duals != nullptr && duals->size() == m) {
    lambda = *duals;
  } else {
    double feas0 = sp.residual(z).lpNorm<Eigen::Infinity>();
    lambda = feas0 <= 1e-6 ? estimate_multipliers(problem, z.head(sp.n())) : Vector::Zero(m);
  }
  double rho = opts.initial_penalty;
  double shift_memory = 0.0;
  double prev_feas = kInf;

  for (int outer = 1; outer <= opts.max_outer_iterations; ++outer) {
    res.outer_iterations = outer;
    InnerOutcome inner =
        minimize_subproblem(sp, z, lambda, rho, 0.1 * opts.stationarity_tol, opts, shift_memory);
    res.inner_iterations += inner.iterations;
    if (inner.numeric_failure) {
      res.status = SolveStatus::NumericFailure;
      break;
    }
    Vector h = sp.residual(z);
    double feas = m > 0 ? h.lpNorm<Eigen::Infinity>() : 0.0;
    Vector y = lambda + rho * h;
    SparseMatrix J = problem.jacobian(z.head(sp.n()));
    double stat = projected_gradient_norm(z, sp.gradient(z, J, y), sp);
    if (log::level() >= log::Level::Debug) {
      std::ostringstream os;
      os << "AL outer " << outer << ": rho=" << rho << " feas=" << feas << " stat=" << stat
         << " inner=" << inner.iterations;
      log::debug(os.str());
    }
    if (feas <= opts.feasibility_tol && stat <= opts.stationarity_tol) {
      lambda = y;
      res.status = SolveStatus::LocalOptimum;
      res.stationarity = stat;
      res.feasibility = feas;
      break;
    }
    if (feas <= 0.25 * prev_feas || feas <= opts.feasibility_tol) {
      lambda = y;
    } else {
      rho *= 10.0;
      if (rho > opts.max_penalty) {
        res.status = SolveStatus::Infeasible;
        res.stationarity = stat;
        res.feasibility = feas;
        break;
      }
    }
    prev_feas = feas;
    res.status = SolveStatus::IterationLimit;
    res.stationarity = stat;
    res.feasibility = feas;
  }
  res.x = z.head(sp.n());
  res.duals = lambda;
  return res;
}

double complementarity_residual(const NlpInstance& inst, const Vector& x) {
  double worst = 0.0;
  for (std::size_t k = 0; k < inst.layout.flow.size(); ++k) {
    worst = std::max(worst, x[inst.layout.flow_plus[k]] * x[inst.layout.flow_minus[k]]);
  }
  return worst;
}

double active_set_residual(double g, double gap_lo, double gap_hi, double activity) {
  bool at_lo = gap_lo <= activity;
  bool at_hi = gap_hi <= activity;
  if (at_lo && at_hi) return 0.0;
  if (at_lo) return std::max(0.0, -g);
  if (at_hi) return std::max(0.0, g);
  return std::abs(g);
}

KktReport check_kkt(const NlpInstance& inst, const Vector& x, const Vector& duals, double activity) {
  const NlpProblem& p = inst.problem;
  Vector xs = inst.to_scaled(x);
  Vector g = p.objective_gradient(xs);
  if (duals.size() == p.row_count()) g += p.jacobian(xs).transpose() * duals;
  Vector lo = p.lower_bounds(), hi = p.upper_bounds();
  KktReport rep;
  for (Eigen::Index i = 0; i < xs.size(); ++i)
    rep.stationarity = std::max(rep.stationarity, active_set_residual(g[i], xs[i] - lo[i], hi[i] - xs[i], activity));
  rep.residuals = residual_norms(inst, x);
  for (const auto& [f, v] : rep.residuals) rep.feasibility = std::max(rep.feasibility, v);
  return rep;
}

SolveResult solve(NlpInstance& inst, const Vector* start, const SolverOptions& opts, NlpBackend* backend,
                  const Vector* start_duals) {
  opts.validate();
  auto t0 = std::chrono::steady_clock::now();
  InteriorPointBackend interior;
  AugmentedLagrangianBackend augmented;
  NlpBackend* builtin = &interior;
  if (opts.method == SolverMethod::AugmentedLagrangian) builtin = &augmented;
  NlpBackend& be = backend ? *backend : *builtin;

  Vector x_si = start ? *start : cold_start(inst);
  if (x_si.size() != inst.problem.variable_count()) throw AssemblyError("start vector does not match the layout");
  Vector xs = inst.to_scaled(x_si);
  // Start inside the bounds.
  xs = xs.cwiseMax(inst.problem.lower_bounds()).cwiseMin(inst.problem.upper_bounds());

  std::vector<double> schedule = opts.relaxation_schedule();
  // A start with multipliers skips the relaxation steps it already satisfies.
  bool have_duals = start_duals != nullptr && start_duals->size() == inst.problem.row_count();
  std::size_t first = 0;
  if (start != nullptr && have_duals) {
    double comp0 = complementarity_residual(inst, inst.to_si(xs));
    while (first + 1 < schedule.size() && comp0 <= schedule[first + 1]) ++first;
  }

  SolveResult res;
  Vector duals;
  if (have_duals) duals = *start_duals;
  BackendResult br;
  if (start != nullptr && have_duals && first + 1 == schedule.size()) {
    // Nothing to do when the start already is a KKT point of the last relaxation.
    inst.problem.set_relaxation(schedule.back());
    KktReport k0 = check_kkt(inst, inst.to_si(xs), duals, opts.activity_tol);
    if (k0.stationarity <= opts.stationarity_tol && k0.feasibility <= opts.feasibility_tol) {
      br.status = SolveStatus::LocalOptimum;
      br.x = xs;
      br.duals = duals;
      res.final_delta = schedule.back();
      first = schedule.size();
    }
  }
  for (std::size_t s = first; s < schedule.size(); ++s) {
    inst.problem.set_relaxation(schedule[s]);
    br = be.solve(inst.problem, xs, have_duals ? &duals : nullptr, opts);
    res.homotopy_steps++;
    res.outer_iterations += br.outer_iterations;
    res.inner_iterations += br.inner_iterations;
    res.final_delta = schedule[s];
    if (br.status != SolveStatus::LocalOptimum) break;
    xs = br.x;
    duals = br.duals;
    have_duals = true;
  }
  res.status = br.status;
  res.x = inst.to_si(br.x);
  res.duals = br.duals;
  for (int f = 0; f < kFamilyCount; ++f) res.dual_norms[static_cast<Family>(f)] = 0.0;
  for (int r = 0; r < inst.problem.row_count() && r < res.duals.size(); ++r) {
    double& slot = res.dual_norms[inst.problem.rows()[r].family];
    slot = std::max(slot, std::abs(res.duals[r]));
  }
  res.kkt = check_kkt(inst, res.x, res.duals, opts.activity_tol);
  res.objective = objective_value(inst, res.x);
  res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace dhn
