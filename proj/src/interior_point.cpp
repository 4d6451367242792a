#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "dhn/errors.hpp"
#include "dhn/log.hpp"
#include "dhn/nlp_solver.hpp"

namespace dhn {

namespace {

constexpr double kFractionToBoundaryMin = 0.99;
constexpr double kArmijo = 1e-4;
constexpr double kSigmaSafeguard = 1e10;

// Equality form of the problem in z = (x, s): one slack per inequality row,
// bounds on z only.
class BarrierProblem {
 public:
  explicit BarrierProblem(const NlpProblem& p) : p_(p), n_(p.variable_count()), m_(p.row_count()) {
    slack_.assign(m_, -1);
    for (int r = 0; r < m_; ++r) {
      if (!p.rows()[r].is_equality()) {
        slack_[r] = static_cast<int>(ineq_.size());
        ineq_.push_back(r);
      }
    }
    const int N = size();
    lo_.resize(N);
    hi_.resize(N);
    lo_.head(n_) = p.lower_bounds();
    hi_.head(n_) = p.upper_bounds();
    for (std::size_t k = 0; k < ineq_.size(); ++k) {
      lo_[n_ + k] = p.rows()[ineq_[k]].lower;
      hi_[n_ + k] = p.rows()[ineq_[k]].upper;
    }
    free_index_.assign(N, -1);
    for (int i = 0; i < N; ++i) {
      if (lo_[i] == hi_[i]) continue;
      free_index_[i] = static_cast<int>(free_.size());
      free_.push_back(i);
    }
  }

  int n() const { return n_; }
  int m() const { return m_; }
  int size() const { return n_ + static_cast<int>(ineq_.size()); }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }
  bool has_lo(int i) const { return free_index_[i] >= 0 && std::isfinite(lo_[i]); }
  bool has_hi(int i) const { return free_index_[i] >= 0 && std::isfinite(hi_[i]); }
  const std::vector<int>& free_vars() const { return free_; }
  int free_index(int i) const { return free_index_[i]; }
  const NlpProblem& problem() const { return p_; }

  Vector slacks_of(const Vector& x) const {
    Vector c = p_.constraints(x);
    Vector s(ineq_.size());
    for (std::size_t k = 0; k < ineq_.size(); ++k) s[k] = c[ineq_[k]];
    return s;
  }

  Vector residual(const Vector& z) const {
    Vector c = p_.constraints(z.head(n_));
    Vector h(m_);
    for (int r = 0; r < m_; ++r) {
      h[r] = slack_[r] >= 0 ? c[r] - z[n_ + slack_[r]] : c[r] - p_.rows()[r].lower;
    }
    return h;
  }

  // Jacobian of the residual with respect to z.
  SparseMatrix jacobian(const Vector& z) const {
    SparseMatrix Jx = p_.jacobian(z.head(n_));
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(Jx.nonZeros() + ineq_.size());
    for (int col = 0; col < Jx.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(Jx, col); it; ++it) trip.emplace_back(it.row(), col, it.value());
    for (std::size_t k = 0; k < ineq_.size(); ++k) trip.emplace_back(ineq_[k], n_ + static_cast<int>(k), -1.0);
    SparseMatrix J(m_, size());
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  }

  Vector objective_gradient(const Vector& z) const {
    Vector g = Vector::Zero(size());
    g.head(n_) = p_.objective_gradient(z.head(n_));
    return g;
  }

  double barrier(const Vector& z, double mu) const {
    double v = p_.objective(z.head(n_));
    for (int i : free_) {
      if (std::isfinite(lo_[i])) v -= mu * std::log(z[i] - lo_[i]);
      if (std::isfinite(hi_[i])) v += -mu * std::log(hi_[i] - z[i]);
    }
    return v;
  }

 private:
  const NlpProblem& p_;
  int n_;
  int m_;
  std::vector<int> ineq_;
  std::vector<int> slack_;
  std::vector<int> free_;
  std::vector<int> free_index_;
  Vector lo_, hi_;
};

struct Iterate {
  Vector z, lambda, zl, zu;
};

// Moves z strictly inside its bounds.
void push_inside(const BarrierProblem& bp, Vector& z, double kappa) {
  for (int i = 0; i < bp.size(); ++i) {
    double lo = bp.lo()[i], hi = bp.hi()[i];
    if (lo == hi) {
      z[i] = lo;
      continue;
    }
    double pl = kappa * std::max(1.0, std::abs(lo));
    double pu = kappa * std::max(1.0, std::abs(hi));
    if (std::isfinite(lo) && std::isfinite(hi)) {
      pl = std::min(pl, 0.25 * (hi - lo));
      pu = std::min(pu, 0.25 * (hi - lo));
    }
    if (std::isfinite(lo)) z[i] = std::max(z[i], lo + pl);
    if (std::isfinite(hi)) z[i] = std::min(z[i], hi - pu);
  }
}

struct KktFactor {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
  int nf = 0;
  int m = 0;

  Vector solve(const Vector& rhs) const { return ldlt.solve(rhs); }
};

// Assembles [W + Sigma + dw I, J^T; J, -dc I] over the free variables.
SparseMatrix kkt_matrix(const BarrierProblem& bp, const SparseMatrix& W, const Vector& sigma,
                        const SparseMatrix& J, double dw, double dc) {
  const int nf = static_cast<int>(bp.free_vars().size());
  const int m = bp.m();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(W.nonZeros() + 2 * J.nonZeros() + nf + m);
  for (int col = 0; col < W.outerSize(); ++col) {
    int fc = bp.free_index(col);
    if (fc < 0) continue;
    for (SparseMatrix::InnerIterator it(W, col); it; ++it) {
      int fr = bp.free_index(it.row());
      if (fr >= 0) trip.emplace_back(fr, fc, it.value());
    }
  }
  for (int k = 0; k < nf; ++k) trip.emplace_back(k, k, sigma[bp.free_vars()[k]] + dw);
  for (int col = 0; col < J.outerSize(); ++col) {
    int fc = bp.free_index(col);
    if (fc < 0) continue;
    for (SparseMatrix::InnerIterator it(J, col); it; ++it) {
      trip.emplace_back(nf + it.row(), fc, it.value());
      trip.emplace_back(fc, nf + it.row(), it.value());
    }
  }
  for (int r = 0; r < m; ++r) trip.emplace_back(nf + r, nf + r, -dc);
  SparseMatrix K(nf + m, nf + m);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

// Factorizes with inertia correction. Returns false when no shift works.
bool factorize(const BarrierProblem& bp, const SparseMatrix& W, const Vector& sigma, const SparseMatrix& J,
               double mu, double& last_dw, const SolverOptions& opts, KktFactor& f) {
  const int nf = static_cast<int>(bp.free_vars().size());
  const int m = bp.m();
  f.nf = nf;
  f.m = m;
  double dw = 0.0;
  double dc = 0.0;
  bool analyzed = false;
  for (int attempt = 0; attempt < 80; ++attempt) {
    SparseMatrix K = kkt_matrix(bp, W, sigma, J, dw, dc);
    if (!analyzed) {
      f.ldlt.analyzePattern(K);
      analyzed = true;
    }
    f.ldlt.factorize(K);
    bool ok = f.ldlt.info() == Eigen::Success;
    int pos = 0, neg = 0, zero = 0;
    if (ok) {
      const Vector& D = f.ldlt.vectorD();
      for (int i = 0; i < D.size(); ++i) {
        if (!std::isfinite(D[i]) || D[i] == 0.0) {
          ++zero;
        } else if (D[i] > 0) {
          ++pos;
        } else {
          ++neg;
        }
      }
    }
    if (ok && zero == 0 && pos == nf && neg == m) {
      if (dw > 0) last_dw = dw;
      return true;
    }
    // Missing negative pivots mean dependent constraint rows.
    if (!ok || zero > 0 || neg < m) {
      if (dc == 0.0) {
        dc = 1e-8 * std::pow(mu, 0.25);
        continue;
      }
      if (ok && zero == 0 && pos <= nf) {
        dc *= 10.0;
        continue;
      }
    }
    if (dw == 0.0) {
      dw = last_dw == 0.0 ? 1e-4 : std::max(opts.regularization_floor, last_dw / 3.0);
    } else {
      dw *= last_dw == 0.0 ? 100.0 : 8.0;
    }
    if (dw > 1e40) return false;
  }
  return false;
}

double max_step(const Vector& v, const Vector& dv, const Vector& lo, const Vector& hi, double tau,
                const BarrierProblem& bp) {
  double a = 1.0;
  for (int i : bp.free_vars()) {
    if (dv[i] < 0 && std::isfinite(lo[i])) a = std::min(a, -tau * (v[i] - lo[i]) / dv[i]);
    if (dv[i] > 0 && std::isfinite(hi[i])) a = std::min(a, tau * (hi[i] - v[i]) / dv[i]);
  }
  return a;
}

double max_dual_step(const Vector& zl, const Vector& dzl, const Vector& zu, const Vector& dzu, double tau,
                     const BarrierProblem& bp) {
  double a = 1.0;
  for (int i : bp.free_vars()) {
    if (bp.has_lo(i) && dzl[i] < 0) a = std::min(a, -tau * zl[i] / dzl[i]);
    if (bp.has_hi(i) && dzu[i] < 0) a = std::min(a, -tau * zu[i] / dzu[i]);
  }
  return a;
}

struct Errors {
  double stationarity = 0.0;
  double feasibility = 0.0;
  double complementarity = 0.0;  // against the target mu
  double projected = 0.0;        // projected gradient without bound multipliers
};

Errors optimality_errors(const BarrierProblem& bp, const Iterate& it, const Vector& grad_l, const Vector& h,
                         double mu, double activity) {
  Errors e;
  for (int i : bp.free_vars()) {
    e.stationarity = std::max(e.stationarity, std::abs(grad_l[i]));
    // gradient without the bound multipliers: only its sign is checked near a bound
    double g = grad_l[i] + it.zl[i] - it.zu[i];
    e.projected = std::max(e.projected, active_set_residual(g, it.z[i] - bp.lo()[i], bp.hi()[i] - it.z[i], activity));
  }
  e.feasibility = h.size() ? h.lpNorm<Eigen::Infinity>() : 0.0;
  for (int i : bp.free_vars()) {
    if (bp.has_lo(i)) e.complementarity = std::max(e.complementarity, std::abs(it.zl[i] * (it.z[i] - bp.lo()[i]) - mu));
    if (bp.has_hi(i)) e.complementarity = std::max(e.complementarity, std::abs(it.zu[i] * (bp.hi()[i] - it.z[i]) - mu));
  }
  return e;
}

// Pairs (infeasibility, barrier value) that later trial points must improve on.
class Filter {
 public:
  void reset(double theta_max) {
    theta_max_ = theta_max;
    entries_.clear();
  }
  bool acceptable(double theta, double phi) const {
    if (!(theta <= theta_max_)) return false;
    for (const auto& [t, f] : entries_) {
      if (!(theta < t || phi < f)) return false;
    }
    return true;
  }
  void add(double theta, double phi) { entries_.emplace_back(theta, phi); }

 private:
  double theta_max_ = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> entries_;
};

}  // namespace

BackendResult InteriorPointBackend::solve(const NlpProblem& problem, const Vector& start, const Vector* duals,
                                          const SolverOptions& opts) {
  opts.validate();
  BarrierProblem bp(problem);
  const int n = bp.n();
  const int m = bp.m();
  const int N = bp.size();
  const bool warm = duals != nullptr && duals->size() == m;
  const std::vector<int>& free = bp.free_vars();
  const int nf = static_cast<int>(free.size());

  const double mu_min = std::min(opts.stationarity_tol, opts.feasibility_tol) / 1000.0;
  // Relaxed rows carry multipliers of order mu / delta, so a warm start
  // begins with the barrier no larger than the relaxation.
  double mu = opts.initial_barrier;
  if (warm) mu = std::max(mu_min, std::min(opts.warm_barrier, problem.relaxation()));

  Iterate it;
  it.z.resize(N);
  it.z.head(n) = start;
  it.z.tail(N - n) = bp.slacks_of(start);
  push_inside(bp, it.z, warm ? std::clamp(10.0 * mu, 1e-8, 1e-2) : 1e-2);
  it.lambda = warm ? *duals : Vector::Zero(m);
  it.zl = Vector::Zero(N);
  it.zu = Vector::Zero(N);
  for (int i : free) {
    if (bp.has_lo(i)) it.zl[i] = mu / (it.z[i] - bp.lo()[i]);
    if (bp.has_hi(i)) it.zu[i] = mu / (bp.hi()[i] - it.z[i]);
  }

  BackendResult res;
  res.status = SolveStatus::IterationLimit;
  res.outer_iterations = 1;
  double last_dw = 0.0;
  KktFactor factor;

  const double theta_start = bp.residual(it.z).lpNorm<1>();
  const double theta_min = 1e-4 * std::max(1.0, theta_start);
  const double theta_max = 1e4 * std::max(1.0, theta_start);
  Filter filter;
  filter.reset(theta_max);

  auto scatter = [&](const Vector& sol) {
    Vector d = Vector::Zero(N);
    for (int k = 0; k < nf; ++k) d[free[k]] = sol[k];
    return d;
  };

  for (int iter = 0; iter <= opts.max_inner_iterations; ++iter) {
    const Vector z = it.z;
    Vector h = bp.residual(z);
    SparseMatrix J = bp.jacobian(z);
    Vector gf = bp.objective_gradient(z);
    Vector grad_l = gf + J.transpose() * it.lambda - it.zl + it.zu;
    Errors e0 = optimality_errors(bp, it, grad_l, h, 0.0, opts.activity_tol);
    res.stationarity = e0.stationarity;
    res.feasibility = e0.feasibility;
    if (e0.stationarity <= opts.stationarity_tol && e0.feasibility <= opts.feasibility_tol &&
        e0.complementarity <= opts.stationarity_tol && e0.projected <= opts.stationarity_tol) {
      res.status = SolveStatus::LocalOptimum;
      break;
    }
    if (iter == opts.max_inner_iterations) break;

    Errors em = optimality_errors(bp, it, grad_l, h, mu, opts.activity_tol);
    while (mu > mu_min && std::max({em.stationarity, em.feasibility, em.complementarity}) <= 10.0 * mu) {
      mu = std::max(mu_min, std::min(0.2 * mu, std::pow(mu, 1.5)));
      em = optimality_errors(bp, it, grad_l, h, mu, opts.activity_tol);
      res.outer_iterations++;
      filter.reset(theta_max);
    }

    Vector sigma = Vector::Zero(N);
    Vector grad_phi = gf;
    for (int i : free) {
      if (bp.has_lo(i)) {
        double d = z[i] - bp.lo()[i];
        sigma[i] += it.zl[i] / d;
        grad_phi[i] -= mu / d;
      }
      if (bp.has_hi(i)) {
        double d = bp.hi()[i] - z[i];
        sigma[i] += it.zu[i] / d;
        grad_phi[i] += mu / d;
      }
    }
    SparseMatrix W(N, N);
    {
      SparseMatrix Wx = problem.lagrangian_hessian(z.head(n), 1.0, it.lambda);
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(Wx.nonZeros());
      for (int col = 0; col < Wx.outerSize(); ++col)
        for (SparseMatrix::InnerIterator kt(Wx, col); kt; ++kt) trip.emplace_back(kt.row(), col, kt.value());
      W.setFromTriplets(trip.begin(), trip.end());
    }
    if (!factorize(bp, W, sigma, J, mu, last_dw, opts, factor)) {
      res.status = SolveStatus::NumericFailure;
      break;
    }
    Vector dual_res = grad_phi + J.transpose() * it.lambda;
    Vector rhs(nf + m);
    for (int k = 0; k < nf; ++k) rhs[k] = -dual_res[free[k]];
    rhs.tail(m) = -h;
    Vector sol = factor.solve(rhs);
    if (!sol.allFinite()) {
      res.status = SolveStatus::NumericFailure;
      break;
    }
    Vector dz = scatter(sol);
    Vector dlambda = sol.tail(m);
    Vector dzl = Vector::Zero(N), dzu = Vector::Zero(N);
    for (int i : free) {
      if (bp.has_lo(i)) {
        double d = z[i] - bp.lo()[i];
        dzl[i] = mu / d - it.zl[i] - it.zl[i] / d * dz[i];
      }
      if (bp.has_hi(i)) {
        double d = bp.hi()[i] - z[i];
        dzu[i] = mu / d - it.zu[i] + it.zu[i] / d * dz[i];
      }
    }

    const double tau = std::max(kFractionToBoundaryMin, 1.0 - mu);
    const double alpha_max = max_step(z, dz, bp.lo(), bp.hi(), tau, bp);
    const double alpha_dual = max_dual_step(it.zl, dzl, it.zu, dzu, tau, bp);

    // Filter line search on (residual 1-norm, barrier function).
    const double theta = h.lpNorm<1>();
    const double phi = bp.barrier(z, mu);
    const double gd = grad_phi.dot(dz);
    const double phi_slack = 10.0 * std::numeric_limits<double>::epsilon() * std::abs(phi);
    double alpha_min = 0.05 * 1e-5;
    if (gd < 0) {
      alpha_min = 0.05 * std::min({1e-5, 1e-8 * theta / -gd, std::pow(theta, 1.1) / std::pow(-gd, 2.3)});
    }

    struct Verdict {
      bool accepted = false;
      bool armijo = false;
    };
    auto judge = [&](double alpha, double theta_t, double phi_t) {
      Verdict v;
      if (!std::isfinite(phi_t) || !filter.acceptable(theta_t, phi_t)) return v;
      bool switching = gd < 0 && alpha * std::pow(-gd, 2.3) > std::pow(theta, 1.1);
      if (theta <= theta_min && switching) {
        v.armijo = true;
        v.accepted = phi_t <= phi + kArmijo * alpha * gd + phi_slack;
      } else {
        v.accepted = theta_t <= (1.0 - 1e-5) * theta || phi_t <= phi - 1e-8 * theta + phi_slack;
      }
      return v;
    };

    double alpha = alpha_max;
    Verdict verdict;
    Vector z_new;
    while (alpha >= alpha_min) {
      z_new = z + alpha * dz;
      double theta_t = bp.residual(z_new).lpNorm<1>();
      double phi_t = bp.barrier(z_new, mu);
      verdict = judge(alpha, theta_t, phi_t);
      if (verdict.accepted) break;
      if (alpha == alpha_max && theta_t >= theta) {
        // Second-order corrections for the curvature of the constraints.
        Vector c_soc = alpha * h + bp.residual(z_new);
        double theta_old = theta_t;
        for (int p = 0; p < 4; ++p) {
          Vector rhs2 = rhs;
          rhs2.tail(m) = -c_soc;
          Vector sol2 = factor.solve(rhs2);
          if (!sol2.allFinite()) break;
          Vector dz2 = scatter(sol2);
          double a2 = max_step(z, dz2, bp.lo(), bp.hi(), tau, bp);
          Vector z_soc = z + a2 * dz2;
          Vector h_soc = bp.residual(z_soc);
          double theta_soc = h_soc.lpNorm<1>();
          verdict = judge(alpha, theta_soc, bp.barrier(z_soc, mu));
          if (verdict.accepted) {
            z_new = z_soc;
            break;
          }
          if (theta_soc > 0.99 * theta_old) break;
          theta_old = theta_soc;
          c_soc = a2 * c_soc + h_soc;
        }
        if (verdict.accepted) break;
      }
      alpha *= 0.5;
    }

    if (verdict.accepted) {
      if (!verdict.armijo) filter.add((1.0 - 1e-5) * theta, phi - 1e-8 * theta);
      it.z = z_new;
      it.lambda += alpha * dlambda;
      it.zl += alpha_dual * dzl;
      it.zu += alpha_dual * dzu;
    } else if (theta <= opts.feasibility_tol && mu > mu_min) {
      // Feasible and stuck at working precision: move on to the next barrier problem.
      mu = std::max(mu_min, std::min(0.2 * mu, std::pow(mu, 1.5)));
      res.outer_iterations++;
      filter.reset(theta_max);
      alpha = 0.0;
    } else {
      // Feasibility restoration: minimum-norm Gauss-Newton steps on the
      // residual until the filter accepts the point.
      filter.add(theta, phi);
      bool restored = false;
      SparseMatrix zero(N, N);
      double theta_r = theta;
      for (int r = 0; r < 50 && !restored; ++r) {
        Vector hr = bp.residual(it.z);
        theta_r = hr.lpNorm<1>();
        SparseMatrix Jr = bp.jacobian(it.z);
        Vector sig = Vector::Constant(N, std::sqrt(mu));
        for (int i : free) {
          if (bp.has_lo(i)) sig[i] += it.zl[i] / (it.z[i] - bp.lo()[i]);
          if (bp.has_hi(i)) sig[i] += it.zu[i] / (bp.hi()[i] - it.z[i]);
        }
        double dw_r = 0.0;
        KktFactor fr;
        if (!factorize(bp, zero, sig, Jr, mu, dw_r, opts, fr)) break;
        Vector rr = Vector::Zero(nf + m);
        rr.tail(m) = -hr;
        Vector sr = fr.solve(rr);
        if (!sr.allFinite()) break;
        Vector dr = scatter(sr);
        double a = max_step(it.z, dr, bp.lo(), bp.hi(), tau, bp);
        bool moved = false;
        for (int ls = 0; ls < 30; ++ls, a *= 0.5) {
          Vector zt = it.z + a * dr;
          double tt = bp.residual(zt).lpNorm<1>();
          if (tt <= (1.0 - 1e-4 * a) * theta_r) {
            it.z = zt;
            moved = true;
            theta_r = tt;
            break;
          }
        }
        if (!moved) break;
        restored = theta_r <= 0.9 * theta && filter.acceptable(theta_r, bp.barrier(it.z, mu));
        if (theta_r <= opts.feasibility_tol * 1e-2) restored = restored || filter.acceptable(theta_r, bp.barrier(it.z, mu));
      }
      if (!restored) {
        res.status = theta_r > opts.feasibility_tol ? SolveStatus::Infeasible : SolveStatus::NumericFailure;
        if (log::level() >= log::Level::Debug) log::debug("interior point: restoration failed");
        break;
      }
      for (int i : free) {
        if (bp.has_lo(i)) it.zl[i] = std::min(it.zl[i], kSigmaSafeguard * mu / (it.z[i] - bp.lo()[i]));
        if (bp.has_hi(i)) it.zu[i] = std::min(it.zu[i], kSigmaSafeguard * mu / (bp.hi()[i] - it.z[i]));
      }
      alpha = 0.0;
    }
    res.inner_iterations = iter + 1;

    for (int i : free) {
      if (bp.has_lo(i)) {
        double d = it.z[i] - bp.lo()[i];
        it.zl[i] = std::clamp(it.zl[i], mu / (kSigmaSafeguard * d), kSigmaSafeguard * mu / d);
      }
      if (bp.has_hi(i)) {
        double d = bp.hi()[i] - it.z[i];
        it.zu[i] = std::clamp(it.zu[i], mu / (kSigmaSafeguard * d), kSigmaSafeguard * mu / d);
      }
    }
    if (log::level() >= log::Level::Debug) {
      std::ostringstream os;
      os << "IP " << iter << ": mu=" << mu << " stat=" << e0.stationarity << " feas=" << e0.feasibility
         << " compl=" << e0.complementarity << " alpha=" << alpha << " dw=" << last_dw;
      log::debug(os.str());
    }
  }
  res.x = it.z.head(n);
  res.duals = it.lambda;
  return res;
}

}  // namespace dhn
