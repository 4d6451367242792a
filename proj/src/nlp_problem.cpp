#include "dhn/nlp_problem.hpp"

#include <cmath>

#include "dhn/errors.hpp"

namespace dhn {

const char* family_name(Family f) {
  switch (f) {
    case Family::Momentum: return "momentum";
    case Family::EnergyDiscretized: return "energy-discretized";
    case Family::MassNode: return "mass-node";
    case Family::PressureContinuity: return "pressure-continuity";
    case Family::MixingBalance: return "mixing-balance";
    case Family::MixingOut: return "mixing-out";
    case Family::MixingIn: return "mixing-in";
    case Family::FlowSplit: return "flow-split";
    case Family::Complementarity: return "complementarity";
    case Family::Depot: return "depot";
    case Family::Consumer: return "consumer";
    case Family::Bounds: return "bounds";
  }
  return "unknown";
}

int NlpProblem::add_variable(Variable v) {
  if (v.lower > v.upper) throw AssemblyError("variable '" + v.name + "' has empty bounds");
  vars_.push_back(std::move(v));
  return static_cast<int>(vars_.size()) - 1;
}

int NlpProblem::add_row(Row r) {
  const int n = variable_count();
  for (const auto& t : r.terms) {
    bool bad_i = t.kind != TermKind::Constant && (t.i < 0 || t.i >= n);
    bool bad_j = t.kind == TermKind::Bilinear && (t.j < 0 || t.j >= n || t.j == t.i);
    if (bad_i || bad_j) throw AssemblyError("row '" + r.name + "' references an invalid variable");
  }
  if (r.family == Family::Complementarity) r.upper = delta_;
  rows_.push_back(std::move(r));
  return static_cast<int>(rows_.size()) - 1;
}

void NlpProblem::add_objective_term(Term t) { objective_.push_back(t); }

void NlpProblem::set_relaxation(double delta) {
  if (delta < 0) throw AssemblyError("relaxation parameter must be nonnegative");
  delta_ = delta;
  for (auto& r : rows_) {
    if (r.family == Family::Complementarity) r.upper = delta;
    if (r.family == Family::MixingOut || r.family == Family::MixingIn) {
      r.lower = -delta;
      r.upper = delta;
    }
  }
}

Vector NlpProblem::lower_bounds() const {
  Vector l(variable_count());
  for (int i = 0; i < variable_count(); ++i) l[i] = vars_[i].lower;
  return l;
}

Vector NlpProblem::upper_bounds() const {
  Vector u(variable_count());
  for (int i = 0; i < variable_count(); ++i) u[i] = vars_[i].upper;
  return u;
}

double term_value(const Term& t, const Vector& x) {
  switch (t.kind) {
    case TermKind::Constant: return t.coef;
    case TermKind::Linear: return t.coef * x[t.i];
    case TermKind::Bilinear: return t.coef * x[t.i] * x[t.j];
    case TermKind::Square: return t.coef * x[t.i] * x[t.i];
    case TermKind::AbsSquare: return t.coef * std::abs(x[t.i]) * x[t.i];
    case TermKind::AbsCube: {
      double a = std::abs(x[t.i]);
      return t.coef * a * a * a;
    }
  }
  return 0.0;
}

namespace {

template <class F>
void term_gradient(const Term& t, const Vector& x, double w, F&& add) {
  switch (t.kind) {
    case TermKind::Constant: break;
    case TermKind::Linear: add(t.i, w * t.coef); break;
    case TermKind::Bilinear:
      add(t.i, w * t.coef * x[t.j]);
      add(t.j, w * t.coef * x[t.i]);
      break;
    case TermKind::Square: add(t.i, w * 2.0 * t.coef * x[t.i]); break;
    case TermKind::AbsSquare: add(t.i, w * 2.0 * t.coef * std::abs(x[t.i])); break;
    case TermKind::AbsCube: add(t.i, w * 3.0 * t.coef * std::abs(x[t.i]) * x[t.i]); break;
  }
}

template <class F>
void term_hessian(const Term& t, const Vector& x, double w, F&& add) {
  switch (t.kind) {
    case TermKind::Constant:
    case TermKind::Linear: break;
    case TermKind::Bilinear:
      add(t.i, t.j, w * t.coef);
      add(t.j, t.i, w * t.coef);
      break;
    case TermKind::Square: add(t.i, t.i, w * 2.0 * t.coef); break;
    case TermKind::AbsSquare: {
      double s = x[t.i] > 0 ? 1.0 : (x[t.i] < 0 ? -1.0 : 0.0);
      add(t.i, t.i, w * 2.0 * t.coef * s);
      break;
    }
    case TermKind::AbsCube: add(t.i, t.i, w * 6.0 * t.coef * std::abs(x[t.i])); break;
  }
}

}  // namespace

double NlpProblem::objective(const Vector& x) const {
  double f = 0.0;
  for (const auto& t : objective_) f += term_value(t, x);
  return f;
}

Vector NlpProblem::objective_gradient(const Vector& x) const {
  Vector g = Vector::Zero(variable_count());
  for (const auto& t : objective_) term_gradient(t, x, 1.0, [&](int i, double v) { g[i] += v; });
  return g;
}

double NlpProblem::row_value(int r, const Vector& x) const {
  double s = 0.0;
  for (const auto& t : rows_[r].terms) s += term_value(t, x);
  return s;
}

Vector NlpProblem::constraints(const Vector& x) const {
  Vector c(row_count());
  for (int r = 0; r < row_count(); ++r) c[r] = row_value(r, x);
  return c;
}

double NlpProblem::row_violation(int r, double value) const {
  const Row& row = rows_[r];
  if (value < row.lower) return row.lower - value;
  if (value > row.upper) return value - row.upper;
  return 0.0;
}

SparseMatrix NlpProblem::jacobian(const Vector& x) const {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(rows_.size() * 4);
  for (int r = 0; r < row_count(); ++r) {
    for (const auto& t : rows_[r].terms) {
      term_gradient(t, x, 1.0, [&](int i, double v) { trip.emplace_back(r, i, v); });
    }
  }
  SparseMatrix J(row_count(), variable_count());
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

SparseMatrix NlpProblem::lagrangian_hessian(const Vector& x, double w0, const Vector& w) const {
  std::vector<Eigen::Triplet<double>> trip;
  auto add = [&](int i, int j, double v) {
    if (v != 0.0) trip.emplace_back(i, j, v);
  };
  if (w0 != 0.0) {
    for (const auto& t : objective_) term_hessian(t, x, w0, add);
  }
  for (int r = 0; r < row_count(); ++r) {
    if (w[r] == 0.0) continue;
    for (const auto& t : rows_[r].terms) term_hessian(t, x, w[r], add);
  }
  SparseMatrix H(variable_count(), variable_count());
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

Eigen::MatrixXd finite_difference_jacobian(const NlpProblem& p, const Vector& x, double h) {
  Eigen::MatrixXd J(p.row_count(), p.variable_count());
  Vector xp = x, xm = x;
  for (int i = 0; i < p.variable_count(); ++i) {
    double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    J.col(i) = (p.constraints(xp) - p.constraints(xm)) / (2.0 * step);
    xp[i] = xm[i] = x[i];
  }
  return J;
}

}  // namespace dhn
