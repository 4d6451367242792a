#pragma once

// Generic smooth NLP made of rows that are short sums of elementary terms.
// Derivatives are exact and assembled from the term list, which keeps the
// district heating constraints readable and gives solvers sparse Jacobians
// and Hessians for free.

#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dhn {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class TermKind {
  Constant,   // c
  Linear,     // c x_i
  Bilinear,   // c x_i x_j  (i != j)
  Square,     // c x_i^2
  AbsSquare,  // c |x_i| x_i
  AbsCube,    // c |x_i|^3
};

struct Term {
  TermKind kind = TermKind::Constant;
  double coef = 0.0;
  int i = -1;
  int j = -1;
};

enum class Family {
  Momentum,
  EnergyDiscretized,
  MassNode,
  PressureContinuity,
  MixingBalance,
  MixingOut,
  MixingIn,
  FlowSplit,
  Complementarity,
  Depot,
  Consumer,
  Bounds,
};

inline constexpr int kFamilyCount = 12;
const char* family_name(Family f);

struct Row {
  std::vector<Term> terms;
  double lower = 0.0;
  double upper = 0.0;
  Family family = Family::MassNode;
  std::string name;

  bool is_equality() const { return lower == upper; }
};

/// Variables live in scaled units: SI value = scale * scaled value.
struct Variable {
  std::string name;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double scale = 1.0;
};

struct JacobianEntry {
  int row;
  int col;
};

class NlpProblem {
 public:
  int add_variable(Variable v);
  int add_row(Row r);
  void add_objective_term(Term t);

  int variable_count() const { return static_cast<int>(vars_.size()); }
  int row_count() const { return static_cast<int>(rows_.size()); }
  const std::vector<Variable>& variables() const { return vars_; }
  Variable& variable(int i) { return vars_[i]; }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<Term>& objective_terms() const { return objective_; }

  /// Relaxes the complementarity rows to q+ q- <= delta and the mixing rows
  /// q+- (e_end - e_node) to [-delta, delta].
  void set_relaxation(double delta);
  double relaxation() const { return delta_; }

  Vector lower_bounds() const;
  Vector upper_bounds() const;

  double objective(const Vector& x) const;
  Vector objective_gradient(const Vector& x) const;
  Vector constraints(const Vector& x) const;
  double row_value(int r, const Vector& x) const;
  SparseMatrix jacobian(const Vector& x) const;
  /// Full symmetric Hessian of  w0 * f + sum_r w[r] * c_r.
  SparseMatrix lagrangian_hessian(const Vector& x, double w0, const Vector& w) const;

  /// Violation of row r: distance of c_r(x) to [lower, upper].
  double row_violation(int r, double value) const;

 private:
  std::vector<Variable> vars_;
  std::vector<Row> rows_;
  std::vector<Term> objective_;
  double delta_ = 0.0;
};

double term_value(const Term& t, const Vector& x);

/// Central finite-difference Jacobian, for derivative audits.
Eigen::MatrixXd finite_difference_jacobian(const NlpProblem& p, const Vector& x, double h = 1e-6);

}  // namespace dhn
