#pragma once

#include <cmath>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <fmt/core.h>

namespace ncdn::lp {

enum class Relation { less_equal, equal, greater_equal };

template <typename Scalar>
struct Term {
  Eigen::Index var;
  Scalar coef;
};

// minimize c'x subject to rows (a_i'x rel_i b_i) and lo <= x <= hi.
template <typename Scalar = double>
class LinearProgram {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;
  static constexpr Scalar infinity = std::numeric_limits<Scalar>::infinity();

  Eigen::Index add_variable(Scalar lo, Scalar hi, Scalar cost, std::string label = {}) {
    if (std::isnan(lo) || std::isnan(hi) || lo > hi || lo == infinity || hi == -infinity) {
      throw std::invalid_argument(fmt::format("variable '{}': bounds must satisfy lo <= hi", label));
    }
    if (!std::isfinite(cost)) throw std::invalid_argument("objective coefficient must be finite");
    const auto j = num_variables();
    if (label.empty()) label = fmt::format("x{}", j);
    lower_.push_back(lo);
    upper_.push_back(hi);
    cost_.push_back(cost);
    var_labels_.push_back(std::move(label));
    return j;
  }

  Eigen::Index add_constraint(std::span<const Term<Scalar>> terms, Relation rel, Scalar rhs,
                              std::string label = {}) {
    if (!std::isfinite(rhs)) throw std::invalid_argument("constraint right-hand side must be finite");
    const auto i = num_constraints();
    for (const auto& t : terms) {
      if (t.var < 0 || t.var >= num_variables()) {
        throw std::invalid_argument(
            fmt::format("constraint {} references variable {} of {}", i, t.var, num_variables()));
      }
      if (!std::isfinite(t.coef)) throw std::invalid_argument("coefficients must be finite");
      if (t.coef != Scalar(0)) triplets_.emplace_back(i, t.var, t.coef);
    }
    if (label.empty()) label = fmt::format("c{}", i);
    relation_.push_back(rel);
    rhs_.push_back(rhs);
    row_labels_.push_back(std::move(label));
    return i;
  }

  Eigen::Index add_constraint(std::initializer_list<Term<Scalar>> terms, Relation rel, Scalar rhs,
                              std::string label = {}) {
    return add_constraint(std::span<const Term<Scalar>>(terms.begin(), terms.size()), rel, rhs,
                          std::move(label));
  }

  // Dense row; its length must equal the current variable count.
  template <typename Derived>
  Eigen::Index add_constraint(const Eigen::MatrixBase<Derived>& row, Relation rel, Scalar rhs,
                              std::string label = {}) {
    if (row.size() != num_variables()) {
      throw std::invalid_argument(fmt::format("constraint row has {} coefficients for {} variables",
                                              row.size(), num_variables()));
    }
    std::vector<Term<Scalar>> terms;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (row(j) != Scalar(0)) terms.push_back({j, row(j)});
    }
    return add_constraint(std::span<const Term<Scalar>>(terms), rel, rhs, std::move(label));
  }

  void set_cost(Eigen::Index j, Scalar c) { cost_.at(j) = c; }
  void set_bounds(Eigen::Index j, Scalar lo, Scalar hi) {
    if (std::isnan(lo) || std::isnan(hi) || lo > hi) throw std::invalid_argument("bounds must satisfy lo <= hi");
    lower_.at(j) = lo;
    upper_.at(j) = hi;
  }

  Eigen::Index num_variables() const { return static_cast<Eigen::Index>(cost_.size()); }
  Eigen::Index num_constraints() const { return static_cast<Eigen::Index>(rhs_.size()); }
  Eigen::Index num_nonzeros() const { return static_cast<Eigen::Index>(triplets_.size()); }

  Scalar lower(Eigen::Index j) const { return lower_[j]; }
  Scalar upper(Eigen::Index j) const { return upper_[j]; }
  Scalar cost(Eigen::Index j) const { return cost_[j]; }
  const std::string& variable_label(Eigen::Index j) const { return var_labels_[j]; }
  Relation relation(Eigen::Index i) const { return relation_[i]; }
  Scalar rhs(Eigen::Index i) const { return rhs_[i]; }
  const std::string& constraint_label(Eigen::Index i) const { return row_labels_[i]; }

  Vector costs() const { return Eigen::Map<const Vector>(cost_.data(), num_variables()); }
  Vector lower_bounds() const { return Eigen::Map<const Vector>(lower_.data(), num_variables()); }
  Vector upper_bounds() const { return Eigen::Map<const Vector>(upper_.data(), num_variables()); }
  Vector rhs_vector() const { return Eigen::Map<const Vector>(rhs_.data(), num_constraints()); }

  SparseMatrix matrix() const {
    SparseMatrix a(num_constraints(), num_variables());
    a.setFromTriplets(triplets_.begin(), triplets_.end());
    return a;
  }

  // CPLEX LP text, readable by most external solvers.
  std::string to_lp_format() const {
    const SparseMatrix a = matrix();
    const Eigen::SparseMatrix<Scalar, Eigen::RowMajor> rows = a;
    auto term = [&](Scalar c, Eigen::Index j, bool first) {
      const char* sign = c < 0 ? "- " : (first ? "" : "+ ");
      if (std::abs(c) == Scalar(1)) return fmt::format("{}{}", sign, var_labels_[j]);
      return fmt::format("{}{} {}", sign, static_cast<double>(std::abs(c)), var_labels_[j]);
    };
    std::string out = "\\ generated by ncdn\nMinimize\n obj:";
    bool first = true;
    for (Eigen::Index j = 0; j < num_variables(); ++j) {
      if (cost_[j] == Scalar(0)) continue;
      out += " " + term(cost_[j], j, first);
      first = false;
    }
    if (first) out += " 0 " + (num_variables() ? var_labels_[0] : std::string("dummy"));
    out += "\nSubject To\n";
    for (Eigen::Index i = 0; i < num_constraints(); ++i) {
      out += fmt::format(" {}:", row_labels_[i]);
      first = true;
      for (typename decltype(rows)::InnerIterator it(rows, i); it; ++it) {
        out += " " + term(it.value(), it.col(), first);
        first = false;
      }
      if (first) out += " 0 " + var_labels_.at(0);
      const char* rel = relation_[i] == Relation::less_equal ? "<="
                        : relation_[i] == Relation::equal   ? "="
                                                            : ">=";
      out += fmt::format(" {} {}\n", rel, static_cast<double>(rhs_[i]));
    }
    out += "Bounds\n";
    for (Eigen::Index j = 0; j < num_variables(); ++j) {
      const bool lo_inf = lower_[j] == -infinity;
      const bool hi_inf = upper_[j] == infinity;
      if (lo_inf && hi_inf) {
        out += fmt::format(" {} free\n", var_labels_[j]);
      } else if (hi_inf) {
        if (lower_[j] != Scalar(0)) out += fmt::format(" {} >= {}\n", var_labels_[j], static_cast<double>(lower_[j]));
      } else {
        out += fmt::format(" {} <= {} <= {}\n", lo_inf ? std::string("-inf") : fmt::format("{}", static_cast<double>(lower_[j])),
                           var_labels_[j], static_cast<double>(upper_[j]));
      }
    }
    out += "End\n";
    return out;
  }

 private:
  std::vector<Scalar> lower_, upper_, cost_;
  std::vector<std::string> var_labels_;
  std::vector<Relation> relation_;
  std::vector<Scalar> rhs_;
  std::vector<std::string> row_labels_;
  std::vector<Eigen::Triplet<Scalar>> triplets_;
};

enum class Status { optimal, infeasible, unbounded, numeric_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numeric_failure: return "numeric_failure";
  }
  return "?";
}

template <typename Scalar = double>
struct LpSolution {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Status status = Status::numeric_failure;
  Scalar objective = 0;
  Vector x;
  // Row multipliers with c - A'y = reduced costs.
  Vector duals;
  Vector reduced_costs;
  Scalar dual_objective = 0;
  // Largest row violation with each row divided by its largest |coefficient|.
  Scalar max_row_violation = 0;
  long iterations = 0;
  std::string message;

  bool optimal() const { return status == Status::optimal; }
  Scalar duality_gap() const {
    using std::abs;
    using std::max;
    return abs(objective - dual_objective) / max(Scalar(1), max(abs(objective), abs(dual_objective)));
  }
};

}  // namespace ncdn::lp
