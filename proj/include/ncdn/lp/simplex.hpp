#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <fmt/core.h>

#include "ncdn/lp/linear_program.hpp"

namespace ncdn::lp {

struct SimplexOptions {
  // Working tolerances, applied to the internally scaled problem.
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  double phase_one_tol = 1e-7;
  // Acceptance of the returned optimum, in the caller's units.
  double row_tolerance = 1e-7;
  double duality_tolerance = 1e-6;
  int refactor_interval = 100;
  // 0 selects a size-dependent default.
  long max_iterations = 0;
  // Consecutive degenerate pivots tolerated before switching to Bland's rule.
  long degenerate_limit = 0;
  bool scale = true;
};

// Bounded-variable primal revised simplex. Two phases with artificial
// columns, Dantzig pricing with a Harris two-pass ratio test, and Bland's rule
// while a run of degenerate pivots persists. The basis is held as a sparse LU
// factorization plus a product-form eta file that is rebuilt periodically.
template <typename Scalar = double>
class RevisedSimplex {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;

  RevisedSimplex(const LinearProgram<Scalar>& lp, SimplexOptions options)
      : lp_(&lp), opt_(options) {}

  LpSolution<Scalar> solve() {
    setup();
    LpSolution<Scalar> out;
    Status status = Status::optimal;
    if (first_artificial_ < ntot_) {
      Vector c1 = Vector::Zero(ntot_);
      c1.tail(ntot_ - first_artificial_).setOnes();
      status = run(c1);
      if (status == Status::optimal) {
        const Scalar infeasibility = x_.tail(ntot_ - first_artificial_).sum();
        if (infeasibility > opt_.phase_one_tol) status = Status::infeasible;
      } else if (status == Status::unbounded) {
        status = Status::numeric_failure;
        message_ = "phase one diverged";
      }
      for (Eigen::Index j = first_artificial_; j < ntot_; ++j) {
        hi_(j) = 0;
        if (state_[j] != basic) {
          x_(j) = 0;
          state_[j] = at_lower;
        }
      }
    }
    if (status == Status::optimal) status = run(cost_);
    out.status = status;
    out.iterations = iterations_;
    out.message = message_;
    if (status == Status::optimal) extract(out);
    solved_ = status == Status::optimal;
    return out;
  }

  // Warm start after an optimal solve(): `changed` has the same rows and
  // columns with new costs and bounds. The current basis is kept when it stays
  // feasible under the new bounds; otherwise this is a cold solve of
  // `changed`, which must outlive this object.
  LpSolution<Scalar> reoptimize(const LinearProgram<Scalar>& changed) {
    LpSolution<Scalar> out;
    if (!solved_ || changed.num_variables() != n_ || changed.num_constraints() != m_) {
      out.message = "reoptimize needs an optimal solve of the same shape";
      return out;
    }
    lp_ = &changed;
    for (Eigen::Index j = 0; j < n_; ++j) {
      lo_(j) = changed.lower(j) / col_scale_(j);
      hi_(j) = changed.upper(j) / col_scale_(j);
      cost_(j) = changed.cost(j) * col_scale_(j);
      if (state_[j] == at_lower) x_(j) = lo_(j);
      if (state_[j] == at_upper) x_(j) = hi_(j);
    }
    if (!refactor()) return out;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index j = head_[i];
      if (x_(j) < lo_(j) - opt_.feasibility_tol || x_(j) > hi_(j) + opt_.feasibility_tol) {
        // The old basis is infeasible under the new bounds: start over.
        return RevisedSimplex(changed, opt_).solve();
      }
    }
    const long before = iterations_;
    const Status status = run(cost_);
    out.status = status;
    out.iterations = iterations_ - before;
    out.message = message_;
    if (status == Status::optimal) extract(out);
    solved_ = status == Status::optimal;
    return out;
  }

 private:
  enum State : signed char { basic, at_lower, at_upper, at_zero };

  struct Eta {
    Eigen::Index pos;
    Scalar pivot;
    std::vector<Eigen::Index> idx;
    std::vector<Scalar> val;
  };

  static constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();

  void setup() {
    const SparseMatrix a0 = lp_->matrix();
    m_ = lp_->num_constraints();
    n_ = lp_->num_variables();
    row_scale_ = Vector::Ones(m_);
    col_scale_ = Vector::Ones(n_);
    if (opt_.scale) compute_scaling(a0);

    b_ = row_scale_.cwiseProduct(lp_->rhs_vector());
    Vector lo(n_), hi(n_), c(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      lo(j) = lp_->lower(j) / col_scale_(j);
      hi(j) = lp_->upper(j) / col_scale_(j);
      c(j) = lp_->cost(j) * col_scale_(j);
    }
    SparseMatrix as = row_scale_.asDiagonal() * a0 * col_scale_.asDiagonal();

    // Structural columns start at a finite bound (or zero when free).
    Vector xs(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      xs(j) = std::isfinite(lo(j)) ? lo(j) : (std::isfinite(hi(j)) ? hi(j) : Scalar(0));
    }
    const Vector residual = b_ - as * xs;

    std::vector<Eigen::Triplet<Scalar>> trip;
    trip.reserve(as.nonZeros() + 2 * m_);
    for (Eigen::Index j = 0; j < as.outerSize(); ++j) {
      for (typename SparseMatrix::InnerIterator it(as, j); it; ++it) {
        trip.emplace_back(it.row(), j, it.value());
      }
    }
    std::vector<Scalar> lo_v(lo.data(), lo.data() + n_), hi_v(hi.data(), hi.data() + n_);
    std::vector<Scalar> c_v(c.data(), c.data() + n_), x_v(xs.data(), xs.data() + n_);
    std::vector<State> st(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      st[j] = std::isfinite(lo(j)) ? at_lower : (std::isfinite(hi(j)) ? at_upper : at_zero);
    }
    head_.assign(m_, -1);

    auto add_column = [&](Eigen::Index row, Scalar coef, Scalar value, bool make_basic) {
      const auto j = static_cast<Eigen::Index>(lo_v.size());
      trip.emplace_back(row, j, coef);
      lo_v.push_back(0);
      hi_v.push_back(inf);
      c_v.push_back(0);
      x_v.push_back(value);
      st.push_back(make_basic ? basic : at_lower);
      if (make_basic) head_[row] = j;
    };

    // Slacks: a'x + s = b for <=, a'x - s = b for >=, s >= 0.
    std::vector<Eigen::Index> needs_artificial;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Relation rel = lp_->relation(i);
      if (rel == Relation::equal) {
        needs_artificial.push_back(i);
        continue;
      }
      const Scalar sign = rel == Relation::less_equal ? 1 : -1;
      const Scalar value = sign * residual(i);
      const bool ok = value >= -opt_.feasibility_tol;
      add_column(i, sign, ok ? value : Scalar(0), ok);
      if (!ok) needs_artificial.push_back(i);
    }
    first_artificial_ = static_cast<Eigen::Index>(lo_v.size());
    for (Eigen::Index i : needs_artificial) {
      const Scalar sign = residual(i) >= 0 ? 1 : -1;
      add_column(i, sign, std::abs(residual(i)), true);
    }

    ntot_ = static_cast<Eigen::Index>(lo_v.size());
    a_.resize(m_, ntot_);
    a_.setFromTriplets(trip.begin(), trip.end());
    a_.makeCompressed();
    lo_ = Eigen::Map<Vector>(lo_v.data(), ntot_);
    hi_ = Eigen::Map<Vector>(hi_v.data(), ntot_);
    cost_ = Eigen::Map<Vector>(c_v.data(), ntot_);
    x_ = Eigen::Map<Vector>(x_v.data(), ntot_);
    state_ = std::move(st);

    max_iterations_ = opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (m_ + ntot_) + 10000;
    degenerate_limit_ = opt_.degenerate_limit > 0 ? opt_.degenerate_limit
                                                  : std::max<long>(100, static_cast<long>(m_));
    y_.resize(m_);
    alpha_.resize(m_);
  }

  // Geometric-mean scaling passes followed by row equilibration. Factors are
  // powers of two so scaling itself introduces no rounding.
  void compute_scaling(const SparseMatrix& a) {
    auto pow2 = [](Scalar v) { return std::exp2(std::round(std::log2(v))); };
    for (int pass = 0; pass < 4; ++pass) {
      Vector rmax = Vector::Zero(m_), rmin = Vector::Constant(m_, inf);
      for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
        for (typename SparseMatrix::InnerIterator it(a, j); it; ++it) {
          const Scalar v = std::abs(it.value()) * row_scale_(it.row()) * col_scale_(j);
          rmax(it.row()) = std::max(rmax(it.row()), v);
          rmin(it.row()) = std::min(rmin(it.row()), v);
        }
      }
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (rmax(i) > 0) row_scale_(i) /= std::sqrt(rmax(i) * rmin(i));
      }
      for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
        Scalar cmax = 0, cmin = inf;
        for (typename SparseMatrix::InnerIterator it(a, j); it; ++it) {
          const Scalar v = std::abs(it.value()) * row_scale_(it.row()) * col_scale_(j);
          cmax = std::max(cmax, v);
          cmin = std::min(cmin, v);
        }
        if (cmax > 0) col_scale_(j) /= std::sqrt(cmax * cmin);
      }
    }
    Vector rmax = Vector::Zero(m_);
    for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
      for (typename SparseMatrix::InnerIterator it(a, j); it; ++it) {
        rmax(it.row()) =
            std::max(rmax(it.row()), std::abs(it.value()) * row_scale_(it.row()) * col_scale_(j));
      }
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (rmax(i) > 0) row_scale_(i) /= rmax(i);
      row_scale_(i) = pow2(row_scale_(i));
    }
    for (Eigen::Index j = 0; j < n_; ++j) col_scale_(j) = pow2(col_scale_(j));
  }

  bool refactor() {
    etas_.clear();
    if (m_ == 0) return true;
    std::vector<Eigen::Triplet<Scalar>> trip;
    for (Eigen::Index i = 0; i < m_; ++i) {
      for (typename SparseMatrix::InnerIterator it(a_, head_[i]); it; ++it) {
        trip.emplace_back(it.row(), i, it.value());
      }
    }
    SparseMatrix basis(m_, m_);
    basis.setFromTriplets(trip.begin(), trip.end());
    basis.makeCompressed();
    lu_.analyzePattern(basis);
    lu_.factorize(basis);
    if (lu_.info() != Eigen::Success) {
      message_ = "singular basis";
      return false;
    }
    ++factorizations_;
    recompute_basics();
    return true;
  }

  void recompute_basics() {
    Vector rhs = b_;
    for (Eigen::Index j = 0; j < ntot_; ++j) {
      if (state_[j] == basic || x_(j) == 0) continue;
      for (typename SparseMatrix::InnerIterator it(a_, j); it; ++it) {
        rhs(it.row()) -= it.value() * x_(j);
      }
    }
    ftran(rhs);
    for (Eigen::Index i = 0; i < m_; ++i) x_(head_[i]) = rhs(i);
  }

  void ftran(Vector& v) const {
    if (m_ == 0) return;
    v = lu_.solve(v);
    for (const Eta& e : etas_) {
      const Scalar vp = v(e.pos) / e.pivot;
      v(e.pos) = vp;
      if (vp == 0) continue;
      for (std::size_t k = 0; k < e.idx.size(); ++k) v(e.idx[k]) -= e.val[k] * vp;
    }
  }

  void btran(Vector& v) const {
    if (m_ == 0) return;
    for (auto e = etas_.rbegin(); e != etas_.rend(); ++e) {
      Scalar s = v(e->pos);
      for (std::size_t k = 0; k < e->idx.size(); ++k) s -= e->val[k] * v(e->idx[k]);
      v(e->pos) = s / e->pivot;
    }
    v = lu_.transpose().solve(v);
  }

  Scalar column_dot(Eigen::Index j, const Vector& v) const {
    Scalar s = 0;
    for (typename SparseMatrix::InnerIterator it(a_, j); it; ++it) s += it.value() * v(it.row());
    return s;
  }

  // Entering column and its reduced cost, or -1 when the basis is optimal.
  std::pair<Eigen::Index, Scalar> price(const Vector& c, bool bland) const {
    Eigen::Index best = -1;
    Scalar best_score = 0, best_d = 0;
    for (Eigen::Index j = 0; j < ntot_; ++j) {
      const State s = state_[j];
      if (s == basic || lo_(j) == hi_(j)) continue;
      const Scalar d = c(j) - column_dot(j, y_);
      bool eligible = false;
      if (s == at_lower) eligible = d < -opt_.optimality_tol;
      else if (s == at_upper) eligible = d > opt_.optimality_tol;
      else eligible = std::abs(d) > opt_.optimality_tol;
      if (!eligible) continue;
      if (bland) return {j, d};
      if (std::abs(d) > best_score) {
        best_score = std::abs(d);
        best = j;
        best_d = d;
      }
    }
    return {best, best_d};
  }

  struct Step {
    Eigen::Index pos = -1;
    Scalar theta = 0;
    bool flip = false;
    bool unbounded = false;
  };

  // Bound distance the basic variable in position i allows along `delta`
  // (positive delta: the variable decreases).
  Scalar limit(Eigen::Index i, Scalar delta, Scalar slack) const {
    const Eigen::Index j = head_[i];
    if (delta > 0) return std::isfinite(lo_(j)) ? (x_(j) - lo_(j) + slack) / delta : inf;
    return std::isfinite(hi_(j)) ? (hi_(j) - x_(j) + slack) / -delta : inf;
  }

  Step ratio_test(Eigen::Index q, Scalar dir, bool bland) const {
    Step step;
    const Scalar range = (std::isfinite(lo_(q)) && std::isfinite(hi_(q))) ? hi_(q) - lo_(q) : inf;
    if (bland) {
      Scalar best = inf;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const Scalar delta = dir * alpha_(i);
        if (std::abs(delta) > opt_.pivot_tol) best = std::min(best, std::max(Scalar(0), limit(i, delta, 0)));
      }
      // Among tied rows the smallest column index leaves.
      for (Eigen::Index i = 0; i < m_ && std::isfinite(best); ++i) {
        const Scalar delta = dir * alpha_(i);
        if (std::abs(delta) <= opt_.pivot_tol) continue;
        if (std::max(Scalar(0), limit(i, delta, 0)) <= best + 1e-12 &&
            (step.pos < 0 || head_[i] < head_[step.pos])) {
          step.pos = i;
        }
      }
      if (std::isfinite(range) && range <= best) return Step{-1, range, true, false};
      if (step.pos < 0) return Step{-1, 0, false, true};
      step.theta = best;
      return step;
    }
    Scalar theta_max = inf;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Scalar delta = dir * alpha_(i);
      if (std::abs(delta) <= opt_.pivot_tol) continue;
      theta_max = std::min(theta_max, limit(i, delta, opt_.feasibility_tol));
    }
    if (std::isfinite(range) && range <= theta_max) return Step{-1, range, true, false};
    if (!std::isfinite(theta_max)) return Step{-1, 0, false, true};
    Scalar best_abs = 0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Scalar delta = dir * alpha_(i);
      if (std::abs(delta) <= opt_.pivot_tol) continue;
      if (limit(i, delta, 0) <= theta_max && std::abs(delta) > best_abs) {
        best_abs = std::abs(delta);
        step.pos = i;
      }
    }
    step.theta = std::max(Scalar(0), limit(step.pos, dir * alpha_(step.pos), 0));
    return step;
  }

  Status run(const Vector& c) {
    if (!refactor()) return Status::numeric_failure;
    long degenerate = 0;
    bool bland = false;
    bool retried = false;
    for (;;) {
      if (iterations_ >= max_iterations_) {
        message_ = "iteration limit reached";
        return Status::numeric_failure;
      }
      if (static_cast<int>(etas_.size()) >= opt_.refactor_interval && !refactor()) {
        return Status::numeric_failure;
      }
      for (Eigen::Index i = 0; i < m_; ++i) y_(i) = c(head_[i]);
      btran(y_);
      const auto [q, dq] = price(c, bland);
      if (q < 0) {
        // Confirm optimality on a fresh factorization.
        if (!etas_.empty()) {
          if (!refactor()) return Status::numeric_failure;
          continue;
        }
        return Status::optimal;
      }

      alpha_.setZero();
      for (typename SparseMatrix::InnerIterator it(a_, q); it; ++it) alpha_(it.row()) = it.value();
      ftran(alpha_);
      const Scalar dir = dq < 0 ? Scalar(1) : Scalar(-1);
      const Step step = ratio_test(q, dir, bland);
      if (step.unbounded) return Status::unbounded;

      if (!step.flip && std::abs(alpha_(step.pos)) < 1e-11) {
        if (retried || etas_.empty()) {
          message_ = "vanishing pivot";
          return Status::numeric_failure;
        }
        retried = true;
        if (!refactor()) return Status::numeric_failure;
        continue;
      }
      retried = false;

      for (Eigen::Index i = 0; i < m_; ++i) x_(head_[i]) -= dir * step.theta * alpha_(i);
      ++iterations_;
      if (step.flip) {
        x_(q) = dir > 0 ? hi_(q) : lo_(q);
        state_[q] = dir > 0 ? at_upper : at_lower;
        degenerate = 0;
        bland = false;
        continue;
      }
      x_(q) += dir * step.theta;

      const Eigen::Index p = step.pos;
      const Eigen::Index leaving = head_[p];
      if (dir * alpha_(p) > 0) {
        x_(leaving) = lo_(leaving);
        state_[leaving] = at_lower;
      } else {
        x_(leaving) = hi_(leaving);
        state_[leaving] = at_upper;
      }
      head_[p] = q;
      state_[q] = basic;

      Eta eta{p, alpha_(p), {}, {}};
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (i != p && std::abs(alpha_(i)) > 1e-14) {
          eta.idx.push_back(i);
          eta.val.push_back(alpha_(i));
        }
      }
      etas_.push_back(std::move(eta));

      if (step.theta <= 1e-12) {
        if (++degenerate > degenerate_limit_) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
    }
  }

  void extract(LpSolution<Scalar>& out) const {
    const SparseMatrix a = lp_->matrix();
    Vector x(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      x(j) = std::clamp(x_(j) * col_scale_(j), lp_->lower(j), lp_->upper(j));
    }
    Vector y(m_);
    for (Eigen::Index i = 0; i < m_; ++i) y(i) = y_(i) * row_scale_(i);
    const Vector c = lp_->costs();
    const Vector d = c - a.transpose() * y;

    out.x = x;
    out.duals = y;
    out.reduced_costs = d;
    out.objective = c.dot(x);

    Scalar dual = y.dot(lp_->rhs_vector());
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (d(j) > 0 && std::isfinite(lp_->lower(j))) dual += d(j) * lp_->lower(j);
      if (d(j) < 0 && std::isfinite(lp_->upper(j))) dual += d(j) * lp_->upper(j);
    }
    out.dual_objective = dual;

    const Vector ax = a * x;
    Vector row_max = Vector::Zero(m_);
    for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
      for (typename SparseMatrix::InnerIterator it(a, j); it; ++it) {
        row_max(it.row()) = std::max(row_max(it.row()), std::abs(it.value()));
      }
    }
    Scalar worst = 0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Scalar r = ax(i) - lp_->rhs(i);
      Scalar v = 0;
      switch (lp_->relation(i)) {
        case Relation::less_equal: v = std::max(Scalar(0), r); break;
        case Relation::greater_equal: v = std::max(Scalar(0), -r); break;
        case Relation::equal: v = std::abs(r); break;
      }
      worst = std::max(worst, v / std::max(Scalar(1e-300), row_max(i)));
    }
    out.max_row_violation = worst;
    if (worst > opt_.row_tolerance) {
      out.status = Status::numeric_failure;
      out.message = fmt::format("row violation {} exceeds tolerance", static_cast<double>(worst));
    } else if (out.duality_gap() > opt_.duality_tolerance) {
      out.status = Status::numeric_failure;
      out.message = fmt::format("duality gap {} exceeds tolerance", static_cast<double>(out.duality_gap()));
    }
  }

  const LinearProgram<Scalar>* lp_;
  bool solved_ = false;
  SimplexOptions opt_;
  Eigen::Index m_ = 0, n_ = 0, ntot_ = 0, first_artificial_ = 0;
  Vector row_scale_, col_scale_;
  SparseMatrix a_;
  Vector b_, lo_, hi_, cost_, x_;
  Vector y_, alpha_;
  std::vector<Eigen::Index> head_;
  std::vector<State> state_;
  mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
  long iterations_ = 0;
  long factorizations_ = 0;
  long max_iterations_ = 0;
  long degenerate_limit_ = 0;
  std::string message_;
};

template <typename Scalar>
LpSolution<Scalar> solve_lp(const LinearProgram<Scalar>& lp, const SimplexOptions& options = {}) {
  return RevisedSimplex<Scalar>(lp, options).solve();
}

}  // namespace ncdn::lp
