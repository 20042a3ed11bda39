#pragma once

#include <vector>

#include "ibap/system.hpp"

namespace ibap {

template <typename Scalar>
struct Solution {
  Vector<Scalar> x;
  std::vector<double> residuals;  // per part, ||P_k x - x_k|| in the metric
  double norm = 0.0;              // ||x|| in the metric
  double lambda = 0.0;            // regularization used (approximate route)
  int iterations = 0;
};

namespace detail {

// Stacked per-part coordinates of the targets.  Validates membership: a
// target that leaves its subspace makes the projection equations
// inconsistent before any numerics start.
template <typename Scalar>
Vector<Scalar> stack_targets(const SubspaceSystem<Scalar>& sys,
                             const std::vector<Vector<Scalar>>& targets) {
  if (static_cast<Index>(targets.size()) != sys.n())
    throw std::invalid_argument("expected one target per subspace");
  Vector<Scalar> b(sys.total_rank());
  const auto offs = sys.offsets();
  for (Index k = 0; k < sys.n(); ++k) {
    if (targets[k].size() != sys.ambient_dim())
      throw std::invalid_argument("target dimension mismatch");
    if (!sys.part(k).contains(targets[k]))
      throw std::invalid_argument(
          "target lies outside its subspace; project it first");
    b.segment(offs[k], sys.part(k).dim()) =
        sys.part(k).model_basis().adjoint() *
        sys.space().to_model(targets[k]);
  }
  return b;
}

template <typename Scalar>
void fill_residuals(const SubspaceSystem<Scalar>& sys,
                    const std::vector<Vector<Scalar>>& targets,
                    const Vector<Scalar>& x_model, Solution<Scalar>& sol) {
  sol.residuals.resize(targets.size());
  for (Index k = 0; k < sys.n(); ++k) {
    const auto& t = sys.part(k).model_basis();
    sol.residuals[k] =
        (t * (t.adjoint() * x_model) - sys.space().to_model(targets[k]))
            .norm();
  }
  sol.x = sys.space().from_model(x_model);
  sol.norm = x_model.norm();
}

}  // namespace detail

// Least-norm x with P_k x = x_k for every k, through the normal equations
// of the summation map.  Refuses when the Gram operator is numerically
// singular (equivalently: the parts are dependent, or the condition number
// exceeds 1/rel^2), since then no bounded solver can promise all targets.
template <typename Scalar>
Solution<Scalar> solve_exact(const SubspaceSystem<Scalar>& sys,
                             const std::vector<Vector<Scalar>>& targets,
                             Tolerance tol = {}) {
  const Vector<Scalar> b = detail::stack_targets(sys, targets);
  Solution<Scalar> sol;
  if (sys.total_rank() == 0) {
    detail::fill_residuals(sys, targets,
                           Vector<Scalar>(Vector<Scalar>::Zero(sys.ambient_dim())), sol);
    return sol;
  }

  const Matrix<Scalar> s = model_summation_map(sys);
  const RealVector sig = singular_values(s);
  const double c = sig(sig.size() - 1);
  const double cut = tol.rank_cut(sig(0));
  if (c <= cut) {
    const Index rank = count_above(sig, cut);
    throw RefusalError(
        "cannot honor every target: the subspaces are numerically "
        "dependent",
        {{"c", c},
         {"li_dim_gap", static_cast<double>(sys.total_rank() - rank)},
         {"cond", (sig(0) / c) * (sig(0) / c)}});
  }

  const GramOperator<Scalar> gram = build_gram(sys);
  const Vector<Scalar> y = Eigen::LLT<Matrix<Scalar>>(gram.matrix).solve(b);
  detail::fill_residuals(sys, targets, (s * y).eval(), sol);
  return sol;
}

// Regularized variant for badly conditioned (but still independent)
// systems: solves with Gram + lambda I, halving lambda from a norm-scaled
// start until every per-part residual drops to eps or the iteration cap is
// reached.  The reported residuals always state what was achieved.
template <typename Scalar>
Solution<Scalar> solve_approx(const SubspaceSystem<Scalar>& sys,
                              const std::vector<Vector<Scalar>>& targets,
                              double eps, Tolerance tol = {}) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  const Vector<Scalar> b = detail::stack_targets(sys, targets);
  Solution<Scalar> sol;
  if (sys.total_rank() == 0) {
    detail::fill_residuals(sys, targets,
                           Vector<Scalar>(Vector<Scalar>::Zero(sys.ambient_dim())), sol);
    return sol;
  }

  const Matrix<Scalar> s = model_summation_map(sys);
  const RealVector sig = singular_values(s);
  const Index rank = count_above(sig, tol.rank_cut(sig(0)));
  if (rank < sys.total_rank())
    throw RefusalError(
        "regularization cannot rescue dependent subspaces; drop the "
        "redundant directions first",
        {{"li_dim_gap", static_cast<double>(sys.total_rank() - rank)}});

  const GramOperator<Scalar> gram = build_gram(sys);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(gram.matrix);
  const RealVector ev = es.eigenvalues();
  const Matrix<Scalar> q = es.eigenvectors();
  const Vector<Scalar> bq = q.adjoint() * b;

  constexpr int kMaxIter = 60;
  double lambda = ev(ev.size() - 1) * 1e-4;
  for (int iter = 1; iter <= kMaxIter; ++iter, lambda /= 2) {
    const Vector<Scalar> y =
        q * (bq.array() / (ev.array() + lambda).template cast<Scalar>())
                .matrix();
    detail::fill_residuals(sys, targets, (s * y).eval(), sol);
    sol.lambda = lambda;
    sol.iterations = iter;
    double worst = 0.0;
    for (double r : sol.residuals) worst = std::max(worst, r);
    if (worst <= eps) break;
  }
  return sol;
}

// Constructive route through the complement decompositions: splits each
// target as x_k = y_k + z_k with y_k orthogonal to H_k and z_k orthogonal
// to every other part, then returns the sum of the z_k.  Entirely
// independent of the normal-equation route; the solution it picks is
// generally not the least-norm one.
template <typename Scalar>
Solution<Scalar> solve_via_cond10(const SubspaceSystem<Scalar>& sys,
                                  const std::vector<Vector<Scalar>>& targets,
                                  Tolerance tol = {}) {
  detail::stack_targets(sys, targets);  // membership validation only
  const Index d = sys.ambient_dim();
  Vector<Scalar> x_model = Vector<Scalar>::Zero(d);
  for (Index k = 0; k < sys.n(); ++k) {
    std::vector<Subspace<Scalar>> others;
    for (Index j = 0; j < sys.n(); ++j)
      if (j != k) others.push_back(sys.part(j));
    const Subspace<Scalar> cap = complement(
        others.empty() ? Subspace<Scalar>::zero(sys.space())
                       : sum<Scalar>(others, tol));
    const Subspace<Scalar> perp = complement(sys.part(k));

    Matrix<Scalar> cols(d, perp.dim() + cap.dim());
    cols.leftCols(perp.dim()) = perp.model_basis();
    cols.rightCols(cap.dim()) = cap.model_basis();
    const Vector<Scalar> target = sys.space().to_model(targets[k]);
    const Vector<Scalar> coeff =
        Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>>(cols).solve(
            target);
    if ((cols * coeff - target).norm() > 1e-9 * (1.0 + target.norm()))
      throw RefusalError(
          "complement decomposition failed: some target cannot be split "
          "against the other subspaces",
          {{"part", static_cast<double>(k + 1)}});
    x_model += cap.model_basis() * coeff.tail(cap.dim());
  }
  Solution<Scalar> sol;
  detail::fill_residuals(sys, targets, x_model, sol);
  return sol;
}

}  // namespace ibap
