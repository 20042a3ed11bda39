#pragma once

#include <limits>
#include <vector>

#include "ibap/analysis.hpp"

namespace ibap {

namespace detail {

// Ascending-degree coefficient convolution with the linear factor
// (X - root).
template <typename Scalar>
Vector<Scalar> poly_mul_linear(const Vector<Scalar>& p, Scalar root) {
  Vector<Scalar> out = Vector<Scalar>::Zero(p.size() + 1);
  out.tail(p.size()) = p;
  out.head(p.size()) -= root * p;
  return out;
}

template <typename Scalar>
Scalar poly_eval(const Vector<Scalar>& p, Scalar x) {
  Scalar acc = Scalar(0);
  for (Index t = p.size() - 1; t >= 0; --t) acc = acc * x + p(t);
  return acc;
}

template <typename Scalar>
Matrix<Scalar> poly_eval(const Vector<Scalar>& p, const Matrix<Scalar>& a) {
  Matrix<Scalar> acc =
      Matrix<Scalar>::Zero(a.rows(), a.cols());
  for (Index t = p.size() - 1; t >= 0; --t) {
    acc = (acc * a).eval();
    acc.diagonal().array() += p(t);
  }
  return acc;
}

template <typename Scalar>
void require_separated(const std::vector<Scalar>& lambda) {
  double scale = 0.0;
  for (const Scalar& l : lambda) scale = std::max(scale, std::abs(l));
  const double floor = 1e-3 * (1.0 + scale);
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lambda.size(); ++i)
    for (std::size_t j = i + 1; j < lambda.size(); ++j)
      gap = std::min(gap, std::abs(lambda[i] - lambda[j]));
  if (gap < floor)
    throw RefusalError(
        "eigenvalues too close for a reliable factorization; separate them "
        "or merge the clusters",
        {{"min_gap", gap}, {"required_gap", floor}});
}

}  // namespace detail

// Coefficients p_i with sum_i p_i(X) * prod_{j != i} (X - lambda_j)^{m_j}
// equal to the constant 1, deg p_i < m_i.  Exists and is unique for
// distinct lambda; the residual reports the identity's defect on an
// equispaced grid spanning the eigenvalue range.
template <typename Scalar>
struct BezoutResult {
  std::vector<Vector<Scalar>> p;  // ascending-degree coefficients
  double residual = 0.0;
};

template <typename Scalar>
BezoutResult<Scalar> bezout(const std::vector<Scalar>& lambda,
                            const std::vector<int>& m) {
  const std::size_t n = lambda.size();
  if (n == 0 || m.size() != n)
    throw std::invalid_argument("need one multiplicity per eigenvalue");
  Index total = 0;
  for (int mi : m) {
    if (mi < 1) throw std::invalid_argument("multiplicities must be >= 1");
    total += mi;
  }
  detail::require_separated(lambda);

  std::vector<Vector<Scalar>> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vector<Scalar> qi = Vector<Scalar>::Ones(1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i)
        for (int rep = 0; rep < m[j]; ++rep)
          qi = detail::poly_mul_linear(qi, lambda[j]);
    q[i] = std::move(qi);
  }

  // Coefficient matching: column for the X^t term of p_i holds the
  // coefficients of X^t * q_i; the identity pins every power of X at once.
  Matrix<Scalar> sys = Matrix<Scalar>::Zero(total, total);
  Index col = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (int t = 0; t < m[i]; ++t, ++col)
      sys.col(col).segment(t, q[i].size()) = q[i];
  Vector<Scalar> rhs = Vector<Scalar>::Zero(total);
  rhs(0) = Scalar(1);

  Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(sys);
  if (qr.rank() < total)
    throw RefusalError("coefficient system is singular",
                       {{"rank", static_cast<double>(qr.rank())},
                        {"size", static_cast<double>(total)}});
  const Vector<Scalar> coeff = qr.solve(rhs);

  BezoutResult<Scalar> out;
  col = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.p.push_back(coeff.segment(col, m[i]));
    col += m[i];
  }

  double scale = 0.0;
  for (const Scalar& l : lambda) scale = std::max(scale, std::abs(l));
  const double radius = 1.0 + scale;
  for (Index g = 0; g <= total; ++g) {
    const Scalar x(
        radius * (total == 0 ? 0.0 : -1.0 + 2.0 * double(g) / double(total)));
    Scalar val = Scalar(0);
    for (std::size_t i = 0; i < n; ++i)
      val += detail::poly_eval<Scalar>(out.p[i], x) *
             detail::poly_eval<Scalar>(q[i], x);
    out.residual = std::max(out.residual, std::abs(val - Scalar(1)));
  }
  return out;
}

// The operators T_i = p_i(A) * prod_{j != i} (A - lambda_j)^{m_j}.  Their
// sum is the identity by the polynomial identity alone, for any A; when
// the spectrum of A lies in the given eigenvalue list with multiplicities
// bounded by m, T_i acts as the identity on the i-th root subspace and as
// zero on the others.
template <typename Scalar>
std::vector<Matrix<Scalar>> root_ops(const Matrix<Scalar>& a,
                                     const std::vector<Scalar>& lambda,
                                     const std::vector<int>& m,
                                     const BezoutResult<Scalar>& bz) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("operator must be square");
  std::vector<Matrix<Scalar>> ops;
  ops.reserve(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    Matrix<Scalar> t = detail::poly_eval<Scalar>(bz.p[i], a);
    for (std::size_t j = 0; j < lambda.size(); ++j)
      if (j != i)
        for (int rep = 0; rep < m[j]; ++rep) {
          Matrix<Scalar> shifted = a;
          shifted.diagonal().array() -= lambda[j];
          t = (t * shifted).eval();
        }
    if (!t.allFinite())
      throw RefusalError(
          "root operator overflowed; rescale the operator spectrum");
    ops.push_back(std::move(t));
  }
  return ops;
}

template <typename Scalar>
struct SpectralReduction {
  SubspaceSystem<Scalar> system;  // root subspaces ker (A - lambda_i)^{m_i}
  std::vector<Matrix<Scalar>> ops;
  BezoutResult<Scalar> bezout;
  double partition_residual = 0.0;  // || sum T_i - I || in the metric
};

template <typename Scalar>
SpectralReduction<Scalar> root_subspace_system(
    const InnerProduct& space, const Matrix<Scalar>& a,
    const std::vector<Scalar>& lambda, const std::vector<int>& m,
    Tolerance tol = {}) {
  const Index d = space.dim();
  if (a.rows() != d || a.cols() != d)
    throw std::invalid_argument("operator shape must match the space");
  BezoutResult<Scalar> bz = bezout(lambda, m);
  std::vector<Matrix<Scalar>> ops = root_ops(a, lambda, m, bz);

  const auto& sw = space.sqrt_weights();
  const auto& isw = space.inv_sqrt_weights();
  const Matrix<Scalar> a_model = sw.template cast<Scalar>().asDiagonal() * a *
                                 isw.template cast<Scalar>().asDiagonal();

  std::vector<Subspace<Scalar>> parts;
  parts.reserve(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    Matrix<Scalar> shifted = a_model;
    shifted.diagonal().array() -= lambda[i];
    Matrix<Scalar> power = Matrix<Scalar>::Identity(d, d);
    for (int rep = 0; rep < m[i]; ++rep) power = (power * shifted).eval();
    Eigen::JacobiSVD<Matrix<Scalar>> svd(
        power, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RealVector sig = svd.singularValues();
    const Index rank = count_above(sig, tol.rank_cut(sig.size() ? sig(0) : 0));
    parts.push_back(Subspace<Scalar>::from_model(
        space, svd.matrixV().rightCols(d - rank)));
  }

  Matrix<Scalar> partition = Matrix<Scalar>::Zero(d, d);
  for (const auto& t : ops)
    partition += sw.template cast<Scalar>().asDiagonal() * t *
                 isw.template cast<Scalar>().asDiagonal();
  partition -= Matrix<Scalar>::Identity(d, d);

  return SpectralReduction<Scalar>{SubspaceSystem<Scalar>(std::move(parts)),
                                   std::move(ops), std::move(bz),
                                   partition.norm()};
}

// Eigenspace specialization: all multiplicities one.
template <typename Scalar>
SpectralReduction<Scalar> eigenspace_system(const InnerProduct& space,
                                            const Matrix<Scalar>& a,
                                            const std::vector<Scalar>& lambda,
                                            Tolerance tol = {}) {
  return root_subspace_system(space, a, lambda,
                              std::vector<int>(lambda.size(), 1), tol);
}

// Each T_i is the identity on its root subspace and kills the sum of the
// others, so the inclination of part i is at least 1 / ||T_i||.
template <typename Scalar>
std::vector<ExtendedReal> delta_lower_bounds(
    const InnerProduct& space, const std::vector<Matrix<Scalar>>& ops) {
  const auto& sw = space.sqrt_weights();
  const auto& isw = space.inv_sqrt_weights();
  std::vector<ExtendedReal> bounds;
  bounds.reserve(ops.size());
  for (const auto& t : ops) {
    const double nrm =
        spectral_norm(Matrix<Scalar>(sw.template cast<Scalar>().asDiagonal() *
                                     t *
                                     isw.template cast<Scalar>().asDiagonal()));
    bounds.push_back(nrm == 0.0 ? ExtendedReal::infinite()
                                : ExtendedReal::finite(1.0 / nrm));
  }
  return bounds;
}

// Builds a diagonalizable operator whose eigenspaces are exactly the given
// independent parts (plus the complement of their sum, carrying a fresh
// eigenvalue above the requested ones).  Inverse of the eigenspace
// reduction up to the analysis tolerances.
template <typename Scalar>
struct SynthesizedOperator {
  Matrix<Scalar> op;
  Scalar complement_eigenvalue;
};

template <typename Scalar>
SynthesizedOperator<Scalar> synthesize_operator(
    const SubspaceSystem<Scalar>& sys, const std::vector<Scalar>& lambda,
    Tolerance tol = {}) {
  if (static_cast<Index>(lambda.size()) != sys.n())
    throw std::invalid_argument("need one eigenvalue per subspace");
  double scale = 0.0;
  for (const Scalar& l : lambda) scale = std::max(scale, std::abs(l));
  std::vector<Scalar> all = lambda;
  all.push_back(Scalar(scale + 1.0));
  detail::require_separated(all);

  const auto sum_sub = sum<Scalar>(sys.parts(), tol);
  const auto assembly =
      detail::assemble_witnesses(sys, complement(sum_sub), tol);
  if (!assembly.witnesses)
    throw RefusalError(
        "cannot synthesize: dependent subspaces admit no such operator",
        {{"li_dim_gap",
          static_cast<double>(sys.total_rank() - sum_sub.dim())}});
  const auto& proj = assembly.witnesses->projections;

  SynthesizedOperator<Scalar> out;
  out.complement_eigenvalue = all.back();
  out.op = out.complement_eigenvalue * proj.complement_projection;
  for (Index k = 0; k < sys.n(); ++k)
    out.op += lambda[k] * proj.projections[k];
  return out;
}

}  // namespace ibap
