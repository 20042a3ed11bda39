#pragma once

#include <numeric>
#include <vector>

#include "ibap/subspace.hpp"

namespace ibap {

// An ordered system of n >= 1 subspaces sharing one inner product.
template <typename Scalar>
class SubspaceSystem {
 public:
  explicit SubspaceSystem(std::vector<Subspace<Scalar>> parts)
      : parts_(std::move(parts)) {
    if (parts_.empty())
      throw std::invalid_argument("SubspaceSystem: need at least one subspace");
    for (const auto& p : parts_)
      require_same_space(space(), p.space(), "SubspaceSystem");
  }

  const InnerProduct& space() const { return parts_.front().space(); }
  Index n() const { return static_cast<Index>(parts_.size()); }
  Index ambient_dim() const { return space().dim(); }
  const std::vector<Subspace<Scalar>>& parts() const { return parts_; }
  const Subspace<Scalar>& part(Index k) const { return parts_.at(k); }

  std::vector<Index> ranks() const {
    std::vector<Index> r(parts_.size());
    for (size_t i = 0; i < parts_.size(); ++i) r[i] = parts_[i].dim();
    return r;
  }

  // offsets()[k] is where block k starts in stacked coordinates;
  // offsets()[n] == total_rank().
  std::vector<Index> offsets() const {
    std::vector<Index> off(parts_.size() + 1, 0);
    for (size_t i = 0; i < parts_.size(); ++i)
      off[i + 1] = off[i] + parts_[i].dim();
    return off;
  }

  Index total_rank() const {
    Index r = 0;
    for (const auto& p : parts_) r += p.dim();
    return r;
  }

 private:
  std::vector<Subspace<Scalar>> parts_;
};

// [B_1 | ... | B_n] in ambient coordinates: applied to stacked coordinates
// it returns x_1 + ... + x_n.
template <typename Scalar>
Matrix<Scalar> build_summation_map(const SubspaceSystem<Scalar>& sys) {
  Matrix<Scalar> s(sys.ambient_dim(), sys.total_rank());
  Index off = 0;
  for (const auto& p : sys.parts()) {
    s.middleCols(off, p.dim()) = p.basis();
    off += p.dim();
  }
  return s;
}

// Same map conjugated into the Euclidean model (W^{1/2} [B_1 | ... | B_n]);
// its singular values carry all rank and conditioning information.
template <typename Scalar>
Matrix<Scalar> model_summation_map(const SubspaceSystem<Scalar>& sys) {
  Matrix<Scalar> s(sys.ambient_dim(), sys.total_rank());
  Index off = 0;
  for (const auto& p : sys.parts()) {
    s.middleCols(off, p.dim()) = p.model_basis();
    off += p.dim();
  }
  return s;
}

// Gram operator of the system: block (i, j) is B_i^H W B_j, the matrix of
// the i-th orthogonal projection restricted to H_j in the chosen bases.
// Hermitian positive semidefinite with identity diagonal blocks.
template <typename Scalar>
struct GramOperator {
  Matrix<Scalar> matrix;
  std::vector<Index> offsets;  // size n + 1

  auto block(Index i, Index j) const {
    return matrix.block(offsets[i], offsets[j], offsets[i + 1] - offsets[i],
                        offsets[j + 1] - offsets[j]);
  }
};

template <typename Scalar>
GramOperator<Scalar> build_gram(const SubspaceSystem<Scalar>& sys) {
  const Matrix<Scalar> s = model_summation_map(sys);
  Matrix<Scalar> g = s.adjoint() * s;
  g = ((g + g.adjoint()) / Scalar(2)).eval();  // enforce exact Hermitian symmetry
  return {std::move(g), sys.offsets()};
}

namespace detail {

#if defined(__SIZEOF_FLOAT128__)
using Quad = __float128;
#else
using Quad = long double;
#endif

inline Quad quad_sqrt(Quad a) {
  if (!(a > Quad(0))) return Quad(0);
  // double seed, two Newton steps reach the full mantissa; arguments here
  // are always >= 1 (rotation hypotenuses), so the seed never underflows
  Quad x = Quad(std::sqrt(static_cast<double>(a)));
  x = (x + a / x) / Quad(2);
  x = (x + a / x) / Quad(2);
  return x;
}

// Real embedding of a complex matrix; squares to the embedding of the
// Hermitian Gram matrix, keeping every eigenvalue (at doubled
// multiplicity).
inline const RealMatrix& real_embedding(const RealMatrix& m) { return m; }

inline RealMatrix real_embedding(const Matrix<std::complex<double>>& m) {
  RealMatrix e(2 * m.rows(), 2 * m.cols());
  e.topLeftCorner(m.rows(), m.cols()) = m.real();
  e.topRightCorner(m.rows(), m.cols()) = -m.imag();
  e.bottomLeftCorner(m.rows(), m.cols()) = m.imag();
  e.bottomRightCorner(m.rows(), m.cols()) = m.real();
  return e;
}

// Least eigenvalue of E^T E by cyclic Jacobi in extended precision.
// Products of doubles are exact in quad, so the accumulated Gram matrix
// and its spectrum stay meaningful far below the 1e-16 * |G| floor that
// double-precision squaring imposes.
inline double quad_gram_min_eigenvalue(const RealMatrix& e) {
  const Index n = e.cols();
  if (n == 0) return 0.0;
  std::vector<Quad> a(static_cast<std::size_t>(n * n), Quad(0));
  const auto at = [&](Index r, Index c) -> Quad& {
    return a[static_cast<std::size_t>(r * n + c)];
  };
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      Quad acc(0);
      for (Index k = 0; k < e.rows(); ++k)
        acc += Quad(e(k, i)) * Quad(e(k, j));
      at(i, j) = acc;
      at(j, i) = acc;
    }

  constexpr int kMaxSweeps = 48;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    Quad off(0), fro(0);
    for (Index i = 0; i < n; ++i) {
      fro += at(i, i) * at(i, i);
      for (Index j = i + 1; j < n; ++j) off += Quad(2) * at(i, j) * at(i, j);
    }
    fro += off;
    if (!(off > fro * Quad(1e-68))) break;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) {
        const Quad apq = at(p, q);
        if (apq == Quad(0)) continue;
        const Quad tau = (at(q, q) - at(p, p)) / (Quad(2) * apq);
        const Quad abs_tau = tau >= Quad(0) ? tau : -tau;
        Quad t = Quad(1) / (abs_tau + quad_sqrt(Quad(1) + tau * tau));
        if (tau < Quad(0)) t = -t;
        const Quad c = Quad(1) / quad_sqrt(Quad(1) + t * t);
        const Quad s = t * c;
        for (Index k = 0; k < n; ++k) {
          const Quad akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const Quad apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
  }
  Quad mn = at(0, 0);
  for (Index i = 1; i < n; ++i)
    if (at(i, i) < mn) mn = at(i, i);
  const double out = static_cast<double>(mn);
  return out < 0.0 ? 0.0 : out;  // the Gram matrix is PSD by construction
}

}  // namespace detail

// Least eigenvalue of the Gram operator.  Clearly invertible Grams take
// the plain double eigensolve; anything near the floor is re-accumulated
// and solved in extended precision, which resolves the full decision range
// down to the squared rank threshold.  (A double solve alone bottoms out
// near 1e-16 * |G| -- squaring the data loses half the digits -- and would
// call every exactly-dependent system invertible.)
template <typename Scalar>
ExtendedReal gram_lambda_min(const SubspaceSystem<Scalar>& sys) {
  if (sys.total_rank() == 0) return ExtendedReal::infinite();
  const GramOperator<Scalar> gram = build_gram(sys);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(gram.matrix,
                                                   Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  const double lmax = es.eigenvalues()(es.eigenvalues().size() - 1);
  if (lmin >= 1e-8 * std::max(lmax, 1.0)) return ExtendedReal::finite(lmin);

  const RealMatrix e = detail::real_embedding(model_summation_map(sys));
  if (e.cols() <= detail::kJacobiCutoff)
    return ExtendedReal::finite(detail::quad_gram_min_eigenvalue(e));
  // beyond desk scale: the squared smallest singular value, which the SVD
  // resolves without squaring loss
  if (e.cols() > e.rows()) return ExtendedReal::finite(0.0);
  const RealVector sig = singular_values(e);
  const double smin = sig(sig.size() - 1);
  return ExtendedReal::finite(smin * smin);
}

// c = inf |x_1+...+x_n| / sqrt(|x_1|^2+...+|x_n|^2), the smallest singular
// value of the model summation map.  All subspaces trivial (R = 0) gives the
// defined-as-infinite marker: the infimum ranges over an empty set.
template <typename Scalar>
ExtendedReal ibap_constant(const SubspaceSystem<Scalar>& sys) {
  if (sys.total_rank() == 0) return ExtendedReal::infinite();
  // more stacked coordinates than ambient dimensions means structural null
  // directions the thin decomposition never reports
  if (sys.total_rank() > sys.ambient_dim()) return ExtendedReal::finite(0.0);
  const RealVector s = singular_values(model_summation_map(sys));
  return ExtendedReal::finite(s(s.size() - 1));
}

}  // namespace ibap
