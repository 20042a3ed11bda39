#pragma once

#include <optional>
#include <vector>

#include "ibap/core.hpp"

namespace ibap {

// A subspace of a weighted inner-product space, held as a basis whose
// columns are orthonormal with respect to that inner product.  The model
// basis (W^{1/2} B) is kept alongside so Euclidean routines apply directly.
// Zero-dimensional subspaces are first-class: the basis simply has no
// columns.
template <typename Scalar>
class Subspace {
 public:
  Subspace(InnerProduct space, Matrix<Scalar> basis)
      : space_(std::move(space)), basis_(std::move(basis)) {
    if (basis_.rows() != space_.dim())
      throw std::invalid_argument("Subspace: basis rows must match ambient dimension");
    if (basis_.cols() > space_.dim())
      throw std::invalid_argument("Subspace: more basis columns than ambient dimension");
    model_ = space_.to_model(basis_);
    validate();
  }

  static Subspace from_model(const InnerProduct& space, Matrix<Scalar> model_basis) {
    Subspace s(space, space.from_model(model_basis), model_basis);
    s.validate();
    return s;
  }

  static Subspace zero(const InnerProduct& space) {
    return Subspace(space, Matrix<Scalar>(space.dim(), 0),
                    Matrix<Scalar>(space.dim(), 0));
  }

  static Subspace full(const InnerProduct& space) {
    return from_model(space, Matrix<Scalar>::Identity(space.dim(), space.dim()));
  }

  const InnerProduct& space() const { return space_; }
  // Ambient coordinates; columns orthonormal w.r.t. the weighted metric.
  const Matrix<Scalar>& basis() const { return basis_; }
  // W^{1/2} * basis; columns orthonormal in the Euclidean sense.
  const Matrix<Scalar>& model_basis() const { return model_; }

  Index dim() const { return basis_.cols(); }
  Index ambient_dim() const { return space_.dim(); }
  bool is_zero() const { return dim() == 0; }
  bool is_full() const { return dim() == ambient_dim(); }

  bool contains(const Vector<Scalar>& v, double tol = 1e-9) const {
    Vector<Scalar> mv = space_.to_model(v);
    Vector<Scalar> res = mv - model_ * (model_.adjoint() * mv);
    return res.norm() <= tol * std::max(1.0, mv.norm());
  }

 private:
  Subspace(InnerProduct space, Matrix<Scalar> basis, Matrix<Scalar> model)
      : space_(std::move(space)), basis_(std::move(basis)), model_(std::move(model)) {}

  void validate() const {
    if (dim() == 0) return;
    const double dev =
        (model_.adjoint() * model_ - Matrix<Scalar>::Identity(dim(), dim()))
            .cwiseAbs()
            .maxCoeff();
    if (dev > 1e-8)
      throw std::invalid_argument(
          "Subspace: basis is not orthonormal in the given metric; "
          "use orthonormalize on raw spanning sets");
  }

  InnerProduct space_;
  Matrix<Scalar> basis_;
  Matrix<Scalar> model_;
};

namespace detail {

// Orthonormalization outcome plus the singular values behind the rank
// decision, for callers that need to report borderline cuts.
template <typename Scalar>
struct OrthResult {
  Subspace<Scalar> subspace;
  RealVector sigma;
  double cut = 0.0;
};

template <typename Scalar>
OrthResult<Scalar> orthonormalize_details(const InnerProduct& space,
                                          const Matrix<Scalar>& vectors,
                                          const Tolerance& tol) {
  if (vectors.rows() != space.dim())
    throw std::invalid_argument("orthonormalize: vector rows must match ambient dimension");
  if (vectors.cols() == 0)
    return {Subspace<Scalar>::zero(space), RealVector(0), 0.0};
  const SvdResult<Scalar> svd = svd_thin<Scalar>(space.to_model(vectors));
  const double cut = tol.rank_cut(svd.sigma.size() ? svd.sigma(0) : 0.0);
  const Index r = count_above(svd.sigma, cut);
  return {Subspace<Scalar>::from_model(space, svd.u.leftCols(r)), svd.sigma, cut};
}

}  // namespace detail

// Span of the given (arbitrary) columns, with numerical rank decided by the
// rank policy in tol.
template <typename Scalar>
Subspace<Scalar> orthonormalize(const InnerProduct& space,
                                const Matrix<Scalar>& vectors,
                                Tolerance tol = {}) {
  return detail::orthonormalize_details(space, vectors, tol).subspace;
}

// Orthogonal projection onto S in ambient coordinates: P = B B^H W.
// Idempotent and self-adjoint w.r.t. the weighted inner product (so W P is
// Hermitian; P itself is Hermitian only under the identity metric).
template <typename Scalar>
Matrix<Scalar> projector(const Subspace<Scalar>& s) {
  const Matrix<Scalar>& t = s.model_basis();
  return s.space().from_model(Matrix<Scalar>(t * t.adjoint())) *
         s.space().sqrt_weights().template cast<Scalar>().asDiagonal();
}

// Euclidean projector of the model subspace; Hermitian.
template <typename Scalar>
Matrix<Scalar> model_projector(const Subspace<Scalar>& s) {
  const Matrix<Scalar>& t = s.model_basis();
  return t * t.adjoint();
}

template <typename Scalar>
Subspace<Scalar> complement(const Subspace<Scalar>& s) {
  const Index d = s.ambient_dim();
  const Index r = s.dim();
  if (r == 0) return Subspace<Scalar>::full(s.space());
  if (r == d) return Subspace<Scalar>::zero(s.space());
  // Householder QR of the model basis: trailing columns of Q complete the
  // orthonormal set exactly.
  Eigen::HouseholderQR<Matrix<Scalar>> qr(s.model_basis());
  Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(d, d);
  return Subspace<Scalar>::from_model(s.space(), q.rightCols(d - r));
}

template <typename Scalar>
Subspace<Scalar> sum(const std::vector<Subspace<Scalar>>& parts, Tolerance tol = {}) {
  if (parts.empty()) throw std::invalid_argument("sum: empty subspace list");
  const InnerProduct& space = parts.front().space();
  Index total = 0;
  for (const auto& p : parts) {
    require_same_space(space, p.space(), "sum");
    total += p.dim();
  }
  Matrix<Scalar> stacked(space.dim(), total);
  Index off = 0;
  for (const auto& p : parts) {
    stacked.middleCols(off, p.dim()) = p.model_basis();
    off += p.dim();
  }
  if (total == 0) return Subspace<Scalar>::zero(space);
  const SvdResult<Scalar> svd = svd_thin<Scalar>(stacked);
  const Index r = count_above(svd.sigma, tol.rank_cut(svd.sigma(0)));
  return Subspace<Scalar>::from_model(space, svd.u.leftCols(r));
}

template <typename Scalar>
Subspace<Scalar> sum(const Subspace<Scalar>& a, const Subspace<Scalar>& b,
                     Tolerance tol = {}) {
  return sum<Scalar>(std::vector<Subspace<Scalar>>{a, b}, tol);
}

// Intersection computed as the complement of the sum of complements; exact
// in finite dimension.
template <typename Scalar>
Subspace<Scalar> intersect(const std::vector<Subspace<Scalar>>& parts,
                           Tolerance tol = {}) {
  if (parts.empty()) throw std::invalid_argument("intersect: empty subspace list");
  std::vector<Subspace<Scalar>> comps;
  comps.reserve(parts.size());
  for (const auto& p : parts) comps.push_back(complement(p));
  return complement(sum<Scalar>(comps, tol));
}

template <typename Scalar>
Subspace<Scalar> intersect(const Subspace<Scalar>& a, const Subspace<Scalar>& b,
                           Tolerance tol = {}) {
  return intersect<Scalar>(std::vector<Subspace<Scalar>>{a, b}, tol);
}

// Opening theta(M, N) = operator norm of P_M - P_N in the weighted metric;
// a metric on subspaces with values in [0, 1].
template <typename Scalar>
double opening(const Subspace<Scalar>& m, const Subspace<Scalar>& n) {
  require_same_space(m.space(), n.space(), "opening");
  Matrix<Scalar> diff = model_projector(m) - model_projector(n);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(diff, Eigen::EigenvaluesOnly);
  const RealVector& ev = es.eigenvalues();
  double theta = 0.0;
  for (Index i = 0; i < ev.size(); ++i) theta = std::max(theta, std::abs(ev(i)));
  return std::min(theta, 1.0);
}

// Inclination delta(Y, Z) = inf { dist(y, Z) : y in Y, |y| = 1 }, taken to
// be +infinity when Y = {0}.  Equals the smallest singular value of
// (I - P_Z) restricted to an orthonormal basis of Y.
template <typename Scalar>
ExtendedReal inclination(const Subspace<Scalar>& y, const Subspace<Scalar>& z) {
  require_same_space(y.space(), z.space(), "inclination");
  if (y.is_zero()) return ExtendedReal::infinite();
  const Matrix<Scalar>& ty = y.model_basis();
  Matrix<Scalar> rest = ty - z.model_basis() * (z.model_basis().adjoint() * ty);
  const RealVector s = singular_values(rest);
  return ExtendedReal::finite(s(s.size() - 1));
}

}  // namespace ibap
