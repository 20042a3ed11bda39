#pragma once

#include <limits>
#include <vector>

#include "ibap/system.hpp"

namespace ibap {

// Frame-style two-sided bounds: lower * ||a|| <= ||F a|| <= upper * ||a||
// for every coefficient vector a.  Extreme singular values of the family
// in the metric; lower = 0 signals a dependent family.
struct RieszBounds {
  double lower = 0.0;
  double upper = 0.0;
};

template <typename Scalar>
RieszBounds riesz_bounds(const InnerProduct& space,
                         const Matrix<Scalar>& family) {
  if (family.rows() != space.dim())
    throw std::invalid_argument("family vectors must live in the space");
  if (family.cols() == 0) throw std::invalid_argument("empty family");
  const RealVector sig = singular_values(space.to_model(family));
  // more vectors than dimensions: the coefficient map has a kernel, so the
  // lower bound is zero no matter what the thin spectrum says
  const double lower =
      family.cols() > space.dim() ? 0.0 : sig(sig.size() - 1);
  return {lower, sig(0)};
}

// Concatenating per-subspace families: when the spans form an independent
// system with constant c, the union is again a Riesz family, with
//   lower >= c * min_i lower_i   and   upper <= sqrt(sum_i upper_i^2).
// Returns both the predicted bounds and the directly computed ones.
template <typename Scalar>
struct CombineResult {
  Matrix<Scalar> family;  // concatenated columns
  std::vector<RieszBounds> each;
  RieszBounds predicted;
  RieszBounds actual;
  double c = 0.0;  // constant of the span system
};

template <typename Scalar>
CombineResult<Scalar> combine_families(
    const InnerProduct& space, const std::vector<Matrix<Scalar>>& families,
    Tolerance tol = {}) {
  if (families.empty()) throw std::invalid_argument("no families given");
  CombineResult<Scalar> out;
  Index cols = 0;
  std::vector<Subspace<Scalar>> parts;
  parts.reserve(families.size());
  double min_lower = std::numeric_limits<double>::infinity();
  double upper_sq = 0.0;
  for (const auto& f : families) {
    out.each.push_back(riesz_bounds(space, f));
    min_lower = std::min(min_lower, out.each.back().lower);
    upper_sq += out.each.back().upper * out.each.back().upper;
    parts.push_back(orthonormalize(space, f, tol));
    cols += f.cols();
  }
  out.family.resize(space.dim(), cols);
  Index at = 0;
  for (const auto& f : families) {
    out.family.middleCols(at, f.cols()) = f;
    at += f.cols();
  }

  const ExtendedReal c = ibap_constant(SubspaceSystem<Scalar>(parts));
  out.c = c.is_infinite ? 1.0 : c.value;
  out.predicted = {out.c * min_lower, std::sqrt(upper_sq)};
  out.actual = riesz_bounds(space, out.family);
  return out;
}

// Converse direction: if per-subspace spanning families stay jointly Riesz
// after concatenation, the span system is independent with c >= lower /
// upper of the combined family.  Refuses families that are individually
// dependent, since they can never witness the bound; reduce them with
// orthonormalize first.
template <typename Scalar>
struct FamilyDeduction {
  bool ibap = false;
  double c_lower = 0.0;
  RieszBounds combined;
  SubspaceSystem<Scalar> system;
};

template <typename Scalar>
FamilyDeduction<Scalar> ibap_from_families(
    const InnerProduct& space, const std::vector<Matrix<Scalar>>& families,
    Tolerance tol = {}) {
  if (families.empty()) throw std::invalid_argument("no families given");
  std::vector<Subspace<Scalar>> parts;
  parts.reserve(families.size());
  for (std::size_t i = 0; i < families.size(); ++i) {
    const Subspace<Scalar> span = orthonormalize(space, families[i], tol);
    if (span.dim() < families[i].cols())
      throw RefusalError(
          "family " + std::to_string(i + 1) +
              " is linearly dependent, so no Riesz bound can hold; pass it "
              "through orthonormalize first",
          {{"family", static_cast<double>(i + 1)},
           {"rank", static_cast<double>(span.dim())},
           {"size", static_cast<double>(families[i].cols())}});
    parts.push_back(span);
  }

  Index cols = 0;
  for (const auto& f : families) cols += f.cols();
  Matrix<Scalar> family(space.dim(), cols);
  Index at = 0;
  for (const auto& f : families) {
    family.middleCols(at, f.cols()) = f;
    at += f.cols();
  }

  FamilyDeduction<Scalar> out{false, 0.0, riesz_bounds(space, family),
                              SubspaceSystem<Scalar>(std::move(parts))};
  const RealVector sig = singular_values(space.to_model(family));
  out.ibap = out.combined.lower > tol.rank_cut(sig(0));
  if (out.ibap && out.combined.upper > 0)
    out.c_lower = out.combined.lower / out.combined.upper;
  return out;
}

}  // namespace ibap
