#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ibap/analysis.hpp"
#include "ibap/riesz.hpp"
#include "ibap/solve.hpp"

namespace ibap {

// Finitely many atoms with strictly positive masses summing to one.  The
// L2 inner product over the space is the mass-weighted metric, so every
// subspace/system routine applies verbatim to random variables.
class DiscreteProbabilitySpace {
 public:
  explicit DiscreteProbabilitySpace(RealVector masses)
      : p_(std::move(masses)), metric_(InnerProduct::weighted(p_)) {
    if (std::abs(p_.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("atom masses must sum to one");
  }

  Index size() const { return p_.size(); }
  const RealVector& masses() const { return p_; }
  const InnerProduct& metric() const { return metric_; }

 private:
  RealVector p_;
  InnerProduct metric_;
};

namespace detail {

// psi_1(x) = sum_{j>=0} 1/(x+j)^2 by recurrence shift plus the asymptotic
// Bernoulli series; accurate to ~1e-13 relative for all x > 0.
inline double trigamma(double x) {
  if (!(x > 0)) throw std::invalid_argument("trigamma needs x > 0");
  double acc = 0.0;
  while (x < 16.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv *
      (1.0 +
       inv * (0.5 + inv * (1.0 / 6.0 +
                           inv2 * (-1.0 / 30.0 +
                                   inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0))))));
  return acc + series;
}

}  // namespace detail

// Truncated geometric distribution with the tail mass folded into the last
// atom, so every tail sum keeps its closed form exactly.
inline DiscreteProbabilitySpace geometric_space(double q, Index n_atoms) {
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("ratio must lie strictly inside (0, 1)");
  if (n_atoms < 1) throw std::invalid_argument("need at least one atom");
  RealVector p(n_atoms);
  for (Index k = 0; k < n_atoms; ++k)
    p(k) = (1.0 - q) * std::pow(q, static_cast<double>(k));
  p(n_atoms - 1) = std::pow(q, static_cast<double>(n_atoms - 1));
  return DiscreteProbabilitySpace(std::move(p));
}

// Masses proportional to 1/k^2, the remainder of the series absorbed into
// the last atom.
inline DiscreteProbabilitySpace power_space(Index n_atoms) {
  if (n_atoms < 1) throw std::invalid_argument("need at least one atom");
  RealVector p(n_atoms);
  for (Index k = 0; k + 1 < n_atoms; ++k) {
    const double kk = static_cast<double>(k + 1);
    p(k) = 1.0 / (kk * kk);
  }
  p(n_atoms - 1) = detail::trigamma(static_cast<double>(n_atoms));
  p /= p.sum();
  return DiscreteProbabilitySpace(std::move(p));
}

// A finite sigma-algebra: a partition of the atoms into disjoint covering
// blocks.  Atom indices are zero-based throughout the library.
class PartitionSigmaAlgebra {
 public:
  PartitionSigmaAlgebra(Index n_atoms, std::vector<std::vector<Index>> blocks)
      : n_atoms_(n_atoms),
        blocks_(std::move(blocks)),
        block_of_(static_cast<std::size_t>(n_atoms), -1) {
    if (n_atoms < 1) throw std::invalid_argument("need at least one atom");
    if (blocks_.empty())
      throw std::invalid_argument("a partition needs at least one block");
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      if (blocks_[b].empty())
        throw std::invalid_argument("blocks must be nonempty");
      for (Index atom : blocks_[b]) {
        if (atom < 0 || atom >= n_atoms)
          throw std::invalid_argument("atom index out of range");
        if (block_of_[static_cast<std::size_t>(atom)] != -1)
          throw std::invalid_argument("blocks must be disjoint");
        block_of_[static_cast<std::size_t>(atom)] = static_cast<Index>(b);
      }
      std::sort(blocks_[b].begin(), blocks_[b].end());
    }
    for (Index id : block_of_)
      if (id == -1)
        throw std::invalid_argument("blocks must cover every atom");
  }

  Index n_atoms() const { return n_atoms_; }
  Index n_blocks() const { return static_cast<Index>(blocks_.size()); }
  const std::vector<std::vector<Index>>& blocks() const { return blocks_; }
  Index block_of(Index atom) const {
    return block_of_[static_cast<std::size_t>(atom)];
  }

 private:
  Index n_atoms_;
  std::vector<std::vector<Index>> blocks_;
  std::vector<Index> block_of_;
};

inline double expectation(const DiscreteProbabilitySpace& sp,
                          const RealVector& xi) {
  if (xi.size() != sp.size())
    throw std::invalid_argument("variable length must match the atom count");
  return sp.masses().dot(xi);
}

// Block-averaging: the orthogonal projection of xi onto the functions
// measurable with respect to the partition.
inline RealVector conditional_expectation(const DiscreteProbabilitySpace& sp,
                                          const PartitionSigmaAlgebra& alg,
                                          const RealVector& xi) {
  if (alg.n_atoms() != sp.size())
    throw std::invalid_argument("partition and space disagree on atoms");
  if (xi.size() != sp.size())
    throw std::invalid_argument("variable length must match the atom count");
  RealVector out(sp.size());
  for (const auto& block : alg.blocks()) {
    double mass = 0.0;
    double acc = 0.0;
    for (Index atom : block) {
      mass += sp.masses()(atom);
      acc += sp.masses()(atom) * xi(atom);
    }
    for (Index atom : block) out(atom) = acc / mass;
  }
  return out;
}

// The measurable functions for a partition, and the mean-zero ones: the
// two subspaces every compatibility question lives in.
struct MarginalSubspaces {
  Subspace<double> measurable;
  Subspace<double> centered;
};

inline MarginalSubspaces marginal_subspaces(const DiscreteProbabilitySpace& sp,
                                            const PartitionSigmaAlgebra& alg,
                                            Tolerance tol = {}) {
  if (alg.n_atoms() != sp.size())
    throw std::invalid_argument("partition and space disagree on atoms");
  const Index n = sp.size();
  const Index nb = alg.n_blocks();
  const RealVector& sqw = sp.metric().sqrt_weights();

  // Normalized block indicators are orthonormal in the mass metric.
  RealMatrix model = RealMatrix::Zero(n, nb);
  std::vector<double> block_mass(static_cast<std::size_t>(nb), 0.0);
  for (Index b = 0; b < nb; ++b) {
    for (Index atom : alg.blocks()[static_cast<std::size_t>(b)])
      block_mass[static_cast<std::size_t>(b)] += sp.masses()(atom);
    for (Index atom : alg.blocks()[static_cast<std::size_t>(b)])
      model(atom, b) =
          sqw(atom) / std::sqrt(block_mass[static_cast<std::size_t>(b)]);
  }
  Subspace<double> measurable = Subspace<double>::from_model(sp.metric(), model);

  if (nb == 1)
    return {std::move(measurable), Subspace<double>::zero(sp.metric())};
  RealMatrix centered_cols = RealMatrix::Zero(n, nb - 1);
  for (Index b = 0; b + 1 < nb; ++b) {
    for (Index atom : alg.blocks()[static_cast<std::size_t>(b)])
      centered_cols(atom, b) = 1.0;
    centered_cols.col(b).array() -= block_mass[static_cast<std::size_t>(b)];
  }
  return {std::move(measurable),
          orthonormalize(sp.metric(), centered_cols, tol)};
}

// The centered marginal subspaces stacked into one system: a tuple of
// prescribed conditional expectations is solvable exactly when this
// system admits every target tuple.
inline SubspaceSystem<double> marginal_system(
    const DiscreteProbabilitySpace& sp,
    const std::vector<PartitionSigmaAlgebra>& algs, Tolerance tol = {}) {
  if (algs.empty()) throw std::invalid_argument("need at least one partition");
  std::vector<Subspace<double>> parts;
  parts.reserve(algs.size());
  for (const auto& alg : algs)
    parts.push_back(marginal_subspaces(sp, alg, tol).centered);
  return SubspaceSystem<double>(std::move(parts));
}

inline ConditionReport<double> imp_check(
    const DiscreteProbabilitySpace& sp,
    const std::vector<PartitionSigmaAlgebra>& algs, Tolerance tol = {}) {
  return check_conditions(marginal_system(sp, algs, tol), tol);
}

namespace detail {

struct TargetMeans {
  std::vector<double> each;
  double common = 0.0;
};

// Shared preconditions for both construction routes: one target per
// partition, each measurable for its own partition, all means equal.
inline TargetMeans imp_target_means(const DiscreteProbabilitySpace& sp,
                                    const std::vector<PartitionSigmaAlgebra>& algs,
                                    const std::vector<RealVector>& targets) {
  if (algs.empty() || targets.size() != algs.size())
    throw std::invalid_argument("need one target per partition");
  double scale = 0.0;
  for (const auto& t : targets) {
    if (t.size() != sp.size())
      throw std::invalid_argument("target length must match the atom count");
    scale = std::max(scale, t.cwiseAbs().maxCoeff());
  }
  TargetMeans out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const RealVector averaged =
        conditional_expectation(sp, algs[i], targets[i]);
    if ((averaged - targets[i]).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + scale))
      throw std::invalid_argument(
          "target " + std::to_string(i + 1) +
          " is not measurable for its partition; condition it first");
    out.each.push_back(expectation(sp, targets[i]));
  }
  double lo = out.each[0];
  double hi = out.each[0];
  double mean_scale = 0.0;
  for (double a : out.each) {
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    mean_scale = std::max(mean_scale, std::abs(a));
  }
  if (hi - lo > 1e-10 * (1.0 + mean_scale))
    throw RefusalError(
        "conditional expectations of one variable share its mean, but the "
        "target means differ",
        {{"max_gap", hi - lo}, {"threshold", 1e-10 * (1.0 + mean_scale)}});
  out.common = 0.0;
  for (double a : out.each) out.common += a;
  out.common /= static_cast<double>(out.each.size());
  return out;
}

}  // namespace detail

struct ImpSolution {
  RealVector xi;
  double mean = 0.0;
  std::vector<double> residuals;  // || E(xi | part k) - target_k ||
  double norm = 0.0;
};

// Least-norm-centered construction of a variable with the prescribed
// conditional expectations, through the centered marginal system.
inline ImpSolution imp_solve(const DiscreteProbabilitySpace& sp,
                             const std::vector<PartitionSigmaAlgebra>& algs,
                             const std::vector<RealVector>& targets,
                             Tolerance tol = {}) {
  const detail::TargetMeans means = detail::imp_target_means(sp, algs, targets);
  const SubspaceSystem<double> sys = marginal_system(sp, algs, tol);
  std::vector<RealVector> centered;
  centered.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i)
    centered.push_back(targets[i].array() - means.each[i]);

  Solution<double> sol;
  try {
    sol = solve_exact(sys, centered, tol);
  } catch (const RefusalError& e) {
    throw RefusalError(std::string("no common variable exists: ") + e.what(),
                       e.details());
  }

  ImpSolution out;
  const double drift = expectation(sp, sol.x);
  out.xi = sol.x.array() - drift + means.common;
  out.mean = expectation(sp, out.xi);
  out.norm = sp.metric().norm(out.xi);
  for (std::size_t k = 0; k < targets.size(); ++k)
    out.residuals.push_back(sp.metric().norm(
        (conditional_expectation(sp, algs[k], out.xi) - targets[k]).eval()));
  return out;
}

// Partition generated by a set of starting points: a new block begins at
// every named atom past the first, and atom one always opens the leading
// block.  One-based labels on the boundary, matching how the atoms are
// usually written down.
struct StartingPointPartition {
  PartitionSigmaAlgebra alg;
  bool degenerate = false;  // single-block partition conveys nothing
  std::string note;
};

inline StartingPointPartition part_from_starting_points(
    Index n_atoms, std::vector<Index> starts) {
  if (n_atoms < 1) throw std::invalid_argument("need at least one atom");
  for (Index s : starts)
    if (s < 1 || s > n_atoms)
      throw std::invalid_argument("starting points must name atoms (1-based)");
  std::sort(starts.begin(), starts.end());
  starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

  std::vector<Index> cuts;
  for (Index s : starts)
    if (s > 1) cuts.push_back(s);
  std::vector<std::vector<Index>> blocks;
  Index prev = 1;
  for (Index cut : cuts) {
    std::vector<Index> block;
    for (Index atom = prev; atom < cut; ++atom) block.push_back(atom - 1);
    blocks.push_back(std::move(block));
    prev = cut;
  }
  std::vector<Index> last;
  for (Index atom = prev; atom <= n_atoms; ++atom) last.push_back(atom - 1);
  blocks.push_back(std::move(last));

  StartingPointPartition out{PartitionSigmaAlgebra(n_atoms, std::move(blocks)),
                             false, ""};
  if (out.alg.n_blocks() == 1) {
    out.degenerate = true;
    out.note =
        "single-block partition: conditioning on it only recovers the mean";
  }
  return out;
}

// Span of the tail indicators 1_{k..N} over the named starting atoms;
// these are exactly the functions measurable for the generated partition
// that also vanish before their first starting point.
inline Subspace<double> tail_indicator_span(const DiscreteProbabilitySpace& sp,
                                            const std::vector<Index>& starts,
                                            Tolerance tol = {}) {
  if (starts.empty()) throw std::invalid_argument("need starting points");
  std::vector<Index> sorted = starts;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (Index s : sorted)
    if (s < 1 || s > sp.size())
      throw std::invalid_argument("starting points must name atoms (1-based)");
  RealMatrix cols = RealMatrix::Zero(sp.size(), static_cast<Index>(sorted.size()));
  for (std::size_t i = 0; i < sorted.size(); ++i)
    cols.col(static_cast<Index>(i)).tail(sp.size() - sorted[i] + 1).setOnes();
  return orthonormalize(sp.metric(), cols, tol);
}

// Tail masses and the ratio diagnostics controlling whether nested
// tail-generated systems stay uniformly solvable as the truncation grows.
struct TailReport {
  RealVector tail;        // r_k = mass of {k, ..., N}
  RealVector tail_ratio;  // r_{k+1} / r_k
  double sup_ratio = 0.0;
  Index argmax = 0;  // 1-based index attaining sup_ratio (0 when empty)
  RealVector tail_over_atom;  // r_k / p_k
  RealVector atom_ratio;      // p_{k+1} / p_k
  int step = 1;
  double step_sup = 0.0;  // sup_k p_{k+step} / p_k
};

inline TailReport tail_report(const DiscreteProbabilitySpace& sp,
                              int step = 1) {
  if (step < 1) throw std::invalid_argument("step must be >= 1");
  const Index n = sp.size();
  const RealVector& p = sp.masses();
  TailReport out;
  out.step = step;
  out.tail.resize(n);
  double acc = 0.0;
  for (Index k = n - 1; k >= 0; --k) {
    acc += p(k);
    out.tail(k) = acc;
  }
  out.tail_over_atom = out.tail.array() / p.array();
  out.tail_ratio.resize(n - 1);
  out.atom_ratio.resize(n - 1);
  for (Index k = 0; k + 1 < n; ++k) {
    out.tail_ratio(k) = out.tail(k + 1) / out.tail(k);
    out.atom_ratio(k) = p(k + 1) / p(k);
  }
  if (n > 1) {
    Index at = 0;
    out.sup_ratio = out.tail_ratio.maxCoeff(&at);
    out.argmax = at + 1;
  }
  for (Index k = 0; k + step < n; ++k)
    out.step_sup = std::max(out.step_sup, p(k + step) / p(k));
  return out;
}

// The mass-weighted unilateral shift, truncated to nilpotency at the last
// atom.  In atom coordinates it moves mass one step down; its conjugated
// matrix carries the sqrt(p_{k+1}/p_k) weights.  (1 - shift) maps the
// normalized tail indicators to the orthonormal atom basis exactly.
struct ShiftReport {
  RealMatrix shift;          // atom-coordinate matrix
  RealVector weights;        // sqrt(p_{k+1} / p_k)
  double identity_residual = 0.0;
  int power = 0;
  double power_norm = 0.0;  // operator norm of shift^power in the metric
  RieszBounds f_bounds;     // bounds of the normalized tail-indicator family
};

inline ShiftReport weighted_shift_check(const DiscreteProbabilitySpace& sp,
                                        int power = -1) {
  const Index n = sp.size();
  const RealVector& p = sp.masses();
  ShiftReport out;
  out.power = power < 0 ? static_cast<int>(n) : power;
  if (out.power < 1) throw std::invalid_argument("power must be >= 1");

  out.shift = RealMatrix::Zero(n, n);
  out.weights.resize(n - 1);
  for (Index k = 0; k + 1 < n; ++k) {
    out.shift(k + 1, k) = 1.0;
    out.weights(k) = std::sqrt(p(k + 1) / p(k));
  }

  RealMatrix family(n, n);
  for (Index k = 0; k < n; ++k) {
    RealVector f = RealVector::Zero(n);
    f.tail(n - k).setOnes();
    f /= std::sqrt(p(k));
    family.col(k) = f;
    RealVector unit = RealVector::Zero(n);
    unit(k) = 1.0 / std::sqrt(p(k));
    out.identity_residual =
        std::max(out.identity_residual,
                 sp.metric().norm((f - out.shift * f - unit).eval()));
  }
  out.f_bounds = riesz_bounds(sp.metric(), family);

  const RealMatrix model = sp.metric().sqrt_weights().asDiagonal() *
                           out.shift *
                           sp.metric().inv_sqrt_weights().asDiagonal();
  RealMatrix result = RealMatrix::Identity(n, n);
  RealMatrix base = model;
  for (int e = out.power; e > 0; e >>= 1) {
    if (e & 1) result = (result * base).eval();
    if (e > 1) base = (base * base).eval();
  }
  out.power_norm = spectral_norm(result);
  return out;
}

// Common refinement of finitely many interval partitions of [a, b): the
// refined pieces become atoms, each original partition becomes a set of
// starting atoms, and a cut point shared by two partitions immediately
// yields a mean-zero function measurable for both, killing solvability for
// independent prescriptions.
struct IntervalReduction {
  DiscreteProbabilitySpace space;
  std::vector<double> boundaries;  // refined cut points, size N + 1
  std::vector<std::vector<Index>> starting_sets;  // 1-based, per partition
  bool overlap = false;
  double overlap_point = 0.0;
  RealVector witness;  // empty unless an overlap was found
};

inline IntervalReduction interval_reduction(
    double a, double b, const std::vector<std::vector<double>>& cuts,
    RealVector masses = RealVector()) {
  if (!(a < b)) throw std::invalid_argument("need a < b");
  if (cuts.empty()) throw std::invalid_argument("need at least one partition");
  std::vector<std::vector<double>> sorted_cuts = cuts;
  std::vector<double> merged{a, b};
  for (auto& pi : sorted_cuts) {
    std::sort(pi.begin(), pi.end());
    if (std::adjacent_find(pi.begin(), pi.end()) != pi.end())
      throw std::invalid_argument("duplicate cut inside one partition");
    for (double c : pi) {
      if (!(c > a && c < b))
        throw std::invalid_argument("cuts must lie strictly inside (a, b)");
      merged.push_back(c);
    }
  }
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  const Index n = static_cast<Index>(merged.size()) - 1;

  RealVector p;
  if (masses.size() == 0) {
    p.resize(n);
    for (Index k = 0; k < n; ++k)
      p(k) = merged[static_cast<std::size_t>(k) + 1] -
             merged[static_cast<std::size_t>(k)];
  } else {
    if (masses.size() != n)
      throw std::invalid_argument(
          "need one mass per refined piece (" + std::to_string(n) + ")");
    if (!(masses.minCoeff() > 0.0))
      throw std::invalid_argument("masses must be positive");
    p = masses;
  }
  p /= p.sum();

  IntervalReduction out{DiscreteProbabilitySpace(std::move(p)),
                        std::move(merged),
                        {},
                        false,
                        0.0,
                        RealVector()};

  for (const auto& pi : sorted_cuts) {
    std::vector<Index> stars{1};
    for (Index k = 1; k < n; ++k)
      if (std::binary_search(pi.begin(), pi.end(),
                             out.boundaries[static_cast<std::size_t>(k)]))
        stars.push_back(k + 1);
    out.starting_sets.push_back(std::move(stars));
  }

  for (std::size_t i = 0; i < sorted_cuts.size() && !out.overlap; ++i)
    for (std::size_t j = i + 1; j < sorted_cuts.size() && !out.overlap; ++j) {
      std::vector<double> shared;
      std::set_intersection(sorted_cuts[i].begin(), sorted_cuts[i].end(),
                            sorted_cuts[j].begin(), sorted_cuts[j].end(),
                            std::back_inserter(shared));
      if (shared.empty()) continue;
      out.overlap = true;
      out.overlap_point = shared.front();
      double left_mass = 0.0;
      const auto& pm = out.space.masses();
      for (Index k = 0; k < n; ++k)
        if (out.boundaries[static_cast<std::size_t>(k) + 1] <=
            out.overlap_point)
          left_mass += pm(k);
      out.witness.resize(n);
      for (Index k = 0; k < n; ++k)
        out.witness(k) = out.boundaries[static_cast<std::size_t>(k) + 1] <=
                                 out.overlap_point
                             ? 1.0 - left_mass
                             : -left_mass;
    }
  return out;
}

// Least joint-to-product mass ratio over block combinations; positive
// exactly when every combination of blocks can occur together.  By
// additivity of both sides in each slot, the minimum over blocks equals
// the infimum over all measurable events.
inline double bickel_alpha(const DiscreteProbabilitySpace& sp,
                           const std::vector<PartitionSigmaAlgebra>& algs) {
  if (algs.empty()) throw std::invalid_argument("need at least one partition");
  const std::size_t n = algs.size();
  std::vector<std::vector<double>> block_mass(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (algs[i].n_atoms() != sp.size())
      throw std::invalid_argument("partition and space disagree on atoms");
    for (const auto& block : algs[i].blocks()) {
      double m = 0.0;
      for (Index atom : block) m += sp.masses()(atom);
      block_mass[i].push_back(m);
    }
  }

  double alpha = std::numeric_limits<double>::infinity();
  std::vector<Index> tuple(n, 0);
  while (true) {
    double joint = 0.0;
    for (Index atom = 0; atom < sp.size(); ++atom) {
      bool inside = true;
      for (std::size_t i = 0; i < n && inside; ++i)
        inside = algs[i].block_of(atom) == tuple[i];
      if (inside) joint += sp.masses()(atom);
    }
    double denom = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      denom *= block_mass[i][static_cast<std::size_t>(tuple[i])];
    alpha = std::min(alpha, joint / denom);

    std::size_t slot = n;
    while (slot > 0) {
      --slot;
      if (++tuple[slot] < algs[slot].n_blocks()) break;
      tuple[slot] = 0;
      if (slot == 0) return alpha;
    }
  }
}

struct BickelSolution {
  RealVector xi;
  RealVector h;  // per-atom product-to-joint mass correction
  double alpha = 0.0;
  double mean = 0.0;
  std::vector<double> residuals;
};

// Closed-form construction: scale the summed centered targets by the
// product-to-joint density along the diagonal, then recenter.  Works
// whenever every block combination carries mass, entirely without linear
// solves; independent partitions give the plain sum (h identically one).
inline BickelSolution bickel_solve(const DiscreteProbabilitySpace& sp,
                                   const std::vector<PartitionSigmaAlgebra>& algs,
                                   const std::vector<RealVector>& targets) {
  const detail::TargetMeans means = detail::imp_target_means(sp, algs, targets);
  BickelSolution out;
  out.alpha = bickel_alpha(sp, algs);
  if (out.alpha == 0.0)
    throw RefusalError(
        "some block combination never occurs, so the product-form "
        "construction breaks down; solvability itself may still hold "
        "through the least-norm route",
        {{"alpha", 0.0}});

  const std::size_t n = algs.size();
  const Index atoms = sp.size();
  std::vector<std::vector<double>> block_mass(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& block : algs[i].blocks()) {
      double m = 0.0;
      for (Index atom : block) m += sp.masses()(atom);
      block_mass[i].push_back(m);
    }

  // Joint mass of the block combination through each atom.
  std::vector<double> joint(static_cast<std::size_t>(atoms), 0.0);
  for (Index atom = 0; atom < atoms; ++atom) {
    for (Index other = 0; other < atoms; ++other) {
      bool same = true;
      for (std::size_t i = 0; i < n && same; ++i)
        same = algs[i].block_of(atom) == algs[i].block_of(other);
      if (same) joint[static_cast<std::size_t>(atom)] += sp.masses()(other);
    }
  }

  out.h.resize(atoms);
  for (Index atom = 0; atom < atoms; ++atom) {
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      prod *= block_mass[i][static_cast<std::size_t>(algs[i].block_of(atom))];
    out.h(atom) = prod / joint[static_cast<std::size_t>(atom)];
  }

  RealVector eta_sum = RealVector::Zero(atoms);
  for (std::size_t i = 0; i < targets.size(); ++i)
    eta_sum += (targets[i].array() - means.each[i]).matrix();
  const RealVector xi0 = out.h.cwiseProduct(eta_sum);
  const double drift = expectation(sp, xi0);
  out.xi = xi0.array() - drift + means.common;
  out.mean = expectation(sp, out.xi);
  for (std::size_t k = 0; k < targets.size(); ++k)
    out.residuals.push_back(sp.metric().norm(
        (conditional_expectation(sp, algs[k], out.xi) - targets[k]).eval()));
  return out;
}

}  // namespace ibap
