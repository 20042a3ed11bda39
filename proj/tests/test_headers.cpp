#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "ibap/io.hpp"
#include "ibap/riesz.hpp"
#include "ibap/solve.hpp"
#include "ibap/spectral.hpp"

// Compile-time coverage: every template instantiated for both scalar
// types, plus one tiny end-to-end smoke run per module.

namespace {

template <typename Scalar>
void touch_all() {
  using namespace ibap;
  const InnerProduct space = InnerProduct::identity(3);
  Matrix<Scalar> e1 = Matrix<Scalar>::Zero(3, 1);
  e1(0, 0) = Scalar(1);
  Matrix<Scalar> e2 = Matrix<Scalar>::Zero(3, 1);
  e2(1, 0) = Scalar(1);
  const Subspace<Scalar> h1(space, e1);
  const Subspace<Scalar> h2(space, e2);
  SubspaceSystem<Scalar> sys({h1, h2});

  const auto rep = check_conditions(sys);
  CHECK(rep.ibap);
  CHECK(rep.verdicts == std::array<bool, 10>{true, true, true, true, true,
                                             true, true, true, true, true});

  const auto proj = construct_oblique_projections(sys);
  CHECK(proj.max_residual < 1e-12);
  const auto metric = construct_orthogonalizing_metric(sys);
  CHECK(metric.positive_definite);

  std::vector<Vector<Scalar>> targets{e1.col(0) * Scalar(2),
                                      e2.col(0) * Scalar(-1)};
  const auto sol = solve_exact(sys, targets);
  CHECK(sol.residuals[0] < 1e-12);
  CHECK(sol.residuals[1] < 1e-12);
  const auto sol2 = solve_approx(sys, targets, 1e-9);
  CHECK(sol2.iterations >= 1);
  const auto sol3 = solve_via_cond10(sys, targets);
  CHECK(sol3.residuals[0] < 1e-10);

  const auto cert = stability_certify(sys, sys);
  CHECK(cert.verdict);

  const auto bz =
      bezout<Scalar>({Scalar(0), Scalar(1)}, std::vector<int>{1, 1});
  CHECK(bz.residual < 1e-12);
  const auto synth = synthesize_operator(sys, {Scalar(0), Scalar(1)});
  const auto red = eigenspace_system<Scalar>(space, synth.op,
                                             {Scalar(0), Scalar(1)});
  CHECK(red.partition_residual < 1e-10);
  const auto bounds = delta_lower_bounds(space, red.ops);
  CHECK(bounds.size() == 2);

  const auto rb = riesz_bounds<Scalar>(space, e1);
  CHECK(rb.lower == doctest::Approx(1.0));
  const auto comb = combine_families<Scalar>(space, {e1, e2});
  CHECK(comb.actual.lower == doctest::Approx(1.0));
  const auto ded = ibap_from_families<Scalar>(space, {e1, e2});
  CHECK(ded.ibap);

  const auto ops = reduce_operator_system<Scalar>(
      space, {Matrix<Scalar>(e1.transpose()), Matrix<Scalar>(e2.transpose())});
  CHECK(ops.n() == 2);
}

}  // namespace

TEST_CASE("all modules instantiate for real scalars") {
  touch_all<double>();
}

TEST_CASE("all modules instantiate for complex scalars") {
  touch_all<std::complex<double>>();
}

TEST_CASE("probability layer smoke") {
  using namespace ibap;
  const auto sp = geometric_space(0.5, 6);
  CHECK(sp.masses().sum() == doctest::Approx(1.0));
  const auto part = part_from_starting_points(6, {1, 3});
  CHECK(part.alg.n_blocks() == 2);
  const auto sub = marginal_subspaces(sp, part.alg);
  CHECK(sub.measurable.dim() == 2);
  CHECK(sub.centered.dim() == 1);
  const auto report = imp_check(sp, {part.alg});
  CHECK(report.ibap);
  const auto tails = tail_report(sp);
  CHECK(tails.sup_ratio == doctest::Approx(0.5));
  const auto shift = weighted_shift_check(sp);
  CHECK(shift.identity_residual < 1e-12);
  CHECK(shift.power_norm < 1e-14);
  const auto iv = interval_reduction(0.0, 1.0, {{0.5}, {0.25, 0.5}});
  CHECK(iv.overlap);

  RealVector joint(4);
  joint << 0.3, 0.2, 0.2, 0.3;
  const DiscreteProbabilitySpace grid(std::move(joint));
  const PartitionSigmaAlgebra rows(4, {{0, 1}, {2, 3}});
  const PartitionSigmaAlgebra cols(4, {{0, 2}, {1, 3}});
  CHECK(bickel_alpha(grid, {rows, cols}) == 0.8);
  // identical nontrivial partitions miss every off-diagonal block pair
  CHECK(bickel_alpha(grid, {rows, rows}) == 0.0);
}

TEST_CASE("json layer smoke") {
  using namespace ibap;
  const auto doc = io::json::parse(std::string(R"({
    "dim": 2,
    "subspaces": [[[1.0, 0.0]], [[0.0, 1.0]]]
  })"));
  const auto sys = io::system_from(doc);
  CHECK(sys.n() == 2);
  const auto emitted = io::system_to_json(sys);
  const auto back = io::system_from(emitted);
  CHECK(back.part(0).basis() == sys.part(0).basis());
  const auto rep = io::report_to_json(check_conditions(sys), true);
  CHECK(rep.at("ibap").get<bool>());
}
