#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>

#include "ibap/analysis.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace ibap;

namespace {

bool all_verdicts(const std::array<bool, 10>& v, bool expect) {
  for (bool b : v)
    if (b != expect) return false;
  return true;
}

bool agree(const std::array<bool, 10>& v) {
  return all_verdicts(v, true) || all_verdicts(v, false);
}

SubspaceSystem<double> axes3() {
  const InnerProduct e3 = InnerProduct::identity(3);
  std::vector<Subspace<double>> parts;
  for (Index k = 0; k < 3; ++k) {
    RealMatrix col = RealMatrix::Zero(3, 1);
    col(k, 0) = 1.0;
    parts.emplace_back(e3, col);
  }
  return SubspaceSystem<double>(std::move(parts));
}

}  // namespace

TEST_CASE("orthogonal axes satisfy every condition with unit constants") {
  const auto rep = check_conditions(axes3());
  CHECK(rep.ibap);
  CHECK(all_verdicts(rep.verdicts, true));
  CHECK_FALSE(rep.flagged);
  CHECK(rep.c.value == doctest::Approx(1.0));
  CHECK(rep.lambda_min_gram.value == doctest::Approx(1.0));
  CHECK(rep.li_dim_gap == 0);
  CHECK(rep.sum_dim == 3);
  CHECK(rep.cond9_dim == 3);
  for (const auto& d : rep.inclinations) {
    REQUIRE_FALSE(d.is_infinite);
    CHECK(d.value == doctest::Approx(1.0));
  }
  for (Index dim : rep.cond10_dims) CHECK(dim == 3);

  // witnesses degenerate to the orthogonal ones
  REQUIRE(rep.projections.has_value());
  CHECK(rep.projections->max_residual < 1e-14);
  for (Index k = 0; k < 3; ++k) {
    const auto& sys = axes3();
    CHECK((rep.projections->projections[static_cast<std::size_t>(k)] -
           projector(sys.part(k)))
              .norm() < 1e-14);
  }
  REQUIRE(rep.metric.has_value());
  CHECK((rep.metric->w0 - RealMatrix::Identity(3, 3)).norm() < 1e-14);
  CHECK(rep.metric->positive_definite);
  CHECK(rep.metric->max_cross < 1e-14);
}

TEST_CASE("identical lines fail every condition coherently") {
  const InnerProduct e2 = InnerProduct::identity(2);
  RealMatrix col(2, 1);
  col << 1.0, 0.0;
  const Subspace<double> h(e2, col);
  const auto rep = check_conditions(SubspaceSystem<double>({h, h}));
  CHECK_FALSE(rep.ibap);
  CHECK(all_verdicts(rep.verdicts, false));
  CHECK(rep.li_dim_gap == 1);
  CHECK(rep.c.value < 1e-12);
  CHECK_FALSE(rep.isomorphism.has_value());
}

TEST_CASE("planar angles reproduce the closed-form constant on all routes") {
  for (double phi : {15.0, 45.0, 60.0, 89.0}) {
    const double rad = phi * M_PI / 180.0;
    const auto rep = check_conditions(gen::planar_angle_system(rad));
    const double expected = std::sqrt(1.0 - std::cos(rad));
    CHECK(rep.c.value == doctest::Approx(expected).epsilon(1e-12));
    // the eigen route lands on the same number squared
    CHECK(std::abs(rep.lambda_min_gram.value - rep.c.value * rep.c.value) <=
          1e-10 * std::max(1.0, rep.c.value * rep.c.value));
    // inclination of each line to the other is sin(phi)
    CHECK(rep.inclinations[0].value ==
          doctest::Approx(std::sin(rad)).epsilon(1e-9));
    CHECK(all_verdicts(rep.verdicts, true));
  }
}

TEST_CASE("near-degenerate angles stay flagged or consistent") {
  // right at the decision scale the verdict may go either way, but it must
  // either agree across all ten routes or carry a band flag
  for (double phi : {1e-8, 1e-9, 1e-10, 1e-11, 1e-12}) {
    const auto rep = check_conditions(gen::planar_angle_system(phi));
    CHECK((agree(rep.verdicts) || rep.flagged));
  }
  // comfortably inside: all true, no flags
  const auto fine = check_conditions(gen::planar_angle_system(1e-3));
  CHECK(all_verdicts(fine.verdicts, true));
  CHECK_FALSE(fine.flagged);
}

TEST_CASE("every engineered fixture produces agreeing or flagged verdicts") {
  for (const auto& sys : gen::engineered_systems()) {
    const auto rep = check_conditions(sys);
    CHECK((agree(rep.verdicts) || rep.flagged));
    // the squared-constant identity holds whenever parts exist
    if (!rep.c.is_infinite) {
      CHECK(std::abs(rep.lambda_min_gram.value - rep.c.value * rep.c.value) <=
            1e-10 * std::max(1.0, rep.c.value * rep.c.value));
    }
  }
}

TEST_CASE("random systems agree across routes and match the gram identity") {
  gen::Rng rng(101);
  std::uniform_int_distribution<Index> dims(2, 9);
  std::uniform_int_distribution<Index> parts(1, 4);
  std::uniform_int_distribution<int> weighted(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const Index d = dims(rng);
    const InnerProduct space = weighted(rng)
                                   ? gen::random_weighted_space(rng, d)
                                   : InnerProduct::identity(d);
    const auto sys = gen::random_system(rng, space, parts(rng));
    const auto rep = check_conditions(sys);
    CHECK((agree(rep.verdicts) || rep.flagged));
    if (!rep.c.is_infinite) {
      CHECK(std::abs(rep.lambda_min_gram.value - rep.c.value * rep.c.value) <=
            1e-10 * std::max(1.0, rep.c.value * rep.c.value));
    }
  }
}

TEST_CASE("the all-zero system is trivially solvable") {
  const InnerProduct e3 = InnerProduct::identity(3);
  const SubspaceSystem<double> sys(
      {Subspace<double>::zero(e3), Subspace<double>::zero(e3)});
  const auto rep = check_conditions(sys);
  CHECK(all_verdicts(rep.verdicts, true));
  CHECK(rep.c.is_infinite);
  CHECK(rep.lambda_min_gram.is_infinite);
  for (const auto& d : rep.inclinations) CHECK(d.is_infinite);
}

TEST_CASE("witnesses satisfy their defining identities") {
  gen::Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 4 + (trial % 4);
    const InnerProduct space = (trial % 2) == 0
                                   ? InnerProduct::identity(d)
                                   : gen::random_weighted_space(rng, d);
    const auto sys = gen::random_independent_system(rng, space, 2 + (trial % 3));
    const auto rep = check_conditions(sys);
    REQUIRE(rep.ibap);
    REQUIRE(rep.projections.has_value());
    REQUIRE(rep.metric.has_value());
    REQUIRE(rep.isomorphism.has_value());

    const double c = rep.c.value;
    REQUIRE(c > 1e-3);  // generator keeps these comfortably independent
    CHECK(rep.projections->max_residual < 1e-9);

    // projections reach exactly their subspaces and kill the others
    const auto& es = rep.projections->projections;
    for (Index i = 0; i < sys.n(); ++i) {
      const RealMatrix fix =
          es[static_cast<std::size_t>(i)] * sys.part(i).basis() -
          sys.part(i).basis();
      CHECK(fix.norm() < 1e-9);
      const RealVector probe =
          es[static_cast<std::size_t>(i)] * gen::gaussian_vector(rng, d);
      CHECK(sys.part(i).contains(probe, 1e-8));
      for (Index j = 0; j < sys.n(); ++j) {
        if (i == j) continue;
        CHECK((es[static_cast<std::size_t>(i)] * sys.part(j).basis()).norm() <
              1e-9);
      }
    }

    // the metric orthogonalizes the parts and stays equivalent
    const RealMatrix& w0 = rep.metric->w0;
    CHECK(rep.metric->positive_definite);
    CHECK(rep.metric->max_cross < 1e-10);
    for (Index i = 0; i < sys.n(); ++i)
      for (Index j = 0; j < sys.n(); ++j) {
        if (i == j) continue;
        const RealMatrix cross =
            sys.part(i).basis().transpose() * w0 * sys.part(j).basis();
        CHECK(cross.norm() < 1e-10);
      }
    // eigenvalues of the model metric sit inside the advertised sandwich
    const RealMatrix w0_model =
        space.inv_sqrt_weights().asDiagonal() * w0 *
        space.inv_sqrt_weights().asDiagonal();
    Eigen::SelfAdjointEigenSolver<RealMatrix> eig(w0_model,
                                                  Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues()(0) >= rep.metric->equiv_lo - 1e-12);
    CHECK(eig.eigenvalues()(d - 1) <= rep.metric->equiv_hi + 1e-12);
  }
}

TEST_CASE("witness constructors refuse dependent systems with diagnostics") {
  const InnerProduct e2 = InnerProduct::identity(2);
  RealMatrix col(2, 1);
  col << 1.0, 0.0;
  const Subspace<double> h(e2, col);
  const SubspaceSystem<double> sys({h, h});
  CHECK_THROWS_AS(construct_oblique_projections(sys), RefusalError);
  CHECK_THROWS_AS(construct_orthogonalizing_metric(sys), RefusalError);
  try {
    construct_oblique_projections(sys);
  } catch (const RefusalError& e) {
    CHECK(e.details().at("li_dim_gap") == 1.0);
  }
}

TEST_CASE("stability certificates bound the perturbed constant") {
  // rotate one axis of the orthogonal pair by theta: margin 1 - sin^2,
  // perturbed constant sqrt(1 - sin(theta))
  const InnerProduct e2 = InnerProduct::identity(2);
  for (double theta : {0.05, 0.3, 0.7}) {
    const auto base = gen::planar_angle_system(M_PI / 2.0);
    const auto moved = gen::planar_angle_system(M_PI / 2.0 - theta);
    const auto cert = stability_certify(base, moved);
    CHECK(cert.c == doctest::Approx(1.0));
    CHECK(cert.theta[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cert.theta[1] == doctest::Approx(std::sin(theta)).epsilon(1e-12));
    CHECK(cert.margin ==
          doctest::Approx(1.0 - std::sin(theta) * std::sin(theta)));
    CHECK(cert.verdict);
    const auto moved_rep = check_conditions(moved);
    CHECK(moved_rep.c.value >= cert.predicted_c - 1e-9);
  }

  // random certified pairs keep the promise
  gen::Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = 3 + (trial % 5);
    const InnerProduct space = InnerProduct::identity(d);
    const auto sys = gen::random_independent_system(rng, space, 2);
    const auto pert = gen::perturbed_system(rng, sys, 1e-4);
    const auto cert = stability_certify(sys, pert);
    if (!cert.verdict) continue;
    const auto rep = check_conditions(pert);
    CHECK(rep.c.value >= cert.predicted_c - 1e-9);
  }

  // refusals: dependent base, all-zero base
  RealMatrix col(2, 1);
  col << 1.0, 0.0;
  const Subspace<double> h(e2, col);
  CHECK_THROWS_AS(
      stability_certify(SubspaceSystem<double>({h, h}),
                        SubspaceSystem<double>({h, h})),
      RefusalError);
  CHECK_THROWS_AS(
      stability_certify(
          SubspaceSystem<double>({Subspace<double>::zero(e2)}),
          SubspaceSystem<double>({Subspace<double>::zero(e2)})),
      RefusalError);
}

TEST_CASE("operator systems reduce to their kernel complements") {
  const InnerProduct e2 = InnerProduct::identity(2);
  RealMatrix t1(1, 2), t2(1, 2);
  t1 << 1.0, 0.0;
  t2 << 1.0, 1.0;
  const auto sys = reduce_operator_system<double>(e2, {t1, t2});
  REQUIRE(sys.n() == 2);
  CHECK(sys.part(0).dim() == 1);
  CHECK(sys.part(1).dim() == 1);
  // rows (1,0) and (1,1): lines at 45 degrees, c = sqrt(1 - 1/sqrt(2))
  const auto rep = check_conditions(sys);
  CHECK(rep.c.value ==
        doctest::Approx(std::sqrt(1.0 - 1.0 / std::sqrt(2.0))).epsilon(1e-12));

  // weighted metric: the reduced part is W-orthogonal to the kernel
  RealVector w(2);
  w << 4.0, 1.0;
  const InnerProduct wsp = InnerProduct::weighted(w);
  const auto wsys = reduce_operator_system<double>(wsp, {t2});
  RealVector kernel(2);
  kernel << 1.0, -1.0;  // T2 kernel direction
  const RealVector basis = wsys.part(0).basis().col(0);
  CHECK(std::abs(wsp.inner<double>(basis, kernel)) < 1e-12);

  // zero operator contributes the zero subspace
  const auto zsys = reduce_operator_system<double>(e2, {RealMatrix::Zero(1, 2)});
  CHECK(zsys.part(0).is_zero());

  CHECK_THROWS_AS(reduce_operator_system<double>(e2, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(reduce_operator_system<double>(e2, {RealMatrix::Zero(1, 3)}),
                  std::invalid_argument);
}

TEST_CASE("complex systems get the same analysis") {
  using C = std::complex<double>;
  const InnerProduct e2 = InnerProduct::identity(2);
  Matrix<C> u(2, 1), v(2, 1);
  u << C(1, 0), C(0, 0);
  const double phi = 0.7;
  v << C(std::cos(phi), 0), C(0, std::sin(phi));  // phase on the second slot
  const SubspaceSystem<C> sys(
      {Subspace<C>(e2, u), Subspace<C>(e2, v)});
  const auto rep = check_conditions(sys);
  CHECK(all_verdicts(rep.verdicts, true));
  CHECK(rep.c.value == doctest::Approx(std::sqrt(1.0 - std::cos(phi))));
  REQUIRE(rep.projections.has_value());
  CHECK(rep.projections->max_residual < 1e-12);
}
