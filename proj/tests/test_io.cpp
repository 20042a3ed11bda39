#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ibap/analysis.hpp"
#include "ibap/io.hpp"
#include "support/generators.hpp"

using namespace ibap;
using io::json;

TEST_CASE("numbers arrive as literals or as decimal strings") {
  CHECK(io::number_from(json(1.5), "x") == 1.5);
  CHECK(io::number_from(json("2.25"), "x") == 2.25);
  CHECK(io::number_from(json("-3e-2"), "x") == -0.03);
  CHECK_THROWS_AS(io::number_from(json("abc"), "x"), std::invalid_argument);
  CHECK_THROWS_AS(io::number_from(json("1.5oops"), "x"), std::invalid_argument);
  CHECK_THROWS_AS(io::number_from(json(true), "x"), std::invalid_argument);
  CHECK_THROWS_AS(io::index_from(json(1.5), "x"), std::invalid_argument);
  CHECK(io::index_from(json(4.0), "x") == 4);
}

TEST_CASE("vectors and column lists validate their shape") {
  const RealVector v = io::vector_from(json::parse("[1, 2, 3]"), "v");
  CHECK(v.size() == 3);
  CHECK(v(2) == 3.0);
  CHECK_THROWS_AS(io::vector_from(json::parse("{}"), "v"),
                  std::invalid_argument);

  const RealMatrix m =
      io::columns_from(json::parse("[[1, 0], [0, 1]]"), 2, "m");
  CHECK(m.cols() == 2);
  CHECK(m(1, 1) == 1.0);
  try {
    io::columns_from(json::parse("[[1, 0], [0, 1, 2]]"), 2, "m");
    FAIL("expected a shape complaint");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("column 1") != std::string::npos);
  }
}

TEST_CASE("spaces parse with and without weights") {
  const InnerProduct plain = io::space_from(json::parse(R"({"dim": 3})"));
  CHECK(plain.dim() == 3);
  CHECK(plain.is_identity());

  const InnerProduct weighted = io::space_from(
      json::parse(R"({"dim": 2, "weights": [4.0, 0.25]})"));
  CHECK_FALSE(weighted.is_identity());
  CHECK(weighted.weights()(0) == 4.0);

  CHECK_THROWS_AS(io::space_from(json::parse(R"({"weights": [1]})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      io::space_from(json::parse(R"({"dim": 3, "weights": [1, 1]})")),
      std::invalid_argument);
}

TEST_CASE("systems keep orthonormal input verbatim and span otherwise") {
  const json doc = json::parse(R"({
    "dim": 2,
    "subspaces": [[[1, 0]], [[3, 4]]]
  })");
  const auto sys = io::system_from(doc);
  REQUIRE(sys.n() == 2);
  CHECK(sys.part(0).basis()(0, 0) == 1.0);  // untouched
  // the second span was scaled, so it went through orthonormalization
  CHECK(sys.part(1).basis().col(0).norm() == doctest::Approx(1.0));
  CHECK(sys.part(1).contains(io::vector_from(json::parse("[3, 4]"), "t")));

  CHECK_THROWS_AS(io::system_from(json::parse(R"({"dim": 2})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      io::system_from(json::parse(R"({"dim": 2, "subspaces": []})")),
      std::invalid_argument);
}

TEST_CASE("emitted systems parse back to themselves, byte for byte") {
  gen::Rng rng(501);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 3 + static_cast<Index>(trial % 4);
    const InnerProduct sp = (trial % 2) ? gen::random_weighted_space(rng, d)
                                        : InnerProduct::identity(d);
    const auto sys = gen::random_independent_system(rng, sp, 2 + (trial % 2));

    const json emitted = io::system_to_json(sys);
    const auto reparsed = io::system_from(emitted);
    const json again = io::system_to_json(reparsed);
    CHECK(emitted.dump() == again.dump());

    REQUIRE(reparsed.n() == sys.n());
    for (Index k = 0; k < sys.n(); ++k)
      CHECK((model_projector(reparsed.part(k)) -
             model_projector(sys.part(k)))
                .norm() < 1e-12);
  }
}

TEST_CASE("targets and operators validate their shapes") {
  const json doc = json::parse(R"({"targets": [[1, 0], [0, 2]]})");
  const auto targets = io::targets_from(doc, 2);
  CHECK(targets.size() == 2);
  CHECK_THROWS_AS(io::targets_from(doc, 3), std::invalid_argument);
  CHECK_THROWS_AS(io::targets_from(json::parse("{}"), 2),
                  std::invalid_argument);

  const json op = json::parse(R"({"operator": [[1, 0], [1, 2]]})");
  const RealMatrix a = io::operator_from(op, 2);
  CHECK(a(0, 1) == 1.0);  // columns arrive column-major
  CHECK_THROWS_AS(io::operator_from(op, 3), std::invalid_argument);
  CHECK_THROWS_AS(
      io::operator_from(json::parse(R"({"operator": [[1, 0]]})"), 2),
      std::invalid_argument);
}

TEST_CASE("measures parse by kind") {
  const auto geo = io::measure_from(
      json::parse(R"({"measure": {"kind": "geometric", "q": 0.5, "atoms": 6}})"));
  CHECK(geo.size() == 6);
  CHECK(geo.masses()(0) == doctest::Approx(0.5));

  const auto pow2 = io::measure_from(
      json::parse(R"({"measure": {"kind": "power", "atoms": 4}})"));
  CHECK(pow2.size() == 4);

  const auto expl = io::measure_from(
      json::parse(R"({"measure": {"kind": "explicit", "masses": [0.5, 0.5]}})"));
  CHECK(expl.size() == 2);

  CHECK_THROWS_AS(
      io::measure_from(json::parse(R"({"measure": {"kind": "cauchy"}})")),
      std::invalid_argument);
  CHECK_THROWS_AS(io::measure_from(json::parse(R"({})")),
                  std::invalid_argument);
}

TEST_CASE("partitions parse from one-based blocks or starting points") {
  const json doc = json::parse(R"({
    "partitions": [
      {"blocks": [[1, 2], [3, 4]]},
      {"starts": [1, 3]}
    ]
  })");
  const auto algs = io::partitions_from(doc, 4);
  REQUIRE(algs.size() == 2);
  CHECK(algs[0].blocks()[0] == std::vector<Index>{0, 1});
  CHECK(algs[1].blocks()[1] == std::vector<Index>{2, 3});

  CHECK_THROWS_AS(
      io::partitions_from(
          json::parse(R"({"partitions": [{"blocks": [[0, 1]]}]})"), 2),
      std::invalid_argument);
  CHECK_THROWS_AS(
      io::partitions_from(json::parse(R"({"partitions": [{}]})"), 2),
      std::invalid_argument);
}

TEST_CASE("infinite quantities emit as a tagged string, not a sentinel") {
  CHECK(io::to_json(ExtendedReal::infinite()) == json("infinity"));
  CHECK(io::to_json(ExtendedReal::finite(0.5)) == json(0.5));
}

TEST_CASE("reports carry the format version and are deterministic") {
  gen::Rng rng(503);
  const auto sys =
      gen::random_independent_system(rng, InnerProduct::identity(4), 2);
  const auto rep = check_conditions(sys);

  const json out = io::report_to_json(rep);
  CHECK(out.at("format_version") == 1);
  CHECK(out.at("status") == "ok");
  CHECK(out.at("ibap").is_boolean());
  CHECK(out.at("verdicts").size() == 10);
  CHECK(out.contains("c"));
  CHECK_FALSE(out.contains("witnesses"));

  const json with_w = io::report_to_json(rep, true);
  CHECK(with_w.contains("witnesses"));
  CHECK(with_w.at("witnesses").contains("assembled"));

  // byte-identical across repeated emission
  CHECK(out.dump() == io::report_to_json(check_conditions(sys)).dump());
}

TEST_CASE("solutions and refusals emit their contract fields") {
  const InnerProduct e2 = InnerProduct::identity(2);
  RealMatrix u(2, 1), v(2, 1);
  u << 1, 0;
  v << 0, 1;
  const SubspaceSystem<double> sys(
      {Subspace<double>(e2, u), Subspace<double>(e2, v)});
  const auto sol = solve_exact(sys, {u.col(0), v.col(0)});
  const json out = io::solution_to_json(sol);
  CHECK(out.at("format_version") == 1);
  CHECK(out.at("status") == "ok");
  CHECK(out.at("x").size() == 2);
  CHECK(out.at("residuals").size() == 2);

  const RefusalError err("bad luck", {{"c", 0.0}, {"li_dim_gap", 2.0}});
  const json ref = io::refusal_to_json(err);
  CHECK(ref.at("status") == "refused");
  CHECK(ref.at("reason") == "bad luck");
  CHECK(ref.at("details").at("li_dim_gap") == 2.0);
}
