// Command-line front door: parses JSON inputs, routes them through the
// library, and renders reports.  Exit codes separate "the theorem says no"
// (2) from unusable input (1); success is 0 with a report on stdout.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ibap/io.hpp"
#include "ibap/riesz.hpp"
#include "ibap/spectral.hpp"

namespace {

using ibap::Index;
using ibap::RealMatrix;
using ibap::RealVector;
using ibap::Tolerance;
using json = ibap::io::json;

struct Options {
  double tol_rel = 1e-10;
  std::optional<long long> seed;
  std::string format = "json";
  bool witnesses = false;
};

Tolerance tolerance_of(const Options& opt) {
  Tolerance tol;
  tol.rel = opt.tol_rel;
  return tol;
}

json read_input(const std::string& path) {
  if (path == "-") return json::parse(std::cin);
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open input file " + path);
  return json::parse(in);
}

void stamp(json& doc, const Options& opt) {
  if (opt.seed) doc["seed"] = *opt.seed;
}

void emit(const json& doc) { std::cout << doc.dump(2) << "\n"; }

std::string yes_no(bool b) { return b ? "yes" : "no"; }

std::string extended_text(const json& j) {
  return j.is_string() ? j.get<std::string>() : j.dump();
}

// Plain-language rendering of the condition report for --format text.
void print_report_text(const json& rep) {
  std::cout << "ibap: " << yes_no(rep.at("ibap").get<bool>()) << "\n";
  std::cout << "c: " << extended_text(rep.at("c")) << "\n";
  std::cout << "lambda_min_gram: " << extended_text(rep.at("lambda_min_gram"))
            << "\n";
  std::cout << "li_dim_gap: " << rep.at("li_dim_gap") << "\n";
  std::cout << "verdicts:";
  for (const auto& v : rep.at("verdicts"))
    std::cout << " " << (v.get<bool>() ? "T" : "F");
  std::cout << "\n";
  if (rep.at("flagged").get<bool>()) {
    std::cout << "flagged: yes\n";
    for (const auto& e : rep.at("band"))
      std::cout << "  condition " << e.at("condition") << ": "
                << e.at("quantity").get<std::string>() << " = "
                << e.at("value") << " vs threshold " << e.at("threshold")
                << "\n";
  }
  const std::string note = rep.at("closedness_note").get<std::string>();
  if (!note.empty()) std::cout << "note: " << note << "\n";
}

int run_analyze(const std::string& input, const Options& opt) {
  const json doc = read_input(input);
  const auto sys = ibap::io::system_from(doc, tolerance_of(opt));
  const auto rep = ibap::check_conditions(sys, tolerance_of(opt));
  json out = ibap::io::report_to_json(rep, opt.witnesses);
  stamp(out, opt);
  if (opt.format == "text")
    print_report_text(out);
  else
    emit(out);
  return 0;
}

int run_solve(const std::string& input, const std::string& targets_path,
              double approx_eps, bool constructive, const Options& opt) {
  const json doc = read_input(input);
  const auto sys = ibap::io::system_from(doc, tolerance_of(opt));

  json tdoc = doc;
  if (!targets_path.empty()) tdoc = read_input(targets_path);
  // targets travel under "targets" or, historically, "coords"
  if (!tdoc.contains("targets") && tdoc.contains("coords"))
    tdoc["targets"] = tdoc.at("coords");
  const auto targets = ibap::io::targets_from(tdoc, sys.ambient_dim());

  ibap::Solution<double> sol;
  if (constructive)
    sol = ibap::solve_via_cond10(sys, targets, tolerance_of(opt));
  else if (approx_eps > 0)
    sol = ibap::solve_approx(sys, targets, approx_eps, tolerance_of(opt));
  else
    sol = ibap::solve_exact(sys, targets, tolerance_of(opt));

  json out = ibap::io::solution_to_json(sol);
  stamp(out, opt);
  if (opt.format == "text") {
    double worst = 0.0;
    for (double r : sol.residuals) worst = std::max(worst, r);
    std::cout << "norm: " << sol.norm << "\n";
    std::cout << "max residual: " << worst << "\n";
  } else {
    emit(out);
  }
  return 0;
}

int run_spectral(const std::string& input, const Options& opt) {
  const json doc = read_input(input);
  json spaced = doc;
  const std::string op_key = doc.contains("A") ? "A" : "operator";
  if (!spaced.contains("dim")) {
    if (!spaced.contains(op_key) || !spaced.at(op_key).is_array() ||
        spaced.at(op_key).empty())
      throw std::invalid_argument("input needs an operator field");
    spaced["dim"] = spaced.at(op_key).at(0).size();
  }
  const ibap::InnerProduct space = ibap::io::space_from(spaced);
  const RealMatrix a = ibap::io::operator_from(doc, space.dim(), op_key);

  if (!doc.contains("lambdas"))
    throw std::invalid_argument("input needs a lambdas field");
  std::vector<double> lambda;
  for (const auto& l : doc.at("lambdas"))
    lambda.push_back(ibap::io::number_from(l, "lambdas"));
  std::vector<int> mults(lambda.size(), 1);
  if (doc.contains("mults")) {
    mults.clear();
    for (const auto& m : doc.at("mults"))
      mults.push_back(static_cast<int>(ibap::io::index_from(m, "mults")));
  }

  const auto red =
      ibap::root_subspace_system(space, a, lambda, mults, tolerance_of(opt));
  const auto rep = ibap::check_conditions(red.system, tolerance_of(opt));
  const auto bounds = ibap::delta_lower_bounds(space, red.ops);

  json out;
  out["format_version"] = 1;
  out["status"] = "ok";
  out["system"] = ibap::io::system_to_json(red.system);
  out["report"] = ibap::io::report_to_json(rep, opt.witnesses);
  json bz;
  json coeffs = json::array();
  for (const auto& p : red.bezout.p) coeffs.push_back(ibap::io::vector_to_json(p));
  bz["p"] = std::move(coeffs);
  bz["residual"] = red.bezout.residual;
  out["bezout"] = std::move(bz);
  out["partition_residual"] = red.partition_residual;
  json db = json::array();
  for (const auto& d : bounds) db.push_back(ibap::io::to_json(d));
  out["delta_lower_bounds"] = std::move(db);
  stamp(out, opt);
  if (opt.format == "text") {
    std::cout << "root subspace dims:";
    for (const auto& p : red.system.parts()) std::cout << " " << p.dim();
    std::cout << "\n";
    print_report_text(out.at("report"));
    std::cout << "bezout residual: " << red.bezout.residual << "\n";
    std::cout << "partition residual: " << red.partition_residual << "\n";
  } else {
    emit(out);
  }
  return 0;
}

int run_riesz(const std::string& input, const Options& opt) {
  json doc = read_input(input);
  if (!doc.contains("families") && doc.contains("family")) {
    doc["families"] = json::array({doc.at("family")});
  }
  const ibap::InnerProduct space = ibap::io::space_from(doc);
  const auto families = ibap::io::families_from(doc, space.dim());

  const auto combined =
      ibap::combine_families(space, families, tolerance_of(opt));
  const auto deduction =
      ibap::ibap_from_families(space, families, tolerance_of(opt));

  json out;
  out["format_version"] = 1;
  out["status"] = "ok";
  json each = json::array();
  for (const auto& b : combined.each) {
    json item;
    item["lower"] = b.lower;
    item["upper"] = b.upper;
    each.push_back(std::move(item));
  }
  out["bounds"] = std::move(each);
  out["predicted"] = {{"lower", combined.predicted.lower},
                      {"upper", combined.predicted.upper}};
  out["actual"] = {{"lower", combined.actual.lower},
                   {"upper", combined.actual.upper}};
  out["c"] = combined.c;
  out["ibap"] = deduction.ibap;
  out["c_lower_bound"] = deduction.c_lower;
  stamp(out, opt);
  if (opt.format == "text") {
    std::cout << "combined bounds: [" << combined.actual.lower << ", "
              << combined.actual.upper << "]\n";
    std::cout << "predicted: [" << combined.predicted.lower << ", "
              << combined.predicted.upper << "]\n";
    std::cout << "ibap: " << yes_no(deduction.ibap) << "\n";
  } else {
    emit(out);
  }
  return 0;
}

// Alternating starting sets {1, 3, 5, ...} and {2, 4, 6, ...}: the pair of
// interval sigma-algebras whose joint solvability the tail sweep tracks.
double alternating_constant(const ibap::DiscreteProbabilitySpace& sp,
                            Tolerance tol) {
  std::vector<Index> odd, even;
  for (Index s = 1; s <= sp.size(); s += 2) odd.push_back(s);
  for (Index s = 2; s <= sp.size(); s += 2) even.push_back(s);
  if (even.empty()) return 1.0;
  const std::vector<ibap::PartitionSigmaAlgebra> algs{
      ibap::part_from_starting_points(sp.size(), odd).alg,
      ibap::part_from_starting_points(sp.size(), even).alg};
  const ibap::ExtendedReal c =
      ibap::ibap_constant(ibap::marginal_system(sp, algs, tol));
  return c.is_infinite ? 1.0 : c.value;
}

ibap::DiscreteProbabilitySpace measure_for(const std::string& kind, double q,
                                           Index n) {
  if (kind == "geometric") return ibap::geometric_space(q, n);
  if (kind == "power") return ibap::power_space(n);
  throw std::invalid_argument("sweeps need a parametric kind, not '" + kind +
                              "'");
}

int run_prob_tails(const std::string& input, const std::string& kind,
                   double q, Index n_atoms, int step,
                   const std::vector<Index>& sweep, const Options& opt) {
  std::optional<ibap::DiscreteProbabilitySpace> space;
  std::string sweep_kind = kind;
  if (!input.empty()) {
    const json doc = read_input(input);
    space = ibap::io::measure_from(doc);
    if (doc.at("measure").contains("kind"))
      sweep_kind = doc.at("measure").at("kind").get<std::string>();
    if (doc.at("measure").contains("q"))
      q = ibap::io::number_from(doc.at("measure").at("q"), "measure.q");
  } else if (!kind.empty()) {
    space = measure_for(kind, q, n_atoms);
  } else {
    throw std::invalid_argument(
        "give an input file or --kind with its parameters");
  }

  const auto rep = ibap::tail_report(*space, step);
  const auto shift = ibap::weighted_shift_check(*space);

  json out;
  out["format_version"] = 1;
  out["status"] = "ok";
  out["atoms"] = space->size();
  out["tail"] = ibap::io::vector_to_json(rep.tail);
  out["tail_ratio"] = ibap::io::vector_to_json(rep.tail_ratio);
  out["sup_ratio"] = rep.sup_ratio;
  out["argmax"] = rep.argmax;
  out["tail_over_atom"] = ibap::io::vector_to_json(rep.tail_over_atom);
  out["atom_ratio"] = ibap::io::vector_to_json(rep.atom_ratio);
  out["step"] = rep.step;
  out["step_sup"] = rep.step_sup;
  json sh;
  sh["identity_residual"] = shift.identity_residual;
  sh["power"] = shift.power;
  sh["power_norm"] = shift.power_norm;
  sh["f_lower"] = shift.f_bounds.lower;
  sh["f_upper"] = shift.f_bounds.upper;
  out["shift"] = std::move(sh);

  json rows = json::array();
  for (Index n : sweep) {
    const auto swept = measure_for(sweep_kind, q, n);
    json row;
    row["N"] = n;
    row["c"] = alternating_constant(swept, tolerance_of(opt));
    row["sup_ratio"] = ibap::tail_report(swept).sup_ratio;
    rows.push_back(std::move(row));
  }
  if (!sweep.empty()) out["sweep"] = rows;
  stamp(out, opt);

  if (opt.format == "csv") {
    if (sweep.empty())
      throw std::invalid_argument("csv output needs --sweep values");
    std::ostringstream csv;
    csv.precision(17);
    csv << "N,c_N,sup_ratio\n";
    for (const auto& row : rows)
      csv << row.at("N").get<Index>() << "," << row.at("c").get<double>()
          << "," << row.at("sup_ratio").get<double>() << "\n";
    std::cout << csv.str();
  } else if (opt.format == "text") {
    std::cout << "atoms: " << space->size() << "\n";
    std::cout << "sup tail ratio: " << rep.sup_ratio << " at k = "
              << rep.argmax << "\n";
    std::cout << "shift identity residual: " << shift.identity_residual
              << "\n";
    for (const auto& row : rows)
      std::cout << "N = " << row.at("N").get<Index>()
                << ": c = " << row.at("c").get<double>()
                << ", sup_ratio = " << row.at("sup_ratio").get<double>()
                << "\n";
  } else {
    emit(out);
  }
  return 0;
}

int run_prob_imp_check(const std::string& input, const Options& opt) {
  const json doc = read_input(input);
  const auto space = ibap::io::measure_from(doc);
  const auto algs = ibap::io::partitions_from(doc, space.size());
  const auto rep = ibap::imp_check(space, algs, tolerance_of(opt));
  json out = ibap::io::report_to_json(rep, opt.witnesses);
  out["imp"] = rep.ibap;
  stamp(out, opt);
  if (opt.format == "text") {
    std::cout << "imp: " << yes_no(rep.ibap) << "\n";
    print_report_text(ibap::io::report_to_json(rep));
  } else {
    emit(out);
  }
  return 0;
}

int run_prob_imp_solve(const std::string& input, const Options& opt) {
  const json doc = read_input(input);
  const auto space = ibap::io::measure_from(doc);
  const auto algs = ibap::io::partitions_from(doc, space.size());
  const auto targets = ibap::io::targets_from(doc, space.size());
  const auto sol = ibap::imp_solve(space, algs, targets, tolerance_of(opt));

  json out;
  out["format_version"] = 1;
  out["status"] = "ok";
  out["xi"] = ibap::io::vector_to_json(sol.xi);
  out["mean"] = sol.mean;
  out["residuals"] = sol.residuals;
  out["norm"] = sol.norm;
  stamp(out, opt);
  if (opt.format == "text") {
    std::cout << "mean: " << sol.mean << "\n";
    double worst = 0.0;
    for (double r : sol.residuals) worst = std::max(worst, r);
    std::cout << "max residual: " << worst << "\n";
  } else {
    emit(out);
  }
  return 0;
}

int run_prob_interval(const std::string& input, const Options& opt) {
  const json doc = read_input(input);
  if (!doc.contains("a") || !doc.contains("b") || !doc.contains("cuts"))
    throw std::invalid_argument("input needs a, b and cuts fields");
  const double a = ibap::io::number_from(doc.at("a"), "a");
  const double b = ibap::io::number_from(doc.at("b"), "b");
  std::vector<std::vector<double>> cuts;
  for (const auto& pi : doc.at("cuts")) {
    std::vector<double> one;
    for (const auto& c : pi) one.push_back(ibap::io::number_from(c, "cuts"));
    cuts.push_back(std::move(one));
  }
  RealVector masses;
  if (doc.contains("masses"))
    masses = ibap::io::vector_from(doc.at("masses"), "masses");

  const auto red = ibap::interval_reduction(a, b, cuts, masses);
  std::vector<ibap::PartitionSigmaAlgebra> algs;
  for (const auto& stars : red.starting_sets)
    algs.push_back(
        ibap::part_from_starting_points(red.space.size(), stars).alg);
  const auto rep = ibap::imp_check(red.space, algs, tolerance_of(opt));

  json out;
  out["format_version"] = 1;
  out["status"] = "ok";
  out["boundaries"] = red.boundaries;
  out["masses"] = ibap::io::vector_to_json(red.space.masses());
  out["starting_sets"] = red.starting_sets;
  out["overlap"] = red.overlap;
  if (red.overlap) {
    out["overlap_point"] = red.overlap_point;
    out["witness"] = ibap::io::vector_to_json(red.witness);
  }
  out["imp"] = rep.ibap;
  out["report"] = ibap::io::report_to_json(rep);
  stamp(out, opt);
  if (opt.format == "text") {
    std::cout << "refined atoms: " << red.space.size() << "\n";
    std::cout << "imp: " << yes_no(rep.ibap) << "\n";
    if (red.overlap)
      std::cout << "shared cut at " << red.overlap_point
                << " blocks every independent prescription\n";
  } else {
    emit(out);
  }
  return 0;
}

int run_prob_bickel(const std::string& input, const Options& opt) {
  const json doc = read_input(input);
  const auto space = ibap::io::measure_from(doc);
  const auto algs = ibap::io::partitions_from(doc, space.size());
  const double alpha = ibap::bickel_alpha(space, algs);

  json out;
  out["format_version"] = 1;
  out["status"] = "ok";
  out["alpha"] = alpha;

  if (doc.contains("targets")) {
    const auto targets = ibap::io::targets_from(doc, space.size());
    const auto sol = ibap::bickel_solve(space, algs, targets);
    out["xi"] = ibap::io::vector_to_json(sol.xi);
    out["h"] = ibap::io::vector_to_json(sol.h);
    out["mean"] = sol.mean;
    out["residuals"] = sol.residuals;
  }
  stamp(out, opt);
  if (opt.format == "text") {
    std::cout << "alpha: " << alpha << "\n";
    if (out.contains("mean"))
      std::cout << "solution mean: " << out.at("mean").get<double>() << "\n";
  } else {
    emit(out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"subspace systems: joint solvability analysis and solvers"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--tol", opt.tol_rel,
                 "relative rank tolerance (default 1e-10)")
      ->envname("IBAP_TOL")
      ->check(CLI::PositiveNumber);
  long long seed_value = 0;
  const auto seed_opt =
      app.add_option("--seed", seed_value, "seed echoed into reports");
  app.add_option("--format", opt.format, "output format")
      ->check(CLI::IsMember({"json", "text", "csv"}));

  std::string input;
  std::string targets_path;
  double approx_eps = 0.0;
  bool constructive = false;

  auto* analyze = app.add_subcommand(
      "analyze", "ten-condition report for a subspace system");
  analyze->add_option("input", input, "system JSON (- for stdin)")->required();
  analyze->add_flag("--witnesses", opt.witnesses,
                    "include projection and metric witnesses");

  auto* solve =
      app.add_subcommand("solve", "least-norm common solution for targets");
  solve->add_option("input", input, "system JSON with targets (- for stdin)")
      ->required();
  solve->add_option("targets", targets_path,
                    "separate targets JSON (optional)");
  solve->add_option("--approx", approx_eps,
                    "regularized solve with this residual goal")
      ->check(CLI::PositiveNumber);
  solve->add_flag("--constructive", constructive,
                  "use the complement-splitting route");

  auto* spectral = app.add_subcommand(
      "spectral", "root subspace reduction of an operator");
  spectral->add_option("input", input, "operator JSON (- for stdin)")
      ->required();
  spectral->add_flag("--witnesses", opt.witnesses,
                     "include witnesses in the embedded report");

  auto* riesz =
      app.add_subcommand("riesz", "family bounds and combination analysis");
  riesz->add_option("input", input, "families JSON (- for stdin)")->required();

  auto* prob = app.add_subcommand(
      "prob", "probability layer: marginal solvability tools");
  prob->require_subcommand(1);

  auto* imp_check = prob->add_subcommand(
      "imp-check", "solvability verdict for prescribed marginals");
  imp_check->add_option("input", input, "measure + partitions JSON")
      ->required();
  imp_check->add_flag("--witnesses", opt.witnesses,
                      "include witnesses in the report");

  auto* imp_solve = prob->add_subcommand(
      "imp-solve", "construct a variable with prescribed marginals");
  imp_solve->add_option("input", input, "measure + partitions + targets JSON")
      ->required();

  std::string kind;
  double q = 0.5;
  Index n_atoms = 0;
  int step = 1;
  std::vector<Index> sweep;
  auto* tails = prob->add_subcommand(
      "tails", "tail ratio diagnostics and truncation sweeps");
  tails->add_option("input", input, "measure JSON (optional)");
  tails->add_option("--kind", kind, "geometric or power");
  tails->add_option("--q", q, "geometric ratio");
  tails->add_option("--N", n_atoms, "number of atoms")
      ->check(CLI::PositiveNumber);
  tails->add_option("--step", step, "tail ratio step")->check(CLI::PositiveNumber);
  tails->add_option("--sweep", sweep, "truncation sizes for the c_N sweep")
      ->delimiter(',');

  auto* interval = prob->add_subcommand(
      "interval", "reduce interval partitions to a discrete space");
  interval->add_option("input", input, "interval description JSON")
      ->required();

  auto* bickel = prob->add_subcommand(
      "bickel", "block-ratio alpha and the product-form construction");
  bickel->add_option("input", input, "measure + partitions (+ targets) JSON")
      ->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) opt.seed = seed_value;

  try {
    if (*analyze) return run_analyze(input, opt);
    if (*solve) return run_solve(input, targets_path, approx_eps,
                                 constructive, opt);
    if (*spectral) return run_spectral(input, opt);
    if (*riesz) return run_riesz(input, opt);
    if (*imp_check) return run_prob_imp_check(input, opt);
    if (*imp_solve) return run_prob_imp_solve(input, opt);
    if (*tails)
      return run_prob_tails(input, kind, q, n_atoms, step, sweep, opt);
    if (*interval) return run_prob_interval(input, opt);
    if (*bickel) return run_prob_bickel(input, opt);
  } catch (const ibap::RefusalError& e) {
    json out = ibap::io::refusal_to_json(e);
    stamp(out, opt);
    if (opt.format == "text") {
      std::cout << "refused: " << e.what() << "\n";
      for (const auto& [k, v] : e.details())
        std::cout << "  " << k << " = " << v << "\n";
    } else {
      emit(out);
    }
    return 2;
  } catch (const json::parse_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
