#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "ibap/prob.hpp"
#include "ibap/system.hpp"

namespace ibap::io {

// ordered_json keeps insertion order on emit, which together with the
// shortest-round-trip double formatting makes every emitted document a
// deterministic function of the parsed values.
using json = nlohmann::ordered_json;

inline double number_from(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (...) {
      throw std::invalid_argument(what + ": unreadable number '" + s + "'");
    }
    if (used != s.size())
      throw std::invalid_argument(what + ": unreadable number '" + s + "'");
    return v;
  }
  throw std::invalid_argument(what + ": expected a number");
}

inline Index index_from(const json& j, const std::string& what) {
  const double v = number_from(j, what);
  const Index n = static_cast<Index>(v);
  if (static_cast<double>(n) != v)
    throw std::invalid_argument(what + ": expected an integer");
  return n;
}

inline RealVector vector_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + ": expected an array");
  RealVector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i)
    v(i) = number_from(j[static_cast<std::size_t>(i)],
                       what + "[" + std::to_string(i) + "]");
  return v;
}

// Array of column vectors, every column of the stated length.
inline RealMatrix columns_from(const json& j, Index dim,
                               const std::string& what) {
  if (!j.is_array()) throw std::invalid_argument(what + ": expected an array");
  RealMatrix m(dim, static_cast<Index>(j.size()));
  for (Index c = 0; c < m.cols(); ++c) {
    const RealVector col = vector_from(j[static_cast<std::size_t>(c)],
                                       what + "[" + std::to_string(c) + "]");
    if (col.size() != dim)
      throw std::invalid_argument(what + ": column " + std::to_string(c) +
                                  " has length " + std::to_string(col.size()) +
                                  ", expected " + std::to_string(dim));
    m.col(c) = col;
  }
  return m;
}

inline InnerProduct space_from(const json& j) {
  if (!j.is_object() || !j.contains("dim"))
    throw std::invalid_argument("input needs a dim field");
  const Index d = index_from(j.at("dim"), "dim");
  if (j.contains("weights")) {
    const RealVector w = vector_from(j.at("weights"), "weights");
    if (w.size() != d)
      throw std::invalid_argument("weights length must equal dim");
    return InnerProduct::weighted(w);
  }
  return InnerProduct::identity(d);
}

// Subspaces arrive as spanning column lists.  Already-orthonormal columns
// are kept verbatim so that emitted documents parse back to themselves;
// anything else goes through orthonormalization.
inline SubspaceSystem<double> system_from(const json& j, Tolerance tol = {}) {
  const InnerProduct space = space_from(j);
  if (!j.contains("subspaces"))
    throw std::invalid_argument("input needs a subspaces field");
  const json& arr = j.at("subspaces");
  if (!arr.is_array() || arr.empty())
    throw std::invalid_argument("subspaces must be a nonempty array");
  std::vector<Subspace<double>> parts;
  parts.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const RealMatrix cols = columns_from(
        arr[i], space.dim(), "subspaces[" + std::to_string(i) + "]");
    try {
      parts.emplace_back(space, cols);
    } catch (const std::invalid_argument&) {
      parts.push_back(orthonormalize(space, cols, tol));
    }
  }
  return SubspaceSystem<double>(std::move(parts));
}

inline std::vector<RealVector> targets_from(const json& j, Index dim) {
  if (!j.contains("targets"))
    throw std::invalid_argument("input needs a targets field");
  const json& arr = j.at("targets");
  if (!arr.is_array()) throw std::invalid_argument("targets must be an array");
  std::vector<RealVector> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    RealVector t =
        vector_from(arr[i], "targets[" + std::to_string(i) + "]");
    if (t.size() != dim)
      throw std::invalid_argument("target " + std::to_string(i) +
                                  " has the wrong length");
    out.push_back(std::move(t));
  }
  return out;
}

inline RealMatrix operator_from(const json& j, Index dim,
                                const std::string& key = "operator") {
  if (!j.contains(key))
    throw std::invalid_argument("input needs an " + key + " field");
  const RealMatrix m = columns_from(j.at(key), dim, key);
  if (m.cols() != dim)
    throw std::invalid_argument(key + " must be square");
  return m;
}

inline std::vector<RealMatrix> families_from(const json& j, Index dim) {
  if (!j.contains("families"))
    throw std::invalid_argument("input needs a families field");
  const json& arr = j.at("families");
  if (!arr.is_array() || arr.empty())
    throw std::invalid_argument("families must be a nonempty array");
  std::vector<RealMatrix> out;
  for (std::size_t i = 0; i < arr.size(); ++i)
    out.push_back(
        columns_from(arr[i], dim, "families[" + std::to_string(i) + "]"));
  return out;
}

inline DiscreteProbabilitySpace measure_from(const json& j) {
  if (!j.contains("measure"))
    throw std::invalid_argument("input needs a measure field");
  const json& m = j.at("measure");
  if (!m.is_object() || !m.contains("kind"))
    throw std::invalid_argument("measure needs a kind field");
  const std::string kind = m.at("kind").get<std::string>();
  if (kind == "geometric")
    return geometric_space(number_from(m.at("q"), "measure.q"),
                           index_from(m.at("atoms"), "measure.atoms"));
  if (kind == "power")
    return power_space(index_from(m.at("atoms"), "measure.atoms"));
  if (kind == "explicit")
    return DiscreteProbabilitySpace(
        vector_from(m.at("masses"), "measure.masses"));
  throw std::invalid_argument("unknown measure kind '" + kind + "'");
}

// Partitions come either as explicit blocks or as starting points, both
// with one-based atom labels.
inline std::vector<PartitionSigmaAlgebra> partitions_from(const json& j,
                                                          Index n_atoms) {
  if (!j.contains("partitions"))
    throw std::invalid_argument("input needs a partitions field");
  const json& arr = j.at("partitions");
  if (!arr.is_array() || arr.empty())
    throw std::invalid_argument("partitions must be a nonempty array");
  std::vector<PartitionSigmaAlgebra> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& p = arr[i];
    const std::string what = "partitions[" + std::to_string(i) + "]";
    if (p.is_object() && p.contains("starts")) {
      std::vector<Index> starts;
      for (const json& s : p.at("starts"))
        starts.push_back(index_from(s, what + ".starts"));
      out.push_back(
          part_from_starting_points(n_atoms, std::move(starts)).alg);
    } else if (p.is_object() && p.contains("blocks")) {
      std::vector<std::vector<Index>> blocks;
      for (const json& b : p.at("blocks")) {
        std::vector<Index> block;
        for (const json& atom : b) {
          const Index label = index_from(atom, what + ".blocks");
          if (label < 1 || label > n_atoms)
            throw std::invalid_argument(what + ": atom labels are 1-based");
          block.push_back(label - 1);
        }
        blocks.push_back(std::move(block));
      }
      out.emplace_back(n_atoms, std::move(blocks));
    } else {
      throw std::invalid_argument(what + " needs blocks or starts");
    }
  }
  return out;
}

inline json to_json(const ExtendedReal& x) {
  return x.is_infinite ? json("infinity") : json(x.value);
}

inline json matrix_to_json(const RealMatrix& m) {
  json cols = json::array();
  for (Index c = 0; c < m.cols(); ++c) {
    json col = json::array();
    for (Index r = 0; r < m.rows(); ++r) col.push_back(m(r, c));
    cols.push_back(std::move(col));
  }
  return cols;
}

inline json vector_to_json(const RealVector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline json space_to_json(const InnerProduct& space) {
  json out;
  out["dim"] = space.dim();
  if (!space.is_identity()) out["weights"] = vector_to_json(space.weights());
  return out;
}

inline json system_to_json(const SubspaceSystem<double>& sys) {
  json out = space_to_json(sys.space());
  json subs = json::array();
  for (const auto& p : sys.parts()) subs.push_back(matrix_to_json(p.basis()));
  out["subspaces"] = std::move(subs);
  return out;
}

inline json report_to_json(const ConditionReport<double>& rep,
                           bool witnesses = false) {
  json out;
  out["format_version"] = 1;
  out["status"] = "ok";
  out["ibap"] = rep.ibap;
  out["verdicts"] = rep.verdicts;
  out["c"] = to_json(rep.c);
  out["lambda_min_gram"] = to_json(rep.lambda_min_gram);
  out["li_dim_gap"] = rep.li_dim_gap;
  out["sum_dim"] = rep.sum_dim;
  json incl = json::array();
  for (const auto& d : rep.inclinations) incl.push_back(to_json(d));
  out["inclinations"] = std::move(incl);
  out["cond9_dim"] = rep.cond9_dim;
  out["cond10_dims"] = rep.cond10_dims;
  out["flagged"] = rep.flagged;
  json band = json::array();
  for (const auto& e : rep.band) {
    json item;
    item["condition"] = e.condition;
    item["quantity"] = e.quantity;
    item["value"] = e.value;
    item["threshold"] = e.threshold;
    band.push_back(std::move(item));
  }
  out["band"] = std::move(band);
  out["closedness_note"] = rep.closedness_note;
  if (witnesses && rep.isomorphism) {
    json w;
    w["assembled"] = matrix_to_json(rep.isomorphism->assembled);
    w["block_sizes"] = rep.isomorphism->block_sizes;
    w["sigma_min"] = rep.isomorphism->sigma_min;
    w["sigma_max"] = rep.isomorphism->sigma_max;
    if (rep.metric) {
      w["w0"] = matrix_to_json(rep.metric->w0);
      w["equiv_lo"] = rep.metric->equiv_lo;
      w["equiv_hi"] = rep.metric->equiv_hi;
      w["max_cross"] = rep.metric->max_cross;
      w["positive_definite"] = rep.metric->positive_definite;
    }
    if (rep.projections) {
      json projs = json::array();
      for (const auto& e : rep.projections->projections)
        projs.push_back(matrix_to_json(e));
      w["projections"] = std::move(projs);
      w["complement_projection"] =
          matrix_to_json(rep.projections->complement_projection);
      w["projection_residual"] = rep.projections->max_residual;
    }
    out["witnesses"] = std::move(w);
  }
  return out;
}

inline json solution_to_json(const Solution<double>& sol) {
  json out;
  out["format_version"] = 1;
  out["status"] = "ok";
  out["x"] = vector_to_json(sol.x);
  out["residuals"] = sol.residuals;
  out["norm"] = sol.norm;
  out["lambda"] = sol.lambda;
  out["iterations"] = sol.iterations;
  return out;
}

inline json refusal_to_json(const RefusalError& e) {
  json out;
  out["format_version"] = 1;
  out["status"] = "refused";
  out["reason"] = e.what();
  json details;
  for (const auto& [k, v] : e.details()) details[k] = v;
  out["details"] = std::move(details);
  return out;
}

}  // namespace ibap::io
