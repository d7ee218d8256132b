#pragma once

// JSON forms of problems, graphs and weight matrices. Doubles go through
// nlohmann's shortest round-trip formatting, so reading back is exact.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "adast/errors.hpp"
#include "adast/problems.hpp"
#include "adast/topology.hpp"

namespace adast {

using json = nlohmann::json;

/// NaN and Inf become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

inline json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

inline Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw InvalidSpec("expected a JSON array for a vector");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw InvalidSpec("expected a JSON array of rows for a matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw InvalidSpec("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline json to_json(const QuadraticLocal& f) {
  return {{"B", to_json(f.B)}, {"A", to_json(f.A)}, {"C", to_json(f.C)},
          {"b", to_json(f.b)}, {"c", to_json(f.c)}};
}

inline QuadraticLocal local_from_json(const json& j) {
  return {matrix_from_json(j.at("B")), matrix_from_json(j.at("A")), matrix_from_json(j.at("C")),
          vector_from_json(j.at("b")), vector_from_json(j.at("c"))};
}

inline json to_json(const QuadraticMinimaxProblem& problem) {
  json locals = json::array();
  for (const auto& f : problem.locals()) locals.push_back(to_json(f));
  json out = {{"name", problem.name()},
              {"n", problem.n()},
              {"p", problem.p()},
              {"d", problem.d()},
              {"mu", number(problem.mu())},
              {"mu_local", number(problem.mu_local())},
              {"L", number(problem.smoothness())},
              {"locals", std::move(locals)}};
  out["seed"] = problem.seed ? json(*problem.seed) : json(nullptr);
  if (!problem.drawn_L.empty()) out["drawn_L"] = problem.drawn_L;
  return out;
}

inline QuadraticMinimaxProblem problem_from_json(const json& j) {
  std::vector<QuadraticLocal> locals;
  for (const auto& f : j.at("locals")) locals.push_back(local_from_json(f));
  QuadraticMinimaxProblem problem(std::move(locals), j.value("name", std::string("custom")));
  if (j.contains("seed") && !j["seed"].is_null()) problem.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("drawn_L")) problem.drawn_L = j["drawn_L"].get<std::vector<double>>();
  return problem;
}

inline json to_json(const ValidationReport& r) {
  json out = {{"pass", r.pass},
              {"max_row_deviation", number(r.max_row_deviation)},
              {"max_col_deviation", number(r.max_col_deviation)},
              {"min_entry", number(r.min_entry)}};
  out["violations"] = r.violations;
  return out;
}

inline json to_json(const Graph& g) {
  json edges = json::array();
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j : g.out[i]) edges.push_back({i, j});
  return {{"n", g.n}, {"edges", std::move(edges)}};
}

}  // namespace adast
