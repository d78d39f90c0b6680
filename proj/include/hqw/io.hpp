#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "hqw/common.hpp"
#include "hqw/graph.hpp"

namespace hqw::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

/// Maximum norm defect a parsed state may have and still be renormalized.
inline constexpr double kStateAcceptance = 1e-6;

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline Json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::InvalidInput, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
}

namespace detail {

inline const Json& field(const Json& j, const char* key, const std::string& where) {
  require(j.is_object() && j.contains(key), ErrorKind::InvalidInput,
          where + ": missing \"" + key + "\"");
  return j.at(key);
}

inline double number(const Json& j, const std::string& where) {
  require(j.is_number(), ErrorKind::InvalidInput, where + ": expected a number");
  const double x = j.get<double>();
  require(std::isfinite(x), ErrorKind::InvalidInput, where + ": non-finite number");
  return x;
}

inline std::size_t index(const Json& j, const std::string& where) {
  require(j.is_number_integer() && j.get<long long>() >= 0, ErrorKind::InvalidInput,
          where + ": expected a non-negative integer");
  return j.get<std::size_t>();
}

/// Reads `j` directly, or the file it names relative to `base`.
inline Json inline_or_file(const Json& j, const fs::path& base, fs::path* origin = nullptr) {
  if (!j.is_string()) {
    if (origin) *origin = base;
    return j;
  }
  const fs::path p = base / j.get<std::string>();
  if (origin) *origin = p.parent_path();
  return read_json(p);
}

}  // namespace detail

inline Vector parse_real_vector(const Json& j, const std::string& where) {
  require(j.is_array(), ErrorKind::InvalidInput, where + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = detail::number(j[i], where);
  return v;
}

inline Matrix parse_real_matrix(const Json& j, const std::string& where) {
  require(j.is_array() && !j.empty(), ErrorKind::InvalidInput, where + ": expected rows");
  const auto rows = j.size();
  const auto cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    require(j[r].is_array() && j[r].size() == cols, ErrorKind::InvalidInput,
            where + ": ragged row " + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = detail::number(j[r][c], where);
  }
  return m;
}

/// Complex entries as [re, im]; a bare number is accepted as real.
inline CVector parse_complex_vector(const Json& j, const std::string& where) {
  require(j.is_array() && !j.empty(), ErrorKind::InvalidInput, where + ": expected amplitudes");
  CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (e.is_number()) {
      v(i) = detail::number(e, where);
      continue;
    }
    require(e.is_array() && e.size() == 2, ErrorKind::InvalidInput,
            where + ": amplitude " + std::to_string(i) + " must be [re, im]");
    v(i) = Complex(detail::number(e[0], where), detail::number(e[1], where));
  }
  return v;
}

inline Json to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

/// {"vertices": n, "edges": [[a,b],...], "transition"?: rows, "measure"?: [...]}.
/// Without "transition" the simple random walk is used.
inline GraphModel parse_graph(const Json& j, const std::string& where = "graph") {
  const std::size_t n = detail::index(detail::field(j, "vertices", where), where + ".vertices");
  const Json& ej = detail::field(j, "edges", where);
  require(ej.is_array(), ErrorKind::InvalidInput, where + ".edges: expected an array");
  std::vector<Edge> edges;
  for (const auto& e : ej) {
    require(e.is_array() && e.size() == 2, ErrorKind::InvalidInput,
            where + ".edges: each edge is [a, b]");
    edges.push_back({detail::index(e[0], where), detail::index(e[1], where)});
  }
  std::optional<Matrix> p;
  std::optional<Vector> pi;
  if (j.contains("transition")) p = parse_real_matrix(j["transition"], where + ".transition");
  if (j.contains("measure")) pi = parse_real_vector(j["measure"], where + ".measure");
  GraphModel g(n, std::move(edges), std::move(p), std::move(pi));
  return g.transition() ? g : uniform_walk_transition(g);
}

struct ModelSpec {
  GraphModel global;
  std::vector<GraphModel> locals;
  std::optional<Vector> q;  // set when H is the complete graph with loops K̄
};

/// {"global": graph | path, "locals": [graph | path, ...]} or
/// {"q": [...], "locals": [...]} for H = K̄ with P[j][k] = q_k.
inline ModelSpec parse_model(const Json& j, const fs::path& base = ".") {
  const Json& lj = detail::field(j, "locals", "model");
  require(lj.is_array() && !lj.empty(), ErrorKind::InvalidInput, "model.locals: expected a list");
  std::vector<GraphModel> locals;
  for (std::size_t i = 0; i < lj.size(); ++i)
    locals.push_back(
        parse_graph(detail::inline_or_file(lj[i], base), "model.locals[" + std::to_string(i) + "]"));
  std::optional<Vector> q;
  if (j.contains("q")) q = parse_real_vector(j["q"], "model.q");
  if (j.contains("global"))
    return {parse_graph(detail::inline_or_file(j["global"], base), "model.global"),
            std::move(locals), std::move(q)};
  require(q.has_value(), ErrorKind::InvalidInput, "model: need \"global\" or \"q\"");
  return {complete_with_loops(*q), std::move(locals), std::move(q)};
}

inline ModelSpec load_model(const fs::path& path) {
  return parse_model(read_json(path), path.parent_path());
}

enum class Mode { General, Kbar };

/// Which operator drives each register in general mode.
enum class GlobalHamiltonian { Walk, Laplacian };           // I − 𝓛_H or 𝓛_H
enum class LocalHamiltonian { Laplacian, Walk };            // 𝓛_Gj or I − 𝓛_Gj
enum class LocalShift { None, Min, MaxReflect };

struct Scenario {
  explicit Scenario(ModelSpec m) : model(std::move(m)) {}

  ModelSpec model;
  Mode mode = Mode::General;
  std::optional<Vector> q;
  CVector psi_h;
  std::vector<CVector> psi_locals;
  std::vector<double> times;
  std::optional<double> p;
  GlobalHamiltonian global_hamiltonian = GlobalHamiltonian::Walk;
  LocalHamiltonian local_hamiltonian = LocalHamiltonian::Laplacian;
  LocalShift local_shift = LocalShift::None;
  std::vector<std::string> warnings;
};

namespace detail {

template <typename E>
E choose(const Json& j, const char* key, std::initializer_list<std::pair<const char*, E>> options,
         E fallback) {
  if (!j.contains(key)) return fallback;
  require(j[key].is_string(), ErrorKind::InvalidInput, std::string(key) + ": expected a string");
  const auto s = j[key].get<std::string>();
  for (const auto& [name, value] : options)
    if (s == name) return value;
  throw Error(ErrorKind::InvalidInput, std::string(key) + ": unknown value \"" + s + "\"");
}

/// Unit-normalizes within the acceptance band, noting a warning when rescaled.
inline CVector unit_state(CVector v, const std::string& name, std::vector<std::string>& warnings) {
  const double norm = v.norm();
  require(std::abs(norm - 1.0) <= kStateAcceptance, ErrorKind::NotNormalized,
          name + " has norm " + format_double(norm));
  if (std::abs(norm - 1.0) > 1e-12) {
    warnings.push_back(name + " renormalized (norm " + format_double(norm) + ")");
    v /= norm;
  }
  return v;
}

}  // namespace detail

inline Scenario parse_scenario(const Json& j, const fs::path& base = ".") {
  fs::path model_base;
  const Json model = detail::inline_or_file(detail::field(j, "model", "scenario"), base, &model_base);
  Scenario s(parse_model(model, model_base));
  s.mode = detail::choose(j, "mode", {{"general", Mode::General}, {"kbar", Mode::Kbar}},
                          Mode::General);
  if (j.contains("q")) s.q = parse_real_vector(j["q"], "scenario.q");
  if (!s.q) s.q = s.model.q;
  if (s.mode == Mode::Kbar) {
    require(s.q.has_value(), ErrorKind::InvalidInput, "kbar mode needs \"q\"");
    require(static_cast<std::size_t>(s.q->size()) == s.model.locals.size(),
            ErrorKind::DimensionMismatch, "q length differs from the number of local graphs");
    const Matrix expected = complete_with_loops(*s.q).transition().value();
    const auto& actual = s.model.global.transition().value();
    require(actual.rows() == expected.rows() && max_abs(Matrix(actual - expected)) <= 1e-12,
            ErrorKind::InvalidInput, "kbar mode: the global graph is not K̄ for this q");
  }

  s.psi_h = detail::unit_state(parse_complex_vector(detail::field(j, "psi_H", "scenario"), "psi_H"),
                               "psi_H", s.warnings);
  const Json& pl = detail::field(j, "psi_locals", "scenario");
  require(pl.is_array(), ErrorKind::InvalidInput, "psi_locals: expected a list");
  for (std::size_t i = 0; i < pl.size(); ++i) {
    const auto name = "psi_locals[" + std::to_string(i) + "]";
    s.psi_locals.push_back(detail::unit_state(parse_complex_vector(pl[i], name), name, s.warnings));
  }
  require(static_cast<std::size_t>(s.psi_h.size()) == s.model.global.vertex_count(),
          ErrorKind::DimensionMismatch, "psi_H length differs from |V(H)|");
  require(s.psi_locals.size() == s.model.locals.size(), ErrorKind::DimensionMismatch,
          "need one local state per local graph");
  for (std::size_t i = 0; i < s.psi_locals.size(); ++i)
    require(static_cast<std::size_t>(s.psi_locals[i].size()) == s.model.locals[i].vertex_count(),
            ErrorKind::DimensionMismatch,
            "psi_locals[" + std::to_string(i) + "] length differs from its graph");

  const Json& tj = detail::field(j, "times", "scenario");
  require(tj.is_array() && !tj.empty(), ErrorKind::InvalidInput, "times: expected a nonempty list");
  for (const auto& t : tj) s.times.push_back(detail::number(t, "times"));
  if (j.contains("p") && !j["p"].is_null()) s.p = detail::number(j["p"], "p");

  s.global_hamiltonian = detail::choose(
      j, "global_hamiltonian",
      {{"walk", GlobalHamiltonian::Walk}, {"laplacian", GlobalHamiltonian::Laplacian}},
      GlobalHamiltonian::Walk);
  s.local_hamiltonian = detail::choose(
      j, "local_hamiltonian",
      {{"laplacian", LocalHamiltonian::Laplacian}, {"walk", LocalHamiltonian::Walk}},
      LocalHamiltonian::Laplacian);
  s.local_shift = detail::choose(
      j, "local_shift",
      {{"none", LocalShift::None}, {"min", LocalShift::Min}, {"max_reflect", LocalShift::MaxReflect}},
      LocalShift::None);
  return s;
}

inline Scenario load_scenario(const fs::path& path) {
  return parse_scenario(read_json(path), path.parent_path());
}

}  // namespace hqw::io
