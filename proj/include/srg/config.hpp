#pragma once

#include "srg/hamiltonian.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace srg {

// Model configuration file, schema 1:
//
//   { "schema": 1,
//     "particle": { "preset": "two_level", "gap": 0.25, "dipole": 1.0 }
//               | { "preset": "trivial", "energy": 0.0 }
//               | { "matrix": [[...]], "position": [[...]] },   entries real or [re, im]
//     "coupling": { "type": "nelson", "kappa": { "preset": "sqrt_gauss", "sigma": 0.15 }, "g": 0.05, "mu": 0.5 },
//     "modes":    { "count": 24, "n_max": 2 } | { "momenta": [...], "weights": [...], "n_max": 2 },
//     "deform":   { "theta_re": 0.0, "theta_im": 0.3 },
//     "solver":   { "j": 1, "rho": 0, "L_max": 4, "tol": 1e-10, "max_iter": 50 },
//     "flow":     { "steps": 5, "rho": 0.25, "stable": true } }
//
// Only schema, particle, coupling and modes are required.

struct SolverSettings {
  int j = 0;
  double rho = 0.0;
  int L_max = 4;
  double tol = 1e-10;
  int max_iter = 50;
};

struct FlowSettings {
  int steps = 5;
  double rho = 0.25;
  bool stable = true;
};

struct ModelConfig {
  GHHamiltonian H;  // undeformed
  int n_max = 2;
  std::optional<cd> theta;
  SolverSettings solver;
  FlowSettings flow;
};

namespace detail {

inline void allow_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw config_error(where + " must be an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw config_error("unknown key '" + k + "' in " + where);
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error(std::string("bad value for '") + key + "'");
  }
}

template <class T>
T require(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw config_error("missing '" + std::string(key) + "' in " + where);
  return get_or<T>(j, key, T{});
}

inline Mat matrix_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw config_error(what + " must be a non-empty array of rows");
  int d = static_cast<int>(j.size());
  Mat M(d, d);
  for (int r = 0; r < d; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != d) throw config_error(what + " must be square");
    for (int c = 0; c < d; ++c) {
      const auto& e = j[r][c];
      if (e.is_number()) M(r, c) = e.get<double>();
      else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
        M(r, c) = cd(e[0].get<double>(), e[1].get<double>());
      else throw config_error(what + " entries must be numbers or [re, im]");
    }
  }
  return M;
}

inline ParticleModel particle_from_json(const nlohmann::json& j) {
  if (j.contains("matrix")) {
    allow_keys(j, "particle", {"matrix", "position"});
    Mat h = matrix_from_json(j.at("matrix"), "particle.matrix");
    Mat x = j.contains("position") ? matrix_from_json(j.at("position"), "particle.position") : Mat();
    if (x.size() && x.rows() != h.rows()) throw config_error("particle.position must match the matrix size");
    return make_particle(h, x);
  }
  std::string preset = require<std::string>(j, "preset", "particle");
  if (preset == "two_level") {
    allow_keys(j, "particle", {"preset", "gap", "dipole"});
    return two_level_particle(get_or(j, "gap", 0.25), get_or(j, "dipole", 1.0));
  }
  if (preset == "trivial") {
    allow_keys(j, "particle", {"preset", "energy"});
    return trivial_particle(get_or(j, "energy", 0.0));
  }
  throw config_error("unknown particle preset '" + preset + "'");
}

inline KappaSpec kappa_from_json(const nlohmann::json& j) {
  std::string preset = require<std::string>(j, "preset", "coupling.kappa");
  if (preset == "sqrt_gauss" || preset == "linear_gauss") {
    allow_keys(j, "coupling.kappa", {"preset", "sigma", "amplitude"});
    double s = get_or(j, "sigma", 0.3), a = get_or(j, "amplitude", 1.0);
    if (!(s > 0.0)) throw config_error("kappa sigma must be positive");
    return preset == "sqrt_gauss" ? kappa_sqrt_gauss(s, a) : kappa_linear_gauss(s, a);
  }
  if (preset == "const") {
    allow_keys(j, "coupling.kappa", {"preset", "value"});
    return kappa_const(get_or(j, "value", 1.0));
  }
  throw config_error("unknown kappa preset '" + preset + "'");
}

inline ModeSet modes_from_json(const nlohmann::json& j) {
  if (j.contains("momenta")) {
    allow_keys(j, "modes", {"momenta", "weights", "n_max"});
    auto k = require<std::vector<double>>(j, "momenta", "modes");
    auto w = require<std::vector<double>>(j, "weights", "modes");
    if (k.size() != w.size()) throw config_error("modes.momenta and modes.weights differ in length");
    return explicit_modes(k, w);
  }
  allow_keys(j, "modes", {"count", "n_max"});
  int count = require<int>(j, "count", "modes");
  if (count < 1 || count > 64) throw config_error("modes.count must lie in [1, 64]");
  return gauss_modes(count);
}

} // namespace detail

inline ModelConfig parse_model_config(const nlohmann::json& j) {
  using namespace detail;
  allow_keys(j, "config", {"schema", "particle", "coupling", "modes", "deform", "solver", "flow"});
  if (!j.contains("schema") || !j.at("schema").is_number_integer() || j.at("schema").get<int>() != 1)
    throw config_error("config must declare \"schema\": 1");
  for (const char* k : {"particle", "coupling", "modes"})
    if (!j.contains(k)) throw config_error(std::string("missing '") + k + "' section");
  ModelConfig c;
  ParticleModel p = particle_from_json(j.at("particle"));

  const auto& cj = j.at("coupling");
  allow_keys(cj, "coupling", {"type", "kappa", "g", "mu"});
  std::string type = get_or<std::string>(cj, "type", "nelson");
  if (type == "custom") throw config_error("custom couplings are available through the library API only");
  if (type != "nelson") throw config_error("unknown coupling type '" + type + "'");
  if (!cj.contains("kappa")) throw config_error("missing 'kappa' in coupling");
  KappaSpec kappa = kappa_from_json(cj.at("kappa"));

  const auto& mj = j.at("modes");
  ModeSet modes = modes_from_json(mj);
  c.n_max = get_or(mj, "n_max", 2);
  if (c.n_max < 0 || c.n_max > 16) throw config_error("modes.n_max must lie in [0, 16]");
  c.H = build_nelson(p, kappa, get_or(cj, "g", 0.0), get_or(cj, "mu", 0.5), modes);

  if (j.contains("deform")) {
    const auto& dj = j.at("deform");
    allow_keys(dj, "deform", {"theta_re", "theta_im"});
    cd th(get_or(dj, "theta_re", 0.0), get_or(dj, "theta_im", 0.0));
    if (th != cd(0.0)) c.theta = th;
  }
  if (j.contains("solver")) {
    const auto& sj = j.at("solver");
    allow_keys(sj, "solver", {"j", "rho", "L_max", "tol", "max_iter"});
    c.solver.j = get_or(sj, "j", 0);
    c.solver.rho = get_or(sj, "rho", 0.0);
    c.solver.L_max = get_or(sj, "L_max", 4);
    c.solver.tol = get_or(sj, "tol", 1e-10);
    c.solver.max_iter = get_or(sj, "max_iter", 50);
    if (c.solver.L_max < 1 || c.solver.L_max > 8) throw config_error("solver.L_max must lie in [1, 8]");
  }
  if (j.contains("flow")) {
    const auto& fj = j.at("flow");
    allow_keys(fj, "flow", {"steps", "rho", "stable"});
    c.flow.steps = get_or(fj, "steps", 5);
    c.flow.rho = get_or(fj, "rho", 0.25);
    c.flow.stable = get_or(fj, "stable", true);
    if (c.flow.steps < 0 || c.flow.steps > 50) throw config_error("flow.steps must lie in [0, 50]");
  }
  return c;
}

inline ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error(std::string("malformed JSON: ") + e.what());
  }
  return parse_model_config(j);
}

inline nlohmann::json complex_json(cd z) { return {{"re", z.real()}, {"im", z.imag()}}; }

} // namespace srg
