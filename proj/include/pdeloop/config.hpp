#pragma once

// JSON run configuration: parsing, validation diagnostics and conversion to
// the library types.

#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "pdeloop/certificate.hpp"
#include "pdeloop/model.hpp"
#include "pdeloop/solvers.hpp"
#include "pdeloop/spectral.hpp"
#include "pdeloop/trajectory.hpp"

namespace pdeloop {

using json = nlohmann::json;

enum class Family { Chemical, LoopA, WaveKV, LoopB, Backstepping };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::Chemical: return "chemical";
    case Family::LoopA: return "loop_a";
    case Family::WaveKV: return "wave_kv";
    case Family::LoopB: return "loop_b";
    case Family::Backstepping: return "backstepping";
  }
  return "";
}

inline std::optional<Family> family_from_string(const std::string& s) {
  for (auto f : {Family::Chemical, Family::LoopA, Family::WaveKV, Family::LoopB, Family::Backstepping})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

inline bool is_loop_a_family(Family f) { return f == Family::Chemical || f == Family::LoopA || f == Family::WaveKV; }

struct ModelSpec {
  Family family = Family::LoopA;
  ChemicalParams chemical;
  LoopAParams loop_a;
  WaveKVParams wave_kv;
  LoopBParams loop_b;
  BacksteppingParams backstepping;

  /// Loop-A parameters of a loop-A family (after the physical or wave transform).
  LoopAParams as_loop_a() const {
    switch (family) {
      case Family::Chemical: return chemical_to_loop_a(chemical).params;
      case Family::LoopA: return loop_a;
      case Family::WaveKV: return kv_wave_to_loop_a(wave_kv).params;
      default: throw std::logic_error("model is not a loop-A family");
    }
  }
  LoopBParams as_loop_b() const {
    switch (family) {
      case Family::LoopB: return loop_b;
      case Family::Backstepping: return backstepping_to_loop_b(backstepping);
      default: throw std::logic_error("model is not a loop-B family");
    }
  }
};

/// Initial profile description; resolved against the model because some
/// kinds depend on it.
struct ProfileSpec {
  std::string kind = "zero";  // zero, constant, sine, linear, table, robin_mode, trace_constant
  double amplitude = 1.0;
  int mode = 1;
  double value = 0.0;
  double at0 = 0.0, at1 = 0.0;
  std::vector<double> values;
};

struct SolverSpec {
  std::string kind = "spectral";  // spectral, fd, picard
  int store_every = 1;
  double picard_window = 0.25;
};

struct GainCurveSpec {
  double s_min = -kPi * kPi / 2.0 + 0.1;
  double s_max = 3.0;
  int n_points = 201;
};

struct SweepSpec {
  std::string parameter;
  std::vector<double> values;
  bool simulate = false;
};

struct RunConfig {
  std::optional<std::string> command;
  std::string run_id = "run";
  ModelSpec model;
  Grid grid;
  int modes = 64;
  DisturbanceSpec disturbance;
  ProfileSpec u1_0{"sine"};
  ProfileSpec u2_0{"zero"};
  SolverSpec solver;
  Witness witness;
  GainCurveSpec gain_curve;
  std::optional<SweepSpec> sweep;
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c = {"certify", "simulate", "verify", "gain-curve", "sweep"};
  return c;
}

// ---------------------------------------------------------------------------
// Kernel and profile (de)serialization
// ---------------------------------------------------------------------------

inline Kernel kernel_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("kernel must be an object");
  const std::string kind = j.value("kind", "");
  if (kind == "expr") {
    if (!j.contains("name") || !j["name"].is_string()) throw std::invalid_argument("kernel expr needs a string 'name'");
    return Kernel::named(j["name"].get<std::string>(), j.value("scale", 1.0));
  }
  if (kind == "table") {
    if (!j.contains("grid_n") || !j.contains("values")) throw std::invalid_argument("kernel table needs grid_n and values");
    return Kernel::table(j["grid_n"].get<int>(), j["values"].get<std::vector<double>>());
  }
  throw std::invalid_argument("kernel kind must be 'expr' or 'table'");
}

inline json kernel_to_json(const Kernel& k) {
  switch (k.kind()) {
    case Kernel::Kind::Expr: return {{"kind", "expr"}, {"name", k.name()}, {"scale", k.scale()}};
    case Kernel::Kind::Table: return {{"kind", "table"}, {"grid_n", k.grid_n()}, {"values", k.values()}};
    case Kernel::Kind::Derived: return {{"kind", "derived"}, {"description", k.name()}};
  }
  return nullptr;
}

inline Profile make_profile(const ProfileSpec& s, const RunConfig& cfg, const Profile* partner = nullptr) {
  if (s.kind == "zero") return Profile::zero();
  if (s.kind == "constant") {
    const double v = s.value;
    return {[v](double) { return v; }, "constant"};
  }
  if (s.kind == "sine") return Profile::sine(s.amplitude, s.mode);
  if (s.kind == "linear") return Profile::linear(s.at0, s.at1);
  if (s.kind == "table") return Profile::table(s.values);
  if (s.kind == "robin_mode") {
    if (is_loop_a_family(cfg.model.family)) throw std::invalid_argument("robin_mode needs a loop-B model");
    const auto pb = cfg.model.as_loop_b();
    const auto w = robin_frequencies(pb.robin_q, s.mode).back();
    const double A = s.amplitude;
    return {[A, w](double z) { return A * std::sin(w * z); }, "robin_mode"};
  }
  if (s.kind == "trace_constant") {
    if (is_loop_a_family(cfg.model.family) || partner == nullptr)
      throw std::invalid_argument("trace_constant needs a loop-B model and u1 profile");
    const double v = cfg.model.as_loop_b().boundary_gain * (*partner)(1.0);
    return {[v](double) { return v; }, "trace_constant"};
  }
  throw std::invalid_argument("unknown profile kind '" + s.kind + "'");
}

struct InitialData {
  Profile u1;
  Profile u2;
};

inline InitialData make_initial_data(const RunConfig& cfg) {
  InitialData d;
  d.u1 = make_profile(cfg.u1_0, cfg);
  d.u2 = make_profile(cfg.u2_0, cfg, &d.u1);
  return d;
}

inline SimulationOptions make_simulation_options(const RunConfig& cfg) {
  SimulationOptions o;
  o.grid = cfg.grid;
  o.modes = cfg.modes;
  o.store_every = cfg.solver.store_every;
  return o;
}

// ---------------------------------------------------------------------------
// Parsing with diagnostics
// ---------------------------------------------------------------------------

namespace detail {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& diags) : diags_(diags) {}

  void unknown_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) diags_.push_back(fmt::format("{}.{}: unknown field", path, it.key()));
  }

  void number(const json& obj, const std::string& path, const char* key, double& out, bool required) {
    if (!obj.contains(key)) {
      if (required) diags_.push_back(fmt::format("{}.{}: required field missing", path, key));
      return;
    }
    const auto& v = obj[key];
    if (!v.is_number()) {
      diags_.push_back(fmt::format("{}.{}: expected a number", path, key));
      return;
    }
    out = v.get<double>();
    if (!std::isfinite(out)) diags_.push_back(fmt::format("{}.{}: must be finite", path, key));
  }

  void integer(const json& obj, const std::string& path, const char* key, int& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj[key];
    if (!v.is_number_integer()) {
      diags_.push_back(fmt::format("{}.{}: expected an integer", path, key));
      return;
    }
    out = v.get<int>();
  }

  void string(const json& obj, const std::string& path, const char* key, std::string& out, bool required) {
    if (!obj.contains(key)) {
      if (required) diags_.push_back(fmt::format("{}.{}: required field missing", path, key));
      return;
    }
    if (!obj[key].is_string()) {
      diags_.push_back(fmt::format("{}.{}: expected a string", path, key));
      return;
    }
    out = obj[key].get<std::string>();
  }

  bool object(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return false;
    if (!obj[key].is_object()) {
      diags_.push_back(fmt::format("{}.{}: expected an object", path, key));
      return false;
    }
    return true;
  }

  void kernel(const json& obj, const std::string& path, Kernel& out) {
    if (!obj.contains("kernel")) return;
    try {
      out = kernel_from_json(obj["kernel"]);
    } catch (const std::exception& e) {
      diags_.push_back(fmt::format("{}.kernel: {}", path, e.what()));
    }
  }

  void add(std::string d) { diags_.push_back(std::move(d)); }

 private:
  std::vector<std::string>& diags_;
};

inline void read_params(Reader& r, const json& p, ModelSpec& m) {
  const std::string path = "model.params";
  switch (m.family) {
    case Family::Chemical: {
      r.unknown_keys(p, path, {"porosity", "velocity", "diffusion", "sorption_rate", "desorption_rate", "length",
                               "source_conc"});
      auto& c = m.chemical;
      r.number(p, path, "porosity", c.porosity, false);
      r.number(p, path, "velocity", c.velocity, false);
      r.number(p, path, "diffusion", c.diffusion, false);
      r.number(p, path, "sorption_rate", c.sorption_rate, false);
      r.number(p, path, "desorption_rate", c.desorption_rate, false);
      r.number(p, path, "length", c.length, false);
      r.number(p, path, "source_conc", c.source_conc, false);
      break;
    }
    case Family::LoopA: {
      r.unknown_keys(p, path, {"K", "r", "a_tilde", "b_tilde"});
      auto& a = m.loop_a;
      r.number(p, path, "K", a.K, true);
      r.number(p, path, "r", a.r, true);
      r.number(p, path, "a_tilde", a.a_tilde, true);
      r.number(p, path, "b_tilde", a.b_tilde, true);
      break;
    }
    case Family::WaveKV: {
      r.unknown_keys(p, path, {"kv_sigma", "wave_speed", "viscous_mu"});
      auto& w = m.wave_kv;
      r.number(p, path, "kv_sigma", w.kv_sigma, true);
      r.number(p, path, "wave_speed", w.wave_speed, true);
      r.number(p, path, "viscous_mu", w.viscous_mu, true);
      break;
    }
    case Family::LoopB: {
      r.unknown_keys(p, path, {"diffusion", "transport_speed", "robin_q", "reaction", "boundary_gain", "kernel"});
      auto& b = m.loop_b;
      r.number(p, path, "diffusion", b.diffusion, true);
      r.number(p, path, "transport_speed", b.transport_speed, true);
      r.number(p, path, "robin_q", b.robin_q, true);
      r.number(p, path, "reaction", b.reaction, true);
      r.number(p, path, "boundary_gain", b.boundary_gain, true);
      r.kernel(p, path, b.kernel);
      break;
    }
    case Family::Backstepping: {
      r.unknown_keys(p, path, {"transport_v", "diffusion", "transport_c", "gain", "kernel"});
      auto& b = m.backstepping;
      r.number(p, path, "transport_v", b.transport_v, true);
      r.number(p, path, "diffusion", b.diffusion, true);
      r.number(p, path, "transport_c", b.transport_c, true);
      r.number(p, path, "gain", b.gain, true);
      r.kernel(p, path, b.kernel);
      break;
    }
  }
}

inline void read_profile(Reader& r, const json& obj, const std::string& path, ProfileSpec& s) {
  if (!obj.is_object()) {
    r.add(path + ": expected an object");
    return;
  }
  r.unknown_keys(obj, path, {"kind", "amplitude", "mode", "value", "at0", "at1", "values"});
  r.string(obj, path, "kind", s.kind, true);
  r.number(obj, path, "amplitude", s.amplitude, false);
  r.integer(obj, path, "mode", s.mode);
  r.number(obj, path, "value", s.value, false);
  r.number(obj, path, "at0", s.at0, false);
  r.number(obj, path, "at1", s.at1, false);
  if (obj.contains("values")) {
    try {
      s.values = obj["values"].get<std::vector<double>>();
    } catch (const std::exception&) {
      r.add(path + ".values: expected an array of numbers");
    }
  }
  static const std::set<std::string> kinds = {"zero",  "constant",   "sine",          "linear",
                                              "table", "robin_mode", "trace_constant"};
  if (!kinds.count(s.kind)) r.add(fmt::format("{}.kind: unknown profile kind '{}'", path, s.kind));
  if (s.mode < 1) r.add(path + ".mode: must be >= 1");
  if (s.kind == "table" && s.values.size() < 2) r.add(path + ".values: table needs at least 2 values");
}

}  // namespace detail

struct ParseResult {
  RunConfig config;
  std::vector<std::string> diagnostics;
};

/// Reads a configuration document; every problem found becomes a diagnostic
/// of the form "<field path>: <message>".
inline ParseResult parse_config(const json& doc) {
  ParseResult res;
  auto& cfg = res.config;
  detail::Reader r(res.diagnostics);
  if (!doc.is_object() || doc.empty()) {
    r.add("config: expected a non-empty JSON object");
    return res;
  }
  r.unknown_keys(doc, "config",
                 {"command", "run_id", "model", "grid", "disturbance", "initial", "solver", "witness", "gain_curve",
                  "sweep"});
  if (doc.contains("command")) {
    std::string c;
    r.string(doc, "config", "command", c, false);
    cfg.command = c;
  }
  r.string(doc, "config", "run_id", cfg.run_id, false);

  if (!r.object(doc, "config", "model")) {
    r.add("model: required block missing");
  } else {
    const auto& m = doc["model"];
    r.unknown_keys(m, "model", {"family", "params"});
    std::string fam;
    r.string(m, "model", "family", fam, true);
    if (auto f = family_from_string(fam)) {
      cfg.model.family = *f;
      if (r.object(m, "model", "params"))
        detail::read_params(r, m["params"], cfg.model);
      else if (cfg.model.family != Family::Chemical)
        r.add("model.params: required block missing");
    } else if (!fam.empty()) {
      r.add(fmt::format("model.family: unknown family '{}' (chemical, loop_a, wave_kv, loop_b, backstepping)", fam));
    }
  }

  if (r.object(doc, "config", "grid")) {
    const auto& g = doc["grid"];
    r.unknown_keys(g, "grid", {"n_z", "dt", "T", "modes"});
    r.integer(g, "grid", "n_z", cfg.grid.n_z);
    r.number(g, "grid", "dt", cfg.grid.dt, false);
    r.number(g, "grid", "T", cfg.grid.T, false);
    r.integer(g, "grid", "modes", cfg.modes);
  }

  if (r.object(doc, "config", "disturbance")) {
    const auto& d = doc["disturbance"];
    r.unknown_keys(d, "disturbance", {"kind", "amplitude", "angular_frequency", "phase", "rise_time"});
    std::string kind = "zero";
    r.string(d, "disturbance", "kind", kind, true);
    try {
      cfg.disturbance.kind = disturbance_kind_from_string(kind);
    } catch (const std::exception& e) {
      r.add(fmt::format("disturbance.kind: {}", e.what()));
    }
    r.number(d, "disturbance", "amplitude", cfg.disturbance.amplitude, false);
    r.number(d, "disturbance", "angular_frequency", cfg.disturbance.angular_frequency, false);
    r.number(d, "disturbance", "phase", cfg.disturbance.phase, false);
    r.number(d, "disturbance", "rise_time", cfg.disturbance.rise_time, false);
  }

  if (r.object(doc, "config", "initial")) {
    const auto& ini = doc["initial"];
    r.unknown_keys(ini, "initial", {"u1", "u2"});
    if (ini.contains("u1")) detail::read_profile(r, ini["u1"], "initial.u1", cfg.u1_0);
    if (ini.contains("u2")) detail::read_profile(r, ini["u2"], "initial.u2", cfg.u2_0);
  }

  if (r.object(doc, "config", "solver")) {
    const auto& s = doc["solver"];
    r.unknown_keys(s, "solver", {"kind", "store_every", "picard_window"});
    r.string(s, "solver", "kind", cfg.solver.kind, false);
    r.integer(s, "solver", "store_every", cfg.solver.store_every);
    r.number(s, "solver", "picard_window", cfg.solver.picard_window, false);
  }

  if (r.object(doc, "config", "witness")) {
    const auto& w = doc["witness"];
    r.unknown_keys(w, "witness", {"theta", "omega", "epsilon", "zeta"});
    for (auto [key, slot] : {std::pair{"theta", &cfg.witness.theta}, std::pair{"omega", &cfg.witness.omega},
                             std::pair{"epsilon", &cfg.witness.epsilon}, std::pair{"zeta", &cfg.witness.zeta}}) {
      if (!w.contains(key)) continue;
      double v = 0.0;
      r.number(w, "witness", key, v, false);
      *slot = v;
    }
  }

  if (r.object(doc, "config", "gain_curve")) {
    const auto& g = doc["gain_curve"];
    r.unknown_keys(g, "gain_curve", {"s_min", "s_max", "n_points"});
    r.number(g, "gain_curve", "s_min", cfg.gain_curve.s_min, false);
    r.number(g, "gain_curve", "s_max", cfg.gain_curve.s_max, false);
    r.integer(g, "gain_curve", "n_points", cfg.gain_curve.n_points);
  }

  if (r.object(doc, "config", "sweep")) {
    const auto& s = doc["sweep"];
    r.unknown_keys(s, "sweep", {"parameter", "values", "simulate"});
    SweepSpec sw;
    r.string(s, "sweep", "parameter", sw.parameter, true);
    if (s.contains("values") && s["values"].is_array()) {
      try {
        sw.values = s["values"].get<std::vector<double>>();
      } catch (const std::exception&) {
        r.add("sweep.values: expected an array of numbers");
      }
    } else {
      r.add("sweep.values: required array missing");
    }
    if (s.contains("simulate")) {
      if (s["simulate"].is_boolean())
        sw.simulate = s["simulate"].get<bool>();
      else
        r.add("sweep.simulate: expected a boolean");
    }
    cfg.sweep = sw;
  }
  return res;
}

/// Field names of the numeric parameters of a family, as accepted by sweeps.
inline std::vector<std::string> sweepable_parameters(Family f) {
  switch (f) {
    case Family::Chemical:
      return {"porosity", "velocity", "diffusion", "sorption_rate", "desorption_rate", "length", "source_conc"};
    case Family::LoopA: return {"K", "r", "a_tilde", "b_tilde"};
    case Family::WaveKV: return {"kv_sigma", "wave_speed", "viscous_mu"};
    case Family::LoopB: return {"diffusion", "transport_speed", "robin_q", "reaction", "boundary_gain"};
    case Family::Backstepping: return {"transport_v", "diffusion", "transport_c", "gain"};
  }
  return {};
}

inline void set_parameter(ModelSpec& m, const std::string& name, double v) {
  auto fail = [&] { throw std::invalid_argument("unknown parameter '" + name + "' for family " + to_string(m.family)); };
  switch (m.family) {
    case Family::Chemical: {
      auto& c = m.chemical;
      if (name == "porosity") c.porosity = v;
      else if (name == "velocity") c.velocity = v;
      else if (name == "diffusion") c.diffusion = v;
      else if (name == "sorption_rate") c.sorption_rate = v;
      else if (name == "desorption_rate") c.desorption_rate = v;
      else if (name == "length") c.length = v;
      else if (name == "source_conc") c.source_conc = v;
      else fail();
      break;
    }
    case Family::LoopA: {
      auto& a = m.loop_a;
      if (name == "K") a.K = v;
      else if (name == "r") a.r = v;
      else if (name == "a_tilde") a.a_tilde = v;
      else if (name == "b_tilde") a.b_tilde = v;
      else fail();
      break;
    }
    case Family::WaveKV: {
      auto& w = m.wave_kv;
      if (name == "kv_sigma") w.kv_sigma = v;
      else if (name == "wave_speed") w.wave_speed = v;
      else if (name == "viscous_mu") w.viscous_mu = v;
      else fail();
      break;
    }
    case Family::LoopB: {
      auto& b = m.loop_b;
      if (name == "diffusion") b.diffusion = v;
      else if (name == "transport_speed") b.transport_speed = v;
      else if (name == "robin_q") b.robin_q = v;
      else if (name == "reaction") b.reaction = v;
      else if (name == "boundary_gain") b.boundary_gain = v;
      else fail();
      break;
    }
    case Family::Backstepping: {
      auto& b = m.backstepping;
      if (name == "transport_v") b.transport_v = v;
      else if (name == "diffusion") b.diffusion = v;
      else if (name == "transport_c") b.transport_c = v;
      else if (name == "gain") b.gain = v;
      else fail();
      break;
    }
  }
}

/// Semantic checks of a parsed configuration for the given command: type
/// invariants, compatibility of initial and boundary data, and
/// command/model coherence. An empty result means the configuration is valid.
inline std::vector<std::string> validate(const RunConfig& cfg, const std::string& command) {
  std::vector<std::string> d;
  const bool known = std::find(known_commands().begin(), known_commands().end(), command) != known_commands().end();
  if (!known) d.push_back(fmt::format("command: unknown command '{}'", command));
  if (cfg.command && *cfg.command != command)
    d.push_back(fmt::format("command: config names '{}' but '{}' was requested", *cfg.command, command));

  const auto fam = cfg.model.family;
  auto check = [&](const char* path, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      d.push_back(fmt::format("{}: {}", path, e.what()));
    }
  };
  switch (fam) {
    case Family::Chemical: check("model.params", [&] { cfg.model.chemical.validate(); }); break;
    case Family::LoopA:
      check("model.params", [&] { cfg.model.loop_a.validate_finite(); });
      if (!(cfg.model.loop_a.b_tilde > 0.0))
        d.push_back("model.params.b_tilde: hypothesis of the loop-A stability result violated, need b_tilde > 0");
      break;
    case Family::WaveKV: check("model.params", [&] { cfg.model.wave_kv.validate(); }); break;
    case Family::LoopB: check("model.params", [&] { cfg.model.loop_b.validate(); }); break;
    case Family::Backstepping: check("model.params", [&] { cfg.model.backstepping.validate(); }); break;
  }

  const bool needs_run = command == "simulate" || command == "verify" ||
                         (command == "sweep" && cfg.sweep && cfg.sweep->simulate);
  if (needs_run) {
    check("grid", [&] { cfg.grid.validate(); });
    if (cfg.modes < 1) d.push_back("grid.modes: must be >= 1");
    if (cfg.solver.store_every < 1) d.push_back("solver.store_every: must be >= 1");
    if (cfg.solver.kind != "spectral" && cfg.solver.kind != "fd" && cfg.solver.kind != "picard")
      d.push_back(fmt::format("solver.kind: unknown solver '{}' (spectral, fd, picard)", cfg.solver.kind));
    if (!(cfg.solver.picard_window > 0.0)) d.push_back("solver.picard_window: must be > 0");
  }
  check("disturbance", [&] { make_disturbance(cfg.disturbance); });
  {
    if (d.empty()) {
      try {
        const auto ini = make_initial_data(cfg);
        if (is_loop_a_family(fam)) {
          const double d0 = make_disturbance(cfg.disturbance)(0.0);
          if (std::abs(ini.u1(0.0) - d0) > 1e-9 * std::max(1.0, std::abs(d0)))
            d.push_back(fmt::format("initial.u1: compatibility condition u1_0(0) = d(0) violated ({} vs {})",
                                    ini.u1(0.0), d0));
          if (std::abs(ini.u1(1.0)) > 1e-9)
            d.push_back(fmt::format("initial.u1: compatibility condition u1_0(1) = 0 violated (u1_0(1) = {})",
                                    ini.u1(1.0)));
        } else {
          const auto pb = cfg.model.as_loop_b();
          if (std::abs(ini.u1(0.0)) > 1e-9)
            d.push_back(fmt::format("initial.u1: compatibility condition u1_0(0) = 0 violated (u1_0(0) = {})",
                                    ini.u1(0.0)));
          const double target = pb.boundary_gain * ini.u1(1.0);
          if (std::abs(ini.u2(0.0) - target) > 1e-9 * std::max(1.0, std::abs(target)))
            d.push_back(fmt::format("initial.u2: compatibility condition u2_0(0) = k*u1_0(1) violated ({} vs {})",
                                    ini.u2(0.0), target));
          if (cfg.disturbance.kind != DisturbanceSpec::Kind::Zero && cfg.disturbance.amplitude != 0.0)
            d.push_back("disturbance: loop-B models take no boundary disturbance");
        }
      } catch (const std::exception& e) {
        d.push_back(fmt::format("initial: {}", e.what()));
      }
    }
  }
  if (command == "gain-curve") {
    const auto& g = cfg.gain_curve;
    if (!(g.s_max > g.s_min)) d.push_back("gain_curve: need s_min < s_max");
    if (g.n_points < 2) d.push_back("gain_curve.n_points: must be >= 2");
    if (g.s_min <= -kPi * kPi / 2.0) d.push_back("gain_curve.s_min: must exceed -pi^2/2 (g is undefined below)");
  }
  if (command == "sweep") {
    if (!cfg.sweep) {
      d.push_back("sweep: required block missing for the sweep command");
    } else {
      const auto names = sweepable_parameters(fam);
      if (std::find(names.begin(), names.end(), cfg.sweep->parameter) == names.end())
        d.push_back(fmt::format("sweep.parameter: '{}' is not a numeric parameter of family {}", cfg.sweep->parameter,
                                to_string(fam)));
      if (cfg.sweep->values.empty()) d.push_back("sweep.values: must not be empty");
    }
  }
  const auto& w = cfg.witness;
  if (w.epsilon && !(*w.epsilon > 0.0)) d.push_back("witness.epsilon: must be > 0");
  if (w.zeta && !(*w.zeta > 0.0)) d.push_back("witness.zeta: must be > 0");
  if (is_loop_a_family(fam) && w.theta && !(*w.theta > 0.0 && *w.theta < kPi / 2.0))
    d.push_back("witness.theta: must lie in (0, pi/2) for loop-A models");
  return d;
}

/// Parses the document and validates it for `command`.
inline std::vector<std::string> validate(const json& doc, const std::string& command) {
  auto res = parse_config(doc);
  if (!res.diagnostics.empty()) return res.diagnostics;
  return validate(res.config, command);
}

}  // namespace pdeloop
