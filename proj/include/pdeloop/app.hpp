#pragma once

// Command runners behind the pdeloopgain tool.

#include <filesystem>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "pdeloop/certify.hpp"
#include "pdeloop/config.hpp"
#include "pdeloop/solvers.hpp"
#include "pdeloop/trajectory.hpp"
#include "pdeloop/verify.hpp"

namespace pdeloop {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitCertificate = 2, kExitViolation = 3 };

inline json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const Witness& w) {
  json j = json::object();
  j["theta"] = w.theta ? json(*w.theta) : json(nullptr);
  j["omega"] = w.omega ? json(*w.omega) : json(nullptr);
  j["epsilon"] = w.epsilon ? json(*w.epsilon) : json(nullptr);
  j["zeta"] = w.zeta ? json(*w.zeta) : json(nullptr);
  return j;
}

inline json to_json(const Certificate& c) {
  return {{"condition_id", to_string(c.condition)},
          {"lhs", finite_or_null(c.lhs)},
          {"rhs", finite_or_null(c.rhs)},
          {"margin", finite_or_null(c.margin)},
          {"witnesses", to_json(c.witness)},
          {"pass", c.pass},
          {"notes", c.notes}};
}

inline json to_json(const DecayFit& f) {
  return {{"M_hat", f.M_hat},           {"delta_hat", f.delta_hat}, {"window", {f.window_start, f.window_end}},
          {"residual", f.residual},     {"samples", f.samples}};
}

inline json to_json(const IssConstantsA& c) {
  json j = {{"theta", c.theta},
            {"epsilon", c.epsilon},
            {"zeta", c.zeta},
            {"sigma", c.sigma},
            {"L", finite_or_null(c.L)},
            {"L_signed", finite_or_null(c.L_signed)},
            {"gamma", finite_or_null(c.gamma)},
            {"ic_u1", finite_or_null(c.ic_u1)},
            {"ic_u2", finite_or_null(c.ic_u2)}};
  if (c.kv_gain) j["kv_gain"] = finite_or_null(*c.kv_gain);
  return j;
}

inline json to_json(const IssConstantsB& c) {
  return {{"theta", c.theta},
          {"omega", c.omega},
          {"epsilon", c.epsilon},
          {"sigma", c.sigma},
          {"B", c.B},
          {"eta1", c.eta1},
          {"product", finite_or_null(c.product)},
          {"coeff_u2", finite_or_null(c.coeff_u2)},
          {"exp_factor", c.exp_factor},
          {"coeff_u1", finite_or_null(c.coeff_u1)}};
}

inline json to_json(const BoundReport& r) {
  return {{"count", r.violations}, {"max_excess", r.max_excess}, {"samples", r.samples},
          {"min_slack_ratio", r.min_slack_ratio}};
}

inline json to_json(const LoopAParams& p) {
  return {{"K", p.K}, {"r", p.r}, {"a_tilde", p.a_tilde}, {"b_tilde", p.b_tilde}};
}

inline json to_json(const LoopBParams& p) {
  return {{"diffusion", p.diffusion}, {"transport_speed", p.transport_speed}, {"robin_q", p.robin_q},
          {"reaction", p.reaction},   {"boundary_gain", p.boundary_gain},     {"kernel", kernel_to_json(p.kernel)}};
}

/// Evaluated certificates of one model together with the derived constants.
struct CertificationReport {
  std::vector<Certificate> certificates;
  std::optional<IssConstantsA> loop_a_constants;
  std::optional<IssConstantsB> loop_b_constants;
  std::optional<double> p_max;
  std::optional<GainReport> gain;
  json extra = json::object();

  bool pass() const {
    return !certificates.empty() &&
           std::all_of(certificates.begin(), certificates.end(), [](const Certificate& c) { return c.pass; });
  }
};

namespace detail {

inline CertificationReport certify_loop_a(const LoopAParams& pa, const Witness& w, std::optional<double> kv_s) {
  CertificationReport r;
  r.certificates.push_back(check_loop_a(pa));
  IssConstantsA c;
  if (w.theta) {
    c = iss_constants_loop_a(pa, *w.theta, w.epsilon.value_or(0.05), w.zeta.value_or(0.05), kv_s);
  } else if (r.certificates.front().pass) {
    c = optimize_iss_loop_a(pa, IssObjective::Gamma, kv_s);
  } else {
    c = iss_constants_loop_a(pa, kPi / 4.0, w.epsilon.value_or(0.05), w.zeta.value_or(0.05), kv_s);
  }
  r.certificates.push_back(c.certificate());
  if (c.sigma > 0.0) {
    const auto eta = WeightFunction::loop_a(c.theta, pa.K);
    r.certificates.push_back(check_weight_assumption(SLSpec::loop_a(pa.K), eta, eta.sigma(), uniform_nodes(201)));
  }
  r.loop_a_constants = c;
  r.extra["loop_a_params"] = to_json(pa);
  return r;
}

inline CertificationReport certify_loop_b(const LoopBParams& pb, const Witness& w) {
  CertificationReport r;
  r.certificates.push_back(check_positive_spectrum(pb.diffusion, pb.reaction, pb.robin_q));
  Certificate gain;
  if (w.theta && w.omega) {
    gain = evaluate_small_gain_b(pb, *w.theta, *w.omega);
  } else {
    gain = find_theta_omega(pb).certificate;
  }
  r.certificates.push_back(gain);
  if (gain.witness.theta && gain.witness.omega &&
      theta_omega_admissible(pb.diffusion, pb.reaction, pb.robin_q, *gain.witness.theta, *gain.witness.omega)) {
    const double t = *gain.witness.theta, om = *gain.witness.omega;
    const auto eta = WeightFunction::loop_b(t, om, pb.diffusion, pb.reaction);
    r.certificates.push_back(check_weight_assumption(SLSpec::loop_b(pb.diffusion, pb.reaction, pb.robin_q), eta,
                                                     eta.sigma(), uniform_nodes(201)));
    r.loop_b_constants = iss_constants_loop_b(pb, t, om, w.epsilon.value_or(0.05));
  }
  r.extra["loop_b_params"] = to_json(pb);
  return r;
}

}  // namespace detail

inline CertificationReport certify_model(const ModelSpec& m, const Witness& w) {
  switch (m.family) {
    case Family::Chemical: {
      const auto mapped = chemical_to_loop_a(m.chemical);
      auto r = detail::certify_loop_a(mapped.params, w, std::nullopt);
      r.certificates.front().notes.push_back(
          mapped.coupling_dominated ? "r*a_tilde <= K holds for physical parameters" : "r*a_tilde > K");
      return r;
    }
    case Family::LoopA: return detail::certify_loop_a(m.loop_a, w, std::nullopt);
    case Family::WaveKV: {
      const double s = kv_parameter_s(m.wave_kv);
      auto r = detail::certify_loop_a(kv_wave_to_loop_a(m.wave_kv).params, w, s);
      r.certificates.insert(r.certificates.begin(), check_wave_kv(m.wave_kv));
      r.gain = gain_g(s);
      r.extra["time_scale"] = m.wave_kv.kv_sigma;
      return r;
    }
    case Family::LoopB: return detail::certify_loop_b(m.loop_b, w);
    case Family::Backstepping: {
      const auto dr = check_diffusion_robustness(m.backstepping);
      const auto pb = backstepping_to_loop_b(m.backstepping);
      Witness fixed = w;
      if (!fixed.theta || !fixed.omega) {
        fixed.theta = kPi / 2.0;
        fixed.omega = 0.0;
      }
      auto r = detail::certify_loop_b(pb, fixed);
      r.certificates.insert(r.certificates.begin(), dr.certificate);
      r.p_max = dr.p_max;
      return r;
    }
  }
  return {};
}

inline json to_json(const CertificationReport& r) {
  json j = {{"pass", r.pass()}, {"certificates", json::array()}};
  for (const auto& c : r.certificates) j["certificates"].push_back(to_json(c));
  if (r.loop_a_constants) j["iss_constants"] = to_json(*r.loop_a_constants);
  if (r.loop_b_constants) j["iss_constants"] = to_json(*r.loop_b_constants);
  if (r.p_max) j["p_max"] = finite_or_null(*r.p_max);
  if (r.gain)
    j["gain"] = {{"s", r.gain->s},
                 {"theta_star", r.gain->theta_star},
                 {"g", finite_or_null(r.gain->g_value)},
                 {"domain_empty", r.gain->domain_empty}};
  for (auto it = r.extra.begin(); it != r.extra.end(); ++it) j[it.key()] = it.value();
  return j;
}

/// Runs the configured solver on the configured model.
inline Trajectory simulate_config(const RunConfig& cfg, bool zero_disturbance = false) {
  const auto ini = make_initial_data(cfg);
  const auto opts = make_simulation_options(cfg);
  PicardOptions po;
  po.window = cfg.solver.picard_window;
  const auto& kind = cfg.solver.kind;
  Trajectory tr;
  if (is_loop_a_family(cfg.model.family)) {
    const auto pa = cfg.model.as_loop_a();
    const auto d = zero_disturbance ? DisturbanceSignal{} : make_disturbance(cfg.disturbance);
    if (kind == "fd") tr = fd_reference_loop_a(pa, ini.u1, ini.u2, d, opts);
    else if (kind == "picard") tr = picard_solve_loop_a(pa, ini.u1, ini.u2, d, opts, po);
    else tr = simulate_loop_a(pa, ini.u1, ini.u2, d, opts);
  } else {
    const auto pb = cfg.model.as_loop_b();
    if (kind == "fd") tr = fd_reference_loop_b(pb, ini.u1, ini.u2, opts);
    else if (kind == "picard") tr = picard_solve_loop_b(pb, ini.u1, ini.u2, opts, po);
    else tr = simulate_loop_b(pb, ini.u1, ini.u2, opts);
  }
  tr.metadata["family"] = to_string(cfg.model.family);
  tr.metadata["disturbance"] = zero_disturbance ? "zero" : to_string(cfg.disturbance.kind);
  return tr;
}

struct RunResult {
  int exit_code = kExitOk;
  std::vector<std::string> messages;
  std::vector<std::string> artifacts;
};

namespace detail {

inline void emit(RunResult& res, const std::filesystem::path& dir, const std::string& name, const std::string& text) {
  const auto path = dir / name;
  write_file(path.string(), text);
  res.artifacts.push_back(path.string());
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void write_trajectory(RunResult& res, const std::filesystem::path& dir, const Trajectory& tr,
                             bool full_profiles) {
  emit(res, dir, "trajectory.csv", trajectory_csv(tr));
  if (full_profiles) emit(res, dir, "profiles.csv", profiles_csv(tr));
}

inline json verify_config(const RunConfig& cfg, const CertificationReport& cert, bool& violation) {
  violation = false;
  json out = {{"run_id", cfg.run_id}, {"certificate", to_json(cert)}};
  const auto free_run = simulate_config(cfg, true);
  DecayFit fit;
  try {
    fit = fit_decay(free_run);
  } catch (const std::exception& e) {
    out["decay_fit"] = nullptr;
    out["notes"].push_back(fmt::format("decay fit unavailable: {}", e.what()));
    return out;
  }
  out["decay_fit"] = to_json(fit);
  const bool certified = cert.pass();
  if (certified && !(fit.delta_hat > 0.0)) {
    violation = true;
    out["notes"].push_back("falsification: certified model whose disturbance-free run does not decay");
  }
  if (!certified) {
    out["bound_violations"] = nullptr;
    out["notes"].push_back("not certified: estimate check skipped");
    return out;
  }
  if (is_loop_a_family(cfg.model.family)) {
    const auto d = make_disturbance(cfg.disturbance);
    const auto forced = simulate_config(cfg, false);
    const double gamma = cert.loop_a_constants->gamma;
    const auto rep = check_iss_bound(forced, fit.M_hat, fit.delta_hat, gamma, d);
    out["bound_violations"] = to_json(rep);
    out["gamma"] = gamma;
    const auto pa = cfg.model.as_loop_a();
    const auto weighted = check_weighted_parabolic_bound(forced, pa, cert.loop_a_constants->theta, d);
    out["weighted_bound_violations"] = to_json(weighted);
    violation = violation || rep.violations > 0 || weighted.violations > 0;
    if (cfg.model.family == Family::WaveKV && cfg.disturbance.kind == DisturbanceSpec::Kind::Sinusoid &&
        cfg.disturbance.amplitude != 0.0) {
      double peak = 0.0;
      for (std::size_t j = 0; j < forced.size(); ++j)
        if (forced.t[j] >= 0.5 * forced.t.back()) peak = std::max(peak, forced.sup_u1[j]);
      out["empirical_gain"] = peak / std::abs(cfg.disturbance.amplitude);
    }
  } else {
    const auto rep = check_iss_bound(free_run, fit.M_hat, fit.delta_hat, 0.0, DisturbanceSignal{});
    out["bound_violations"] = to_json(rep);
    violation = violation || rep.violations > 0;
  }
  return out;
}

inline std::string sweep_csv(const RunConfig& cfg) {
  const auto& sw = *cfg.sweep;
  std::string out = sw.simulate ? "value,pass,margin,delta_hat\n" : "value,pass,margin\n";
  for (double v : sw.values) {
    RunConfig point = cfg;
    set_parameter(point.model, sw.parameter, v);
    bool pass = false;
    double margin = -kInf;
    try {
      const auto rep = certify_model(point.model, point.witness);
      pass = rep.pass();
      margin = rep.certificates.front().margin;
    } catch (const std::exception&) {
      pass = false;
    }
    out += fmt::format("{:.16e},{},{:.16e}", v, pass ? 1 : 0, margin);
    if (sw.simulate) {
      double delta = std::numeric_limits<double>::quiet_NaN();
      try {
        delta = fit_decay(simulate_config(point, true)).delta_hat;
      } catch (const std::exception&) {
      }
      out += fmt::format(",{:.16e}", delta);
    }
    out += "\n";
  }
  return out;
}

}  // namespace detail

/// Executes `command` for a validated configuration, writing artifacts into
/// `out_dir`. Errors surface as exit code 1 with a message.
inline RunResult run(const RunConfig& cfg, const std::string& command, const std::string& out_dir,
                     bool full_profiles = false) {
  RunResult res;
  const auto diags = validate(cfg, command);
  if (!diags.empty()) {
    res.exit_code = kExitConfig;
    res.messages = diags;
    return res;
  }
  try {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    if (command == "certify") {
      const auto rep = certify_model(cfg.model, cfg.witness);
      detail::emit(res, dir, "certificate.json", detail::dump(to_json(rep)));
      if (!is_loop_a_family(cfg.model.family)) {
        const auto pb = cfg.model.as_loop_b();
        const auto es = EigenSystem::dirichlet_robin(pb.diffusion, pb.reaction, pb.robin_q, cfg.modes);
        detail::emit(res, dir, "eigensystem.csv", es.to_csv());
      }
      res.messages.push_back(rep.pass() ? "certificate: pass" : "certificate: fail");
      res.exit_code = rep.pass() ? kExitOk : kExitCertificate;
    } else if (command == "simulate") {
      const auto tr = simulate_config(cfg);
      detail::write_trajectory(res, dir, tr, full_profiles);
      res.messages.push_back(fmt::format("simulated {} samples, max boundary residual {:.3e}", tr.size(),
                                         tr.max_boundary_residual));
    } else if (command == "verify") {
      const auto rep = certify_model(cfg.model, cfg.witness);
      bool violation = false;
      const auto out = detail::verify_config(cfg, rep, violation);
      detail::emit(res, dir, "verify.json", detail::dump(out));
      res.messages.push_back(violation ? "verification: violation" : "verification: ok");
      res.exit_code = violation ? kExitViolation : kExitOk;
    } else if (command == "gain-curve") {
      const auto& g = cfg.gain_curve;
      const auto curve = gain_curve(g.s_min, g.s_max, g.n_points);
      detail::emit(res, dir, "gain_curve.csv", gain_curve_csv(curve));
      res.messages.push_back(fmt::format("minimum g = {:.10f} at s = {:.6f}; minimum at sample nearest 0: {}; "
                                         "monotone flanks: {}",
                                         curve.rows[curve.argmin].g_value, curve.rows[curve.argmin].s,
                                         curve.min_at_zero ? "yes" : "no", curve.monotone_flanks ? "yes" : "no"));
    } else if (command == "sweep") {
      detail::emit(res, dir, "sweep.csv", detail::sweep_csv(cfg));
    }
  } catch (const std::exception& e) {
    res.exit_code = kExitConfig;
    res.messages.push_back(fmt::format("error: {}", e.what()));
  }
  return res;
}

}  // namespace pdeloop
