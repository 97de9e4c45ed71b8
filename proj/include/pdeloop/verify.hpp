#pragma once

// Empirical checks of the stability estimates against simulated
// trajectories.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdeloop/certify.hpp"
#include "pdeloop/model.hpp"
#include "pdeloop/solvers.hpp"
#include "pdeloop/spectral.hpp"
#include "pdeloop/trajectory.hpp"

namespace pdeloop {

// ---------------------------------------------------------------------------
// Decay fitting
// ---------------------------------------------------------------------------

struct LogLinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double residual = 0.0;  // max |log y - fit|
  std::size_t samples = 0;
};

/// Least squares of log(max(y, 1e-300)) against t over samples with
/// t in [lo, hi].
inline LogLinearFit fit_log_linear(std::span<const double> t, std::span<const double> y, double lo, double hi) {
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (t[j] < lo || t[j] > hi) continue;
    const double ly = std::log(std::max(y[j], 1e-300));
    st += t[j];
    sy += ly;
    stt += t[j] * t[j];
    sty += t[j] * ly;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("fit_log_linear: fewer than 2 samples in window");
  LogLinearFit f;
  f.samples = n;
  const double nn = static_cast<double>(n);
  const double den = nn * stt - st * st;
  f.slope = den != 0.0 ? (nn * sty - st * sy) / den : 0.0;
  f.intercept = (sy - f.slope * st) / nn;
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (t[j] < lo || t[j] > hi) continue;
    f.residual = std::max(f.residual, std::abs(std::log(std::max(y[j], 1e-300)) - f.intercept - f.slope * t[j]));
  }
  return f;
}

struct DecayFit {
  double M_hat = 1.0;
  double delta_hat = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
  double residual = 0.0;
  std::size_t samples = 0;
};

/// Fits norm(t) ~ M e^{-delta t} norm(0). The sequence is first replaced by
/// its tail maximum max_{s >= t} norm(s) (a non-increasing envelope), a
/// log-linear least-squares fit on [window_start, window_end] gives delta
/// (the raw series is fitted instead when its slope is positive),
/// and M_hat >= 1 is the smallest scale for which
/// norm(t) <= M_hat e^{-delta t} norm(0) holds at every sample.
inline DecayFit fit_decay(std::span<const double> t, std::span<const double> norm, double window_start,
                          double window_end) {
  if (t.size() != norm.size() || t.empty()) throw std::invalid_argument("fit_decay: size mismatch");
  std::vector<double> env(norm.size());
  double run = 0.0;
  for (std::size_t j = norm.size(); j-- > 0;) {
    run = std::max(run, norm[j]);
    env[j] = run;
  }
  DecayFit d;
  d.window_start = window_start;
  d.window_end = window_end;
  // the tail maximum of a growing sequence is flat, so growth is read off the raw series
  const auto raw = fit_log_linear(t, norm, window_start, window_end);
  const auto f = raw.slope > 0.0 ? raw : fit_log_linear(t, env, window_start, window_end);
  if (f.samples < 20) throw std::invalid_argument("fit_decay: need at least 20 samples in the fit window");
  d.delta_hat = -f.slope;
  d.residual = f.residual;
  d.samples = f.samples;
  const double n0 = std::max(norm[0], 1e-300);
  for (std::size_t j = 0; j < t.size(); ++j)
    d.M_hat = std::max(d.M_hat, norm[j] * std::exp(d.delta_hat * t[j]) / n0);
  return d;
}

/// Default window: skip the first 10% of the horizon.
inline DecayFit fit_decay(std::span<const double> t, std::span<const double> norm) {
  if (t.empty()) throw std::invalid_argument("fit_decay: empty series");
  const double T = t.back();
  return fit_decay(t, norm, t.front() + 0.1 * (T - t.front()), T);
}

enum class NormKind { SumSup, SupU1, SupU2, WeightedU1, WeightedU2 };

inline std::vector<double> norm_series(const Trajectory& tr, NormKind kind) {
  switch (kind) {
    case NormKind::SumSup: return tr.sum_sup();
    case NormKind::SupU1: return tr.sup_u1;
    case NormKind::SupU2: return tr.sup_u2;
    case NormKind::WeightedU1: return tr.wnorm_u1;
    case NormKind::WeightedU2: return tr.wnorm_u2;
  }
  return {};
}

inline DecayFit fit_decay(const Trajectory& tr, NormKind kind = NormKind::SumSup) {
  const auto n = norm_series(tr, kind);
  return fit_decay(tr.t, n);
}

// ---------------------------------------------------------------------------
// ISS estimate checks
// ---------------------------------------------------------------------------

struct BoundReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_excess = 0.0;      // max(lhs - rhs), <= 0 when the bound holds
  double min_slack_ratio = 1.0; // min over samples of (rhs - lhs)/rhs, 1 when rhs = 0
};

namespace detail {
inline void accumulate_bound(BoundReport& r, double lhs, double rhs) {
  constexpr double rel = 1e-9, abs_tol = 1e-14;
  ++r.samples;
  const double excess = lhs - rhs;
  if (r.samples == 1 || excess > r.max_excess) r.max_excess = excess;
  if (excess > rel * std::abs(rhs) + abs_tol) ++r.violations;
  if (rhs > 0.0) r.min_slack_ratio = std::min(r.min_slack_ratio, (rhs - lhs) / rhs);
}
}  // namespace detail

/// sup|u1| + sup|u2| <= M e^{-delta t} (sup|u1_0| + sup|u2_0|) + gamma max_{s<=t}|d(s)|
/// at every stored sample. Loop B uses gamma = 0 and d = 0.
inline BoundReport check_iss_bound(const Trajectory& tr, double M, double delta, double gamma,
                                   const DisturbanceSignal& d) {
  if (tr.size() == 0) throw std::invalid_argument("check_iss_bound: empty trajectory");
  if (!std::isfinite(M) || !std::isfinite(delta) || !std::isfinite(gamma))
    throw std::invalid_argument("check_iss_bound: missing or non-finite constants");
  BoundReport r;
  const double n0 = tr.sup_u1[0] + tr.sup_u2[0];
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const double lhs = tr.sup_u1[j] + tr.sup_u2[j];
    const double rhs = M * std::exp(-delta * tr.t[j]) * n0 + gamma * d.running_max_abs(tr.t[j]);
    detail::accumulate_bound(r, lhs, rhs);
  }
  return r;
}

/// Weighted sup-norm estimate for the parabolic line of loop A viewed as a
/// Dirichlet problem with boundary datum d at z = 0, forcing f = r b u2:
///   |u1[t]|_eta <= max(e^{-sigma t}|u1_0|_eta, max|d|/sin(theta))
///                  + sigma^{-1} max_{s<=t} |f[s]|_eta,
/// with eta = sin(theta + (pi - 2 theta) z) and sigma = K + (pi - 2 theta)^2.
inline BoundReport check_weighted_parabolic_bound(const Trajectory& tr, const LoopAParams& pa, double theta,
                                                  const DisturbanceSignal& d) {
  if (tr.u1.size() != tr.size() || tr.u2.size() != tr.size())
    throw std::invalid_argument("check_weighted_parabolic_bound: trajectory needs full profiles");
  const WeightFunction eta = WeightFunction::loop_a(theta, pa.K);
  const double sigma = eta.sigma();
  if (!(sigma > 0.0)) throw std::invalid_argument("check_weighted_parabolic_bound: sigma must be > 0");
  // |b1 eta(0) + b2 eta'(0)| with b1 = -1, b2 = 0; the datum at z = 1 is zero
  const double left = eta(0.0);
  const double u0 = weighted_sup_norm(tr.u1[0], tr.z, eta);
  const double coupling = std::abs(pa.r * pa.b_tilde);
  BoundReport r;
  double fmax = 0.0;
  for (std::size_t j = 0; j < tr.size(); ++j) {
    fmax = std::max(fmax, coupling * weighted_sup_norm(tr.u2[j], tr.z, eta));
    const double lhs = weighted_sup_norm(tr.u1[j], tr.z, eta);
    const double rhs = std::max(std::exp(-sigma * tr.t[j]) * u0, d.running_max_abs(tr.t[j]) / left) + fmax / sigma;
    detail::accumulate_bound(r, lhs, rhs);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sharpness of the loop-A condition
// ---------------------------------------------------------------------------

struct SharpnessMode {
  double mu = 0.0;
  double mode_ratio = 0.0;  // a / (mu + b)
};

/// Largest root of (mu + pi^2 + K)(mu + b) = r b a. Requires r a >= K + pi^2.
inline SharpnessMode sharpness_mode(const LoopAParams& pa) {
  pa.validate();
  if (!(pa.coupling() >= pa.K + kPi * kPi))
    throw std::invalid_argument("sharpness_mode: requires r*a_tilde >= K + pi^2");
  const double B = kPi * kPi + pa.K + pa.b_tilde;
  const double C = pa.b_tilde * (kPi * kPi + pa.K - pa.coupling());
  const double D = std::sqrt(B * B - 4.0 * C);
  SharpnessMode m;
  m.mu = B > 0.0 ? -2.0 * C / (B + D) : 0.5 * (-B + D);
  m.mode_ratio = pa.a_tilde / (m.mu + pa.b_tilde);
  return m;
}

struct SharpnessReport {
  SharpnessMode mode;
  double max_rel_deviation = 0.0;  // max_j |sup u1(t_j) / (e^{mu t_j} sup u1(0)) - 1|
  double drift = 0.0;              // |sup u1(T)/sup u1(0) - 1|
  double fitted_growth = 0.0;      // log-linear slope of sup u1 over the whole run
  Trajectory trajectory;
};

inline SharpnessReport sharpness_probe(const LoopAParams& pa, const SimulationOptions& opts = {}) {
  SharpnessReport r;
  r.mode = sharpness_mode(pa);
  const double k = r.mode.mode_ratio;
  r.trajectory = simulate_loop_a(pa, Profile::sine(1.0), Profile::sine(k), DisturbanceSignal{}, opts);
  const auto& tr = r.trajectory;
  const double s0 = tr.sup_u1.front();
  for (std::size_t j = 0; j < tr.size(); ++j)
    r.max_rel_deviation = std::max(r.max_rel_deviation, std::abs(tr.sup_u1[j] / (std::exp(r.mode.mu * tr.t[j]) * s0) - 1.0));
  r.drift = std::abs(tr.sup_u1.back() / s0 - 1.0);
  r.fitted_growth = fit_log_linear(tr.t, tr.sup_u1, tr.t.front(), tr.t.back()).slope;
  return r;
}

// ---------------------------------------------------------------------------
// Delay independence
// ---------------------------------------------------------------------------

struct DelaySweepRow {
  double speed = 0.0;
  DecayFit fit;
};

/// Simulates loop B for each transport speed with the same initial data and
/// fits the decay of sup|u1| + sup|u2|.
inline std::vector<DelaySweepRow> delay_independence_sweep(LoopBParams pb, const std::vector<double>& speeds,
                                                           const Profile& u1_0, const Profile& u2_0,
                                                           const SimulationOptions& opts = {}) {
  std::vector<DelaySweepRow> rows;
  for (double c : speeds) {
    if (!(c > 0.0)) throw std::invalid_argument("delay_independence_sweep: speeds must be > 0");
    pb.transport_speed = c;
    const auto tr = simulate_loop_b(pb, u1_0, u2_0, opts);
    rows.push_back({c, fit_decay(tr)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Magnification of a boundary oscillation
// ---------------------------------------------------------------------------

struct MagnificationReport {
  double s = 0.0;                // (c^2 - mu sigma)/sigma^2
  double empirical_gain = 0.0;   // max over [T/2, T] of sup|u| / max|d|
  double g_bound = kInf;         // g(s)
  double gamma_certified = kInf; // loop-A disturbance coefficient, optimized
  double max_abs_d = 0.0;
};

/// Drives the Kelvin-Voigt string with d(t) = amplitude sin(angular_frequency t)
/// over a horizon T (original time) through its loop-A form and measures the
/// response in the second half of the run. Grid settings apply in the
/// rescaled time tau = sigma t; the horizon is rounded to whole steps.
inline MagnificationReport magnification_probe(const WaveKVParams& wp, double amplitude, double angular_frequency,
                                               double T, SimulationOptions opts = {}) {
  if (!check_wave_kv(wp).pass) throw std::invalid_argument("magnification_probe: Kelvin-Voigt condition fails");
  const auto w = kv_wave_to_loop_a(wp);
  MagnificationReport r;
  r.s = kv_parameter_s(wp);
  r.g_bound = gain_g(r.s).g_value;
  const auto opt = optimize_iss_loop_a(w.params);
  r.gamma_certified = opt.gamma;
  const double sigma = w.time_scale;
  opts.grid.T = std::max(1.0, std::round(sigma * T / opts.grid.dt)) * opts.grid.dt;
  const auto d = make_disturbance("sinusoid", amplitude, angular_frequency / sigma, 0.0);
  if (d.is_zero()) return r;
  const auto tr = simulate_loop_a(w.params, Profile::zero(), Profile::zero(), d, opts);
  const double half = 0.5 * opts.grid.T;
  double peak = 0.0;
  for (std::size_t j = 0; j < tr.size(); ++j) {
    if (tr.t[j] < half) continue;
    peak = std::max(peak, tr.sup_u1[j]);
  }
  r.max_abs_d = std::abs(amplitude);
  r.empirical_gain = peak / r.max_abs_d;
  return r;
}

}  // namespace pdeloop
