#pragma once

// Small-gain certificates, the magnification curve g(s) and explicit ISS
// constants for both loops.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include "pdeloop/certificate.hpp"
#include "pdeloop/model.hpp"
#include "pdeloop/numerics.hpp"
#include "pdeloop/spectral.hpp"

namespace pdeloop {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

/// Golden-section style 1-D minimization (Brent) returning (argmin, value).
template <typename F>
std::pair<double, double> brent_min(F&& f, double lo, double hi) {
  const auto r = boost::math::tools::brent_find_minima(
      [&](double x) {
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
      },
      lo, hi, 52);
  return {r.first, f(r.first)};
}

/// Coarse scan on `n` interior points of (lo, hi) followed by Brent on the
/// bracket around the best sample.
template <typename F>
std::pair<double, double> scan_then_refine(F&& f, double lo, double hi, int n) {
  const double h = (hi - lo) / (n + 1);
  int best = -1;
  double best_v = kInf;
  for (int i = 1; i <= n; ++i) {
    const double v = f(lo + i * h);
    if (v < best_v) {
      best_v = v;
      best = i;
    }
  }
  if (best < 0) return {0.5 * (lo + hi), kInf};
  const double a = lo + (best - 1) * h, b = lo + (best + 1) * h;
  auto [x, v] = brent_min(f, a, b);
  if (v <= best_v) return {x, v};
  return {lo + best * h, best_v};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Loop A and Kelvin-Voigt conditions
// ---------------------------------------------------------------------------

inline Certificate check_loop_a(const LoopAParams& pa) {
  pa.validate_finite();
  auto c = Certificate::strict(ConditionId::LoopACoupling, std::abs(pa.coupling()), pa.K + kPi * kPi);
  if (!(pa.b_tilde > 0.0)) {
    c.notes.push_back("hypothesis violated: b_tilde > 0");
    c.pass = false;
  }
  return c;
}

inline Certificate check_wave_kv(const WaveKVParams& wp) {
  wp.validate();
  const double s = wp.kv_sigma, c = wp.wave_speed;
  return Certificate::strict(ConditionId::KelvinVoigt, 2.0 * c * c, 2.0 * wp.viscous_mu * s + s * s * kPi * kPi);
}

// ---------------------------------------------------------------------------
// Loop B conditions
// ---------------------------------------------------------------------------

inline Certificate check_positive_spectrum(double p, double a, double q) {
  const double b1 = robin_offsets(q, 1).front();
  auto c = Certificate::strict(ConditionId::PositiveSpectrum, 4.0 * a, p * (kPi - 2.0 * b1) * (kPi - 2.0 * b1));
  c.notes.push_back(fmt::format("b_1 = {:.16e}", b1));
  return c;
}

/// |k| * int_0^1 |b(z,s)| ds sampled on a uniform z grid; the input of the
/// weighted small-gain condition.
struct KernelRowBound {
  std::vector<double> z;
  std::vector<double> values;

  static KernelRowBound from_kernel(double k, const Kernel& b, int z_points = 201, int panels = 8) {
    KernelRowBound r;
    r.z = uniform_nodes(z_points);
    const CompositeGauss rule(panels);
    for (double zi : r.z) r.values.push_back(std::abs(k) * kernel_abs_row_integral(b, zi, rule));
    return r;
  }
  static KernelRowBound from_function(const std::function<double(double)>& f, int z_points = 201) {
    KernelRowBound r;
    r.z = uniform_nodes(z_points);
    for (double zi : r.z) r.values.push_back(f(zi));
    return r;
  }
  bool is_zero() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
  }
};

inline bool theta_omega_admissible(double p, double a, double q, double theta, double omega) {
  if (!(theta > 0.0 && theta < kPi)) return false;
  if (!(omega >= 0.0 && theta + omega < kPi)) return false;
  if (!(p * omega * omega > a)) return false;
  return omega / std::tan(omega + theta) > q;
}

/// Weighted small-gain condition at a given witness:
///   |k| max_z (sin(omega+theta)/sin(omega z+theta)) int|b(z,s)|ds < p omega^2 - a.
/// An inadmissible witness yields a failing certificate with a note.
inline Certificate evaluate_small_gain_b(double p, double a, double q, const KernelRowBound& rows, double theta,
                                         double omega) {
  const double eta1 = std::sin(omega + theta);
  double lhs = 0.0;
  for (std::size_t i = 0; i < rows.z.size(); ++i)
    lhs = std::max(lhs, eta1 / std::sin(omega * rows.z[i] + theta) * rows.values[i]);
  auto c = Certificate::strict(ConditionId::LoopBSmallGain, lhs, p * omega * omega - a);
  c.witness.theta = theta;
  c.witness.omega = omega;
  if (!theta_omega_admissible(p, a, q, theta, omega)) {
    c.pass = false;
    c.notes.push_back("witness outside the admissible set: need theta in (0,pi), omega in [0,pi-theta), "
                      "p*omega^2 > a, omega*cot(omega+theta) > q");
  }
  return c;
}

inline Certificate evaluate_small_gain_b(const LoopBParams& pb, double theta, double omega) {
  return evaluate_small_gain_b(pb.diffusion, pb.reaction, pb.robin_q,
                               KernelRowBound::from_kernel(pb.boundary_gain, pb.kernel), theta, omega);
}

struct ThetaOmegaSearch {
  std::optional<double> theta;
  std::optional<double> omega;
  Certificate certificate;
};

/// Searches the admissible (theta, omega) set for the witness maximizing the
/// weighted small-gain margin: a 401 x 401 grid over theta in (0,pi) and
/// omega in [0,pi), two rounds of local refinement, plus seeds just below the
/// first Robin frequency with small theta.
inline ThetaOmegaSearch find_theta_omega(double p, double a, double q, const KernelRowBound& rows) {
  const std::size_t nz = rows.z.size();
  double best_margin = -kInf, best_t = 0.0, best_w = 0.0;
  bool found = false;

  auto consider = [&](double t, double w, double margin) {
    if (margin > best_margin) {
      best_margin = margin;
      best_t = t;
      best_w = w;
      found = true;
    }
  };

  // margin at a batch of omegas for one theta, using precomputed sin/cos(omega z)
  auto scan = [&](const std::vector<double>& thetas, const std::vector<double>& omegas) {
    std::vector<double> S(omegas.size() * nz), C(omegas.size() * nz);
    for (std::size_t j = 0; j < omegas.size(); ++j)
      for (std::size_t i = 0; i < nz; ++i) {
        S[j * nz + i] = std::sin(omegas[j] * rows.z[i]);
        C[j * nz + i] = std::cos(omegas[j] * rows.z[i]);
      }
    for (double t : thetas) {
      const double st = std::sin(t), ct = std::cos(t);
      for (std::size_t j = 0; j < omegas.size(); ++j) {
        const double w = omegas[j];
        if (!theta_omega_admissible(p, a, q, t, w)) continue;
        const double eta1 = std::sin(w + t);
        double lhs = 0.0;
        for (std::size_t i = 0; i < nz; ++i) {
          const double eta = S[j * nz + i] * ct + C[j * nz + i] * st;
          lhs = std::max(lhs, rows.values[i] / eta);
        }
        consider(t, w, p * w * w - a - eta1 * lhs);
      }
    }
  };

  constexpr int n = 401;
  std::vector<double> thetas, omegas;
  for (int i = 1; i <= n; ++i) thetas.push_back(i * kPi / (n + 1));
  for (int j = 0; j < n; ++j) omegas.push_back(j * kPi / n);
  scan(thetas, omegas);

  const double w1 = robin_frequencies(q, 1).front();
  for (double shrink : {1e-1, 1e-2, 1e-3})
    for (double frac : {1e-1, 1e-2, 1e-3, 1e-4}) scan({frac * w1}, {w1 * (1.0 - shrink)});
  scan({kPi / 2.0}, {0.0});

  if (found) {
    double dt = kPi / (n + 1), dw = kPi / n;
    for (int round = 0; round < 2; ++round) {
      std::vector<double> tl, wl;
      for (int i = -20; i <= 20; ++i) {
        const double t = best_t + i * dt / 20.0;
        if (t > 0.0 && t < kPi) tl.push_back(t);
        const double w = best_w + i * dw / 20.0;
        if (w >= 0.0) wl.push_back(w);
      }
      scan(tl, wl);
      dt /= 20.0;
      dw /= 20.0;
    }
  }

  ThetaOmegaSearch out;
  if (!found) {
    out.certificate = Certificate::strict(ConditionId::LoopBSmallGain, kInf, -kInf);
    out.certificate.pass = false;
    out.certificate.notes.push_back("no admissible (theta, omega) found");
    return out;
  }
  out.theta = best_t;
  out.omega = best_w;
  out.certificate = evaluate_small_gain_b(p, a, q, rows, best_t, best_w);
  return out;
}

inline ThetaOmegaSearch find_theta_omega(const LoopBParams& pb) {
  return find_theta_omega(pb.diffusion, pb.reaction, pb.robin_q,
                          KernelRowBound::from_kernel(pb.boundary_gain, pb.kernel));
}

struct DiffusionRobustness {
  Certificate certificate;
  double p_max = kInf;
};

/// 2p sqrt(|k| max_z int|l(z,s)|ds) < v, and the largest diffusion p for
/// which it holds.
inline DiffusionRobustness check_diffusion_robustness(const BacksteppingParams& bp) {
  bp.validate();
  const double m = std::abs(bp.gain) * kernel_abs_row_max(bp.kernel);
  DiffusionRobustness out;
  out.certificate = Certificate::strict(ConditionId::DiffusionRobustness, 2.0 * bp.diffusion * std::sqrt(m),
                                        bp.transport_v);
  out.p_max = m > 0.0 ? bp.transport_v / (2.0 * std::sqrt(m)) : kInf;
  return out;
}

/// Assumption-style weight check packaged as a certificate.
inline Certificate check_weight_assumption(const SLSpec& sl, const WeightFunction& eta, double sigma,
                                           std::span<const double> z) {
  return check_H4(sl, eta, sigma, z).certificate;
}

// ---------------------------------------------------------------------------
// Magnification curve
// ---------------------------------------------------------------------------

/// P(theta) = |sigma mu - c^2| / (sigma mu - c^2 + sigma^2 (pi - 2 theta)^2).
inline double gain_P(double theta, const WaveKVParams& wp) {
  const double s = wp.kv_sigma;
  const double num = s * wp.viscous_mu - wp.wave_speed * wp.wave_speed;
  const double den = num + s * s * (kPi - 2.0 * theta) * (kPi - 2.0 * theta);
  if (!(den > 0.0)) throw std::domain_error("gain_P: theta outside the usable range (denominator <= 0)");
  return std::abs(num) / den;
}

/// P in terms of s = (c^2 - mu sigma)/sigma^2: |s| / ((pi - 2 theta)^2 - s).
/// Returns +inf where the denominator is not positive.
inline double gain_P_s(double theta, double s) {
  const double den = (kPi - 2.0 * theta) * (kPi - 2.0 * theta) - s;
  if (!(den > 0.0)) return kInf;
  return std::abs(s) / den;
}

inline double kv_parameter_s(const WaveKVParams& wp) {
  return (wp.wave_speed * wp.wave_speed - wp.viscous_mu * wp.kv_sigma) / (wp.kv_sigma * wp.kv_sigma);
}

struct GainReport {
  double s = 0.0;
  double theta_star = 0.0;
  double g_value = kInf;
  bool finite = false;
  bool domain_empty = false;
};

/// Upper end of the theta interval of g: (pi - sqrt(|s| - s))/2.
inline double gain_theta_max(double s) { return 0.5 * (kPi - std::sqrt(std::abs(s) - s)); }

/// Objective of g at theta; +inf where P >= 1 or P is undefined.
inline double gain_objective(double theta, double s) {
  const double P = gain_P_s(theta, s);
  if (!(P < 1.0)) return kInf;
  const double r = 1.0 - std::sqrt(P);
  return 1.0 / (std::sin(theta) * r * r);
}

inline GainReport gain_g(double s) {
  GainReport g;
  g.s = s;
  if (std::abs(s) - s >= kPi * kPi) {
    g.domain_empty = true;
    return g;
  }
  const double hi = gain_theta_max(s);
  auto [theta, value] = detail::scan_then_refine([s](double t) { return gain_objective(t, s); }, 0.0, hi, 2000);
  g.theta_star = theta;
  g.g_value = value;
  g.finite = std::isfinite(value);
  g.domain_empty = !g.finite;
  return g;
}

struct GainCurve {
  std::vector<GainReport> rows;
  bool min_at_zero = false;
  bool monotone_flanks = false;
  std::size_t argmin = 0;
};

/// Samples g on n_points uniform values of s. Checks that the minimum sits
/// at the sample nearest 0 and that g does not decrease away from it.
inline GainCurve gain_curve(double s_min, double s_max, int n_points) {
  if (n_points < 2 || !(s_max > s_min)) throw std::invalid_argument("gain_curve: need s_min < s_max and n >= 2");
  GainCurve c;
  std::vector<double> grid(static_cast<std::size_t>(n_points));
  std::size_t nearest = 0;
  for (int i = 0; i < n_points; ++i) {
    grid[i] = s_min + (s_max - s_min) * i / (n_points - 1);
    if (std::abs(grid[i]) < std::abs(grid[nearest])) nearest = static_cast<std::size_t>(i);
  }
  // g has a cusp at 0; put that sample exactly on 0 when the range contains it.
  if (s_min <= 0.0 && s_max >= 0.0) grid[nearest] = 0.0;
  for (double s : grid) c.rows.push_back(gain_g(s));
  for (std::size_t i = 0; i < c.rows.size(); ++i)
    if (c.rows[i].g_value < c.rows[c.argmin].g_value) c.argmin = i;
  c.min_at_zero = c.rows[c.argmin].g_value >= c.rows[nearest].g_value;
  constexpr double tol = 1e-12;
  bool mono = true;
  for (std::size_t i = nearest; i + 1 < c.rows.size(); ++i)
    mono = mono && c.rows[i + 1].g_value >= c.rows[i].g_value * (1.0 - tol);
  for (std::size_t i = nearest; i > 0; --i)
    mono = mono && c.rows[i - 1].g_value >= c.rows[i].g_value * (1.0 - tol);
  c.monotone_flanks = mono;
  return c;
}

inline std::string gain_curve_csv(const GainCurve& c) {
  std::string out = "s,g\n";
  for (const auto& r : c.rows) out += fmt::format("{:.16e},{:.16e}\n", r.s, r.g_value);
  return out;
}

// ---------------------------------------------------------------------------
// ISS constants
// ---------------------------------------------------------------------------

struct IssConstantsA {
  double theta = 0.0, epsilon = 0.0, zeta = 0.0;
  double sigma = 0.0;     // K + (pi - 2 theta)^2
  double L = kInf;        // with |r a|
  double L_signed = kInf; // with r a as printed
  double gamma = kInf;    // disturbance coefficient
  double ic_u1 = kInf;    // coefficient of the weighted norm of u1_0
  double ic_u2 = kInf;    // coefficient of the weighted norm of u2_0
  std::optional<double> kv_gain;
  bool small_gain = false;

  Certificate certificate() const {
    auto c = Certificate::strict(ConditionId::LoopAGainProduct, L, 1.0);
    c.witness.theta = theta;
    c.witness.epsilon = epsilon;
    c.witness.zeta = zeta;
    c.notes.push_back(fmt::format("L with r*a_tilde as printed = {:.16e}", L_signed));
    return c;
  }
};

/// Gain of the wave problem at (theta, epsilon):
/// (1+eps) / (sin(theta) (1 - (1+eps) sqrt(P(theta)))^2), +inf when undefined.
inline double kv_gain(double theta, double epsilon, double s) {
  const double P = gain_P_s(theta, s);
  const double r = 1.0 - (1.0 + epsilon) * std::sqrt(P);
  if (!std::isfinite(P) || !(r > 0.0)) return kInf;
  return (1.0 + epsilon) / (std::sin(theta) * r * r);
}

inline IssConstantsA iss_constants_loop_a(const LoopAParams& pa, double theta, double epsilon, double zeta,
                                          std::optional<double> kv_s = std::nullopt) {
  if (!(theta > 0.0 && theta < kPi / 2.0)) throw std::invalid_argument("iss_constants_loop_a: theta in (0,pi/2)");
  if (!(epsilon > 0.0) || !(zeta > 0.0)) throw std::invalid_argument("iss_constants_loop_a: epsilon, zeta > 0");
  IssConstantsA c;
  c.theta = theta;
  c.epsilon = epsilon;
  c.zeta = zeta;
  const double e1 = 1.0 + epsilon;
  c.sigma = pa.K + (kPi - 2.0 * theta) * (kPi - 2.0 * theta);
  if (kv_s) c.kv_gain = kv_gain(theta, epsilon, *kv_s);
  if (!(c.sigma > 0.0)) return c;
  c.L = (1.0 + zeta) * std::abs(pa.coupling()) * e1 * e1 / c.sigma;
  c.L_signed = (1.0 + zeta) * pa.coupling() * e1 * e1 / c.sigma;
  c.small_gain = c.L < 1.0;
  if (!c.small_gain) return c;
  const double inv = 1.0 / (1.0 - c.L);
  const double ratio = e1 * std::abs(pa.a_tilde) / pa.b_tilde;
  c.gamma = (ratio + 1.0) * inv * e1 * (1.0 + 1.0 / zeta) / std::sin(theta);
  c.ic_u1 = inv * (1.0 + ratio);
  c.ic_u2 = inv * (1.0 + e1 * std::abs(pa.r) * pa.b_tilde * (1.0 + zeta) / c.sigma);
  return c;
}

enum class IssObjective { Gamma, KvGain };

/// Minimizes gamma (or the wave gain) over theta in (0, pi/2), epsilon in
/// [eps_min, eps_max] and zeta in [zeta_min, zeta_max] (log scale): a coarse
/// grid followed by nested Brent searches.
inline IssConstantsA optimize_iss_loop_a(const LoopAParams& pa, IssObjective objective = IssObjective::Gamma,
                                         std::optional<double> kv_s = std::nullopt, double eps_min = 1e-6,
                                         double eps_max = 1.0, double zeta_min = 1e-3, double zeta_max = 1e3) {
  if (objective == IssObjective::KvGain && !kv_s)
    throw std::invalid_argument("optimize_iss_loop_a: wave gain needs the parameter s");
  auto value = [&](double t, double le, double lz) {
    const auto c = iss_constants_loop_a(pa, t, std::exp(le), std::exp(lz), kv_s);
    const double v = objective == IssObjective::Gamma ? c.gamma : c.kv_gain.value_or(kInf);
    return objective == IssObjective::KvGain || c.small_gain ? v : kInf;
  };
  const double le0 = std::log(eps_min), le1 = std::log(eps_max);
  const double lz0 = std::log(zeta_min), lz1 = std::log(zeta_max);
  const double tmax = kPi / 2.0;
  // coarse grid; theta also runs geometrically toward 0, where near-critical couplings live
  std::vector<double> thetas;
  for (int i = 0; i < 40; ++i) thetas.push_back(1e-7 * std::pow(tmax / 60.0 / 1e-7, i / 40.0));
  for (int i = 1; i < 60; ++i) thetas.push_back(tmax * i / 60.0);
  double ble = le0, blz = 0.0, bv = kInf;
  std::size_t bi = thetas.size() / 2;
  constexpr int ne = 12, nzeta = 24;
  for (std::size_t i = 0; i < thetas.size(); ++i)
    for (int j = 0; j <= ne; ++j)
      for (int k = 0; k <= nzeta; ++k) {
        const double le = le0 + (le1 - le0) * j / ne, lz = lz0 + (lz1 - lz0) * k / nzeta;
        const double v = value(thetas[i], le, lz);
        if (v < bv) {
          bv = v;
          bi = i;
          ble = le;
          blz = lz;
        }
      }
  const double bt = thetas[bi];
  if (!std::isfinite(bv)) return iss_constants_loop_a(pa, bt, std::exp(ble), std::exp(blz), kv_s);
  // nested refinement: theta outer, epsilon middle, zeta inner
  const double de = (le1 - le0) / ne, dz = (lz1 - lz0) / nzeta;
  auto best_zeta = [&](double t, double le) {
    return detail::brent_min([&](double lz) { return value(t, le, lz); }, std::max(lz0, blz - dz),
                             std::min(lz1, blz + dz));
  };
  auto best_eps = [&](double t) {
    return detail::brent_min([&](double le) { return best_zeta(t, le).second; }, std::max(le0, ble - de),
                             std::min(le1, ble + de));
  };
  const double t_lo = bi == 0 ? 0.5 * thetas[0] : thetas[bi - 1];
  const double t_hi = bi + 1 == thetas.size() ? tmax - 1e-9 : thetas[bi + 1];
  const auto [t_star, v_star] = detail::brent_min([&](double t) { return best_eps(t).second; }, t_lo, t_hi);
  if (v_star < bv) {
    const double le_star = best_eps(t_star).first;
    const double lz_star = best_zeta(t_star, le_star).first;
    return iss_constants_loop_a(pa, t_star, std::exp(le_star), std::exp(lz_star), kv_s);
  }
  return iss_constants_loop_a(pa, bt, std::exp(ble), std::exp(blz), kv_s);
}

struct IssConstantsB {
  double theta = 0.0, omega = 0.0, epsilon = 0.0;
  double sigma = 0.0;  // p omega^2 - a
  double B = 0.0;      // max_z eta(z)^{-1} int|b(z,s)|ds
  double eta1 = 0.0;   // eta(1)
  double product = kInf;
  double coeff_u2 = kInf;  // multiplies exp(1/c) sup|u2_0|
  double exp_factor = 1.0; // exp(1/c)
  double coeff_u1 = kInf;  // multiplies the weighted norm of u1_0
  bool small_gain = false;
};

inline IssConstantsB iss_constants_loop_b(const LoopBParams& pb, double theta, double omega, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("iss_constants_loop_b: epsilon must be > 0");
  if (!theta_omega_admissible(pb.diffusion, pb.reaction, pb.robin_q, theta, omega))
    throw std::invalid_argument("iss_constants_loop_b: (theta, omega) not admissible");
  IssConstantsB c;
  c.theta = theta;
  c.omega = omega;
  c.epsilon = epsilon;
  c.sigma = pb.diffusion * omega * omega - pb.reaction;
  c.eta1 = std::sin(omega + theta);
  const auto z = uniform_nodes(201);
  const CompositeGauss rule(8);
  for (double zi : z) c.B = std::max(c.B, kernel_abs_row_integral(pb.kernel, zi, rule) / std::sin(omega * zi + theta));
  const double e1 = 1.0 + epsilon;
  c.product = e1 * e1 * c.B * std::abs(pb.boundary_gain) * c.eta1 / c.sigma;
  c.exp_factor = std::exp(1.0 / pb.transport_speed);
  c.small_gain = c.product < 1.0;
  if (!c.small_gain) return c;
  const double inv = 1.0 / (1.0 - c.product);
  c.coeff_u2 = inv * (e1 * c.B / c.sigma + 1.0);
  c.coeff_u1 = inv * (1.0 + e1 * std::abs(pb.boundary_gain) * c.eta1);
  return c;
}

}  // namespace pdeloop
