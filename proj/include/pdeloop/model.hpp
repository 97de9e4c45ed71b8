#pragma once

// Parameter sets for the two loop families and the physical models that map
// onto them, the transforms between them, equilibrium profiles, kernels and
// boundary disturbance signals.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pdeloop/numerics.hpp"

namespace pdeloop {

// ---------------------------------------------------------------------------
// Parameter sets
// ---------------------------------------------------------------------------

/// Groundwater transport of a sorbing chemical (physical units).
struct ChemicalParams {
  double porosity = 0.5;
  double velocity = 0.0;
  double diffusion = 1.0;
  double sorption_rate = 1.0;
  double desorption_rate = 1.0;
  double length = 1.0;
  double source_conc = 1.0;

  void validate() const {
    if (!(porosity > 0.0 && porosity < 1.0))
      throw std::invalid_argument("ChemicalParams: porosity must lie in (0,1)");
    if (!(velocity >= 0.0)) throw std::invalid_argument("ChemicalParams: velocity must be >= 0");
    if (!(diffusion > 0.0)) throw std::invalid_argument("ChemicalParams: diffusion must be > 0");
    if (!(sorption_rate > 0.0)) throw std::invalid_argument("ChemicalParams: sorption_rate must be > 0");
    if (!(desorption_rate > 0.0))
      throw std::invalid_argument("ChemicalParams: desorption_rate must be > 0");
    if (!(length > 0.0)) throw std::invalid_argument("ChemicalParams: length must be > 0");
    if (!(source_conc > 0.0)) throw std::invalid_argument("ChemicalParams: source_conc must be > 0");
  }
};

/// Parabolic PDE coupled to a zero-speed hyperbolic PDE, Dirichlet boundary
/// disturbance at z = 0:
///   u1_t - u1_zz + K u1 - r b u2 = 0,  u2_t - a u1 + b u2 = 0.
struct LoopAParams {
  double K = 0.0;
  double r = 0.0;
  double a_tilde = 0.0;
  double b_tilde = 1.0;

  double coupling() const { return r * a_tilde; }

  void validate_finite() const {
    if (!std::isfinite(K) || !std::isfinite(r) || !std::isfinite(a_tilde) || !std::isfinite(b_tilde))
      throw std::invalid_argument("LoopAParams: all coefficients must be finite");
  }
  void validate() const {
    validate_finite();
    if (!(b_tilde > 0.0)) throw std::invalid_argument("LoopAParams: b_tilde must be > 0");
  }
};

/// u_tt - sigma u_zzt = c^2 u_zz - mu u_t on (0,1), u(t,0) = d(t), u(t,1) = 0.
struct WaveKVParams {
  double kv_sigma = 1.0;
  double wave_speed = 1.0;
  double viscous_mu = 0.0;

  void validate() const {
    if (!(kv_sigma > 0.0)) throw std::invalid_argument("WaveKVParams: kv_sigma must be > 0");
    if (!(wave_speed > 0.0)) throw std::invalid_argument("WaveKVParams: wave_speed must be > 0");
    if (!(viscous_mu >= 0.0)) throw std::invalid_argument("WaveKVParams: viscous_mu must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Kernels b(z,s), l(z,s) on [0,1]^2
// ---------------------------------------------------------------------------

/// Kernel on the unit square. Either a named closed form from a small
/// catalog, a table bilinearly interpolated on a uniform grid, or a derived
/// closure (not serializable). Smoothness of tables is the caller's concern.
class Kernel {
 public:
  enum class Kind { Expr, Table, Derived };

  /// The zero kernel.
  Kernel() : name_("zero"), fn_([](double, double) { return 0.0; }) {}

  static const std::vector<std::string>& catalog() {
    static const std::vector<std::string> names = {"zero",   "one",         "exp_neg_z", "exp_neg_s",
                                                   "cos_pi_s", "one_minus_z_half", "z_s",
                                                   "sin_pi_z", "exp_neg_zs"};
    return names;
  }

  static Kernel named(const std::string& name, double scale = 1.0) {
    std::function<double(double, double)> f;
    if (name == "zero") f = [](double, double) { return 0.0; };
    else if (name == "one") f = [](double, double) { return 1.0; };
    else if (name == "exp_neg_z") f = [](double z, double) { return std::exp(-z); };
    else if (name == "exp_neg_s") f = [](double, double s) { return std::exp(-s); };
    else if (name == "cos_pi_s") f = [](double, double s) { return std::cos(kPi * s); };
    else if (name == "one_minus_z_half") f = [](double z, double) { return 1.0 - 0.5 * z; };
    else if (name == "z_s") f = [](double z, double s) { return z * s; };
    else if (name == "sin_pi_z") f = [](double z, double) { return std::sin(kPi * z); };
    else if (name == "exp_neg_zs") f = [](double z, double s) { return std::exp(-z * s); };
    else throw std::invalid_argument("Kernel: unknown catalog name '" + name + "'");
    Kernel k;
    k.kind_ = Kind::Expr;
    k.name_ = name;
    k.scale_ = scale;
    k.fn_ = [f = std::move(f), scale](double z, double s) { return scale * f(z, s); };
    return k;
  }

  /// values are row-major: values[i * grid_n + j] = b(z_i, s_j).
  static Kernel table(int grid_n, std::vector<double> values) {
    if (grid_n < 2) throw std::invalid_argument("Kernel table: grid_n must be >= 2");
    if (values.size() != static_cast<std::size_t>(grid_n) * static_cast<std::size_t>(grid_n))
      throw std::invalid_argument("Kernel table: expected grid_n^2 values");
    for (double v : values)
      if (!std::isfinite(v)) throw std::invalid_argument("Kernel table: non-finite entry");
    Kernel k;
    k.kind_ = Kind::Table;
    k.name_ = "table";
    k.grid_n_ = grid_n;
    k.values_ = std::make_shared<const std::vector<double>>(std::move(values));
    auto data = k.values_;
    k.fn_ = [data, grid_n](double z, double s) {
      const double h = 1.0 / (grid_n - 1);
      auto locate = [&](double x, int& i, double& t) {
        const double pos = std::clamp(x / h, 0.0, static_cast<double>(grid_n - 1));
        i = std::min(static_cast<int>(pos), grid_n - 2);
        t = pos - i;
      };
      int i = 0, j = 0;
      double tz = 0, ts = 0;
      locate(z, i, tz);
      locate(s, j, ts);
      const auto& v = *data;
      auto at = [&](int a, int b) { return v[static_cast<std::size_t>(a) * grid_n + b]; };
      return (1 - tz) * ((1 - ts) * at(i, j) + ts * at(i, j + 1)) +
             tz * ((1 - ts) * at(i + 1, j) + ts * at(i + 1, j + 1));
    };
    return k;
  }

  static Kernel derived(std::function<double(double, double)> f, std::string description) {
    Kernel k;
    k.kind_ = Kind::Derived;
    k.name_ = std::move(description);
    k.fn_ = std::move(f);
    return k;
  }

  double operator()(double z, double s) const { return fn_(z, s); }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double scale() const { return scale_; }
  int grid_n() const { return grid_n_; }
  const std::vector<double>& values() const {
    static const std::vector<double> empty;
    return values_ ? *values_ : empty;
  }

  /// True for the catalog zero kernel or an all-zero table.
  bool is_zero() const {
    if (kind_ == Kind::Expr) return name_ == "zero" || scale_ == 0.0;
    if (kind_ == Kind::Table) {
      for (double v : *values_)
        if (v != 0.0) return false;
      return true;
    }
    return false;
  }

 private:
  Kind kind_ = Kind::Expr;
  std::string name_;
  double scale_ = 1.0;
  int grid_n_ = 0;
  std::shared_ptr<const std::vector<double>> values_;
  std::function<double(double, double)> fn_;
};

/// z -> int_0^1 |b(z,s)| ds, composite Gauss in s.
inline double kernel_abs_row_integral(const Kernel& b, double z, const CompositeGauss& rule) {
  return rule.integrate([&](double s) { return std::abs(b(z, s)); });
}

/// max over a uniform z-grid of int_0^1 |b(z,s)| ds.
inline double kernel_abs_row_max(const Kernel& b, int z_points = 201, int panels = 8) {
  const CompositeGauss rule(panels);
  double m = 0.0;
  for (double z : uniform_nodes(z_points)) m = std::max(m, kernel_abs_row_integral(b, z, rule));
  return m;
}

/// Parabolic PDE with Dirichlet/Robin boundary conditions coupled to a
/// transport PDE through a non-local in-domain term and a boundary trace:
///   u1_t = p u1_zz + a u1 + int b(z,s) u2(t,s) ds,   u2_t + c u2_z = 0,
///   u1(t,0) = 0, u1_z(t,1) = q u1(t,1), u2(t,0) = k u1(t,1).
struct LoopBParams {
  double diffusion = 1.0;        // p
  double transport_speed = 1.0;  // c
  double robin_q = 0.0;          // q
  double reaction = 0.0;         // a
  double boundary_gain = 0.0;    // k
  Kernel kernel;                 // b(z,s)

  void validate() const {
    if (!(diffusion > 0.0)) throw std::invalid_argument("LoopBParams: diffusion must be > 0");
    if (!(transport_speed > 0.0))
      throw std::invalid_argument("LoopBParams: transport_speed must be > 0");
    if (!(robin_q < 1.0)) throw std::invalid_argument("LoopBParams: robin_q must be < 1");
    if (!std::isfinite(reaction) || !std::isfinite(boundary_gain))
      throw std::invalid_argument("LoopBParams: reaction and boundary_gain must be finite");
  }
};

/// Backstepping closed loop of two transport PDEs perturbed by diffusion in
/// the first one, with non-local feedback kernel l(z,s).
struct BacksteppingParams {
  double transport_v = 1.0;
  double diffusion = 0.1;
  double transport_c = 1.0;
  double gain = 0.0;
  Kernel kernel;  // l(z,s)

  void validate() const {
    if (!(transport_v > 0.0)) throw std::invalid_argument("BacksteppingParams: transport_v must be > 0");
    if (!(diffusion > 0.0)) throw std::invalid_argument("BacksteppingParams: diffusion must be > 0");
    if (!(transport_c > 0.0)) throw std::invalid_argument("BacksteppingParams: transport_c must be > 0");
    if (!std::isfinite(gain)) throw std::invalid_argument("BacksteppingParams: gain must be finite");
  }
};

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

struct ChemicalLoopA {
  LoopAParams params;
  /// r * a_tilde <= K holds for every valid chemical parameter set.
  bool coupling_dominated;
};

inline ChemicalLoopA chemical_to_loop_a(const ChemicalParams& cp) {
  cp.validate();
  const double L2 = cp.length * cp.length;
  const double scale = L2 * cp.porosity / cp.diffusion;
  LoopAParams out;
  out.a_tilde = cp.sorption_rate * scale;
  out.b_tilde = cp.desorption_rate * scale;
  out.r = 1.0 / cp.porosity;
  out.K = L2 * (cp.velocity * cp.velocity * cp.porosity * cp.porosity + 4.0 * cp.sorption_rate * cp.diffusion) /
          (4.0 * cp.diffusion * cp.diffusion);
  // r a_tilde = a L^2 / D and K = L^2 v^2 phi^2 / (4 D^2) + a L^2 / D; compare the
  // surplus directly so the identity is not lost to rounding.
  const double surplus = L2 * cp.velocity * cp.velocity * cp.porosity * cp.porosity /
                         (4.0 * cp.diffusion * cp.diffusion);
  return {out, surplus >= 0.0};
}

struct EquilibriumValue {
  double c_eq;
  double n_eq;
};

/// Steady dissolved/sorbed concentration at position xi in [0, L].
inline EquilibriumValue equilibrium_profile(const ChemicalParams& cp, double xi) {
  cp.validate();
  if (!(xi >= 0.0 && xi <= cp.length))
    throw std::invalid_argument("equilibrium_profile: position outside [0, L]");
  const double alpha = cp.porosity * cp.velocity / cp.diffusion;
  double c = 0.0;
  if (alpha == 0.0) {
    c = cp.source_conc * (1.0 - xi / cp.length);
  } else {
    // (e^{aL} - e^{a xi}) / (e^{aL} - 1) rewritten to avoid overflow and the
    // cancellation at small a.
    c = cp.source_conc * std::expm1(alpha * (xi - cp.length)) / std::expm1(-alpha * cp.length);
  }
  return {c, cp.sorption_rate / cp.desorption_rate * c};
}

struct WaveLoopA {
  LoopAParams params;
  /// Loop-A time tau relates to wave time t by tau = time_scale * t.
  double time_scale;
};

/// Maps the Kelvin-Voigt wave equation onto loop A. With tau = sigma t:
///   K = (mu sigma - c^2)/sigma^2, b_tilde = c^2/sigma^2, r = 1, a_tilde = K,
/// and u2 = (u1_tau - u1_zz + K u1) / (r b_tilde).
inline WaveLoopA kv_wave_to_loop_a(const WaveKVParams& wp) {
  wp.validate();
  const double s2 = wp.kv_sigma * wp.kv_sigma;
  LoopAParams out;
  out.K = (wp.viscous_mu * wp.kv_sigma - wp.wave_speed * wp.wave_speed) / s2;
  out.b_tilde = wp.wave_speed * wp.wave_speed / s2;
  out.r = 1.0;
  out.a_tilde = out.K;
  return {out, wp.kv_sigma};
}

/// Exponential change of variables removing the advection term; produces the
/// equivalent loop-B system.
inline LoopBParams backstepping_to_loop_b(const BacksteppingParams& bp) {
  bp.validate();
  LoopBParams out;
  const double v = bp.transport_v;
  const double p = bp.diffusion;
  out.diffusion = p;
  out.transport_speed = bp.transport_c;
  out.robin_q = -v / (2.0 * p);
  out.reaction = -v * v / (4.0 * p);
  out.boundary_gain = bp.gain;
  if (bp.kernel.is_zero()) {
    out.kernel = Kernel::named("zero");
  } else {
    Kernel l = bp.kernel;
    out.kernel = Kernel::derived(
        [l, p, v](double z, double s) { return p * std::exp(-v * z / (2.0 * p)) * l(z, s); },
        "p*exp(-v z/(2p))*l(z,s) from " + l.name());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Boundary disturbances
// ---------------------------------------------------------------------------

struct DisturbanceSpec {
  enum class Kind { Zero, Constant, Sinusoid, SmoothedStep };
  Kind kind = Kind::Zero;
  double amplitude = 0.0;  // constant value / sinusoid or step amplitude
  double angular_frequency = 0.0;
  double phase = 0.0;
  double rise_time = 1.0;
};

inline std::string to_string(DisturbanceSpec::Kind k) {
  switch (k) {
    case DisturbanceSpec::Kind::Zero: return "zero";
    case DisturbanceSpec::Kind::Constant: return "constant";
    case DisturbanceSpec::Kind::Sinusoid: return "sinusoid";
    case DisturbanceSpec::Kind::SmoothedStep: return "smoothed_step";
  }
  return "zero";
}

inline DisturbanceSpec::Kind disturbance_kind_from_string(const std::string& s) {
  if (s == "zero") return DisturbanceSpec::Kind::Zero;
  if (s == "constant") return DisturbanceSpec::Kind::Constant;
  if (s == "sinusoid") return DisturbanceSpec::Kind::Sinusoid;
  if (s == "smoothed_step" || s == "smoothed-step") return DisturbanceSpec::Kind::SmoothedStep;
  throw std::invalid_argument("unknown disturbance kind '" + s + "'");
}

/// Boundary signal d(t) with its analytic derivative.
class DisturbanceSignal {
 public:
  DisturbanceSignal() = default;
  explicit DisturbanceSignal(DisturbanceSpec spec) : spec_(spec) {}

  const DisturbanceSpec& spec() const { return spec_; }
  bool is_zero() const {
    return spec_.kind == DisturbanceSpec::Kind::Zero || spec_.amplitude == 0.0;
  }

  double operator()(double t) const {
    switch (spec_.kind) {
      case DisturbanceSpec::Kind::Zero: return 0.0;
      case DisturbanceSpec::Kind::Constant: return spec_.amplitude;
      case DisturbanceSpec::Kind::Sinusoid:
        return spec_.amplitude * std::sin(spec_.angular_frequency * t + spec_.phase);
      case DisturbanceSpec::Kind::SmoothedStep: {
        if (t <= 0.0) return 0.0;
        if (t >= spec_.rise_time) return spec_.amplitude;
        const double x = t / spec_.rise_time;
        return spec_.amplitude * x * x * (3.0 - 2.0 * x);
      }
    }
    return 0.0;
  }

  double derivative(double t) const {
    switch (spec_.kind) {
      case DisturbanceSpec::Kind::Zero:
      case DisturbanceSpec::Kind::Constant: return 0.0;
      case DisturbanceSpec::Kind::Sinusoid:
        return spec_.amplitude * spec_.angular_frequency *
               std::cos(spec_.angular_frequency * t + spec_.phase);
      case DisturbanceSpec::Kind::SmoothedStep: {
        if (t <= 0.0 || t >= spec_.rise_time) return 0.0;
        const double x = t / spec_.rise_time;
        return spec_.amplitude * 6.0 * x * (1.0 - x) / spec_.rise_time;
      }
    }
    return 0.0;
  }

  /// max_{0<=s<=t} |d(s)|, exact for every kind.
  double running_max_abs(double t) const {
    switch (spec_.kind) {
      case DisturbanceSpec::Kind::Zero: return 0.0;
      case DisturbanceSpec::Kind::Constant: return std::abs(spec_.amplitude);
      case DisturbanceSpec::Kind::SmoothedStep: return std::abs((*this)(t));
      case DisturbanceSpec::Kind::Sinusoid: {
        const double w = spec_.angular_frequency;
        const double A = std::abs(spec_.amplitude);
        if (w == 0.0) return std::abs((*this)(0.0));
        // |sin| reaches 1 where w s + phase = pi/2 + m pi
        const double lo = std::min(spec_.phase, w * t + spec_.phase);
        const double hi = std::max(spec_.phase, w * t + spec_.phase);
        const double m = std::ceil((lo - kPi / 2.0) / kPi);
        if (kPi / 2.0 + m * kPi <= hi) return A;
        return std::max(std::abs((*this)(0.0)), std::abs((*this)(t)));
      }
    }
    return 0.0;
  }

 private:
  DisturbanceSpec spec_;
};

inline DisturbanceSignal make_disturbance(const DisturbanceSpec& spec) {
  for (double v : {spec.amplitude, spec.angular_frequency, spec.phase, spec.rise_time})
    if (!std::isfinite(v)) throw std::invalid_argument("make_disturbance: non-finite parameter");
  if (spec.kind == DisturbanceSpec::Kind::SmoothedStep && !(spec.rise_time > 0.0))
    throw std::invalid_argument("make_disturbance: rise_time must be > 0");
  return DisturbanceSignal(spec);
}

inline DisturbanceSignal make_disturbance(const std::string& kind, double amplitude = 0.0,
                                          double angular_frequency = 0.0, double phase = 0.0,
                                          double rise_time = 1.0) {
  DisturbanceSpec spec;
  spec.kind = disturbance_kind_from_string(kind);
  spec.amplitude = amplitude;
  spec.angular_frequency = angular_frequency;
  spec.phase = phase;
  spec.rise_time = rise_time;
  return make_disturbance(spec);
}

// ---------------------------------------------------------------------------
// Initial profiles
// ---------------------------------------------------------------------------

/// Initial profile on [0,1] with a description used for reporting.
struct Profile {
  std::function<double(double)> fn = [](double) { return 0.0; };
  std::string description = "zero";

  double operator()(double z) const { return fn(z); }

  static Profile zero() { return {}; }
  static Profile sine(double amplitude, int mode = 1) {
    return {[=](double z) { return amplitude * std::sin(mode * kPi * z); },
            "sine(amplitude=" + std::to_string(amplitude) + ",n=" + std::to_string(mode) + ")"};
  }
  static Profile linear(double at0, double at1) {
    return {[=](double z) { return at0 + (at1 - at0) * z; }, "linear"};
  }
  /// Piecewise-linear interpolation of samples on the uniform grid of [0,1].
  static Profile table(std::vector<double> values) {
    if (values.size() < 2) throw std::invalid_argument("Profile table: need >= 2 values");
    auto data = std::make_shared<const std::vector<double>>(std::move(values));
    return {[data](double z) {
              const auto n = data->size();
              const double pos = std::clamp(z, 0.0, 1.0) * static_cast<double>(n - 1);
              const std::size_t i = std::min(static_cast<std::size_t>(pos), n - 2);
              const double t = pos - static_cast<double>(i);
              return (1 - t) * (*data)[i] + t * (*data)[i + 1];
            },
            "table"};
  }
  static Profile scaled(Profile base, double factor) {
    auto f = base.fn;
    return {[f, factor](double z) { return factor * f(z); }, base.description};
  }
};

}  // namespace pdeloop
