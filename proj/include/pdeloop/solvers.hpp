#pragma once

// Time evolution of both loops.
//
//  * series_evolve: truncated eigen-expansion with exact exponential
//    integration of piecewise-linear modal forcing.
//  * simulate_loop_a / simulate_loop_b: spectral engines. Loop A advances
//    each coupled (u1, u2) mode pair exactly through a matrix exponential;
//    loop B evaluates u2 on characteristics from the stored boundary trace.
//  * fd_reference_*: Crank-Nicolson reference solvers.
//  * picard_solve_*: windowed fixed-point iteration of the shifted integral
//    maps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "pdeloop/model.hpp"
#include "pdeloop/numerics.hpp"
#include "pdeloop/spectral.hpp"
#include "pdeloop/trajectory.hpp"

namespace pdeloop {

struct ForcingTerm {
  std::function<double(double, double)> fn = [](double, double) { return 0.0; };
  std::string description = "zero";

  double operator()(double t, double z) const { return fn(t, z); }
};

struct SimulationOptions {
  Grid grid;
  int modes = 64;
  int store_every = 1;
  int quad_panels = 8;
  /// Weight for the stored weighted norms; a loop-specific default is used
  /// when empty.
  std::optional<WeightFunction> weight;
};

class NonContractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Series engine
// ---------------------------------------------------------------------------

/// Evaluates the truncated eigen-expansion of the solution of
/// u_t + A u = f with u(0) = sum coeffs_n phi_n at time t on the nodes z.
/// Modal forcing <phi_n, f(tau)> is sampled at `time_steps` + 1 uniform
/// times and integrated exactly against exp(-lambda_n (t - tau)) as a
/// piecewise-linear function of tau.
inline std::vector<double> series_evolve(const EigenSystem& es, std::span<const double> coeffs0,
                                         const ForcingTerm& f, double t, std::span<const double> z,
                                         int time_steps = 200, int quad_panels = 8) {
  if (coeffs0.size() > es.count()) throw std::invalid_argument("series_evolve: too many coefficients");
  if (!(t >= 0.0)) throw std::invalid_argument("series_evolve: t must be >= 0");
  std::vector<double> c(es.count(), 0.0);
  std::copy(coeffs0.begin(), coeffs0.end(), c.begin());
  if (t > 0.0) {
    const CompositeGauss rule(quad_panels);
    const double h = t / time_steps;
    auto modal_forcing = [&](double tau) { return es.project([&](double s) { return f(tau, s); }, rule); };
    std::vector<ExpLinearWeights> w(es.count());
    for (std::size_t n = 0; n < es.count(); ++n) w[n] = exp_linear_weights(es.eigenvalues()[n], h);
    auto g0 = modal_forcing(0.0);
    for (int j = 0; j < time_steps; ++j) {
      auto g1 = modal_forcing((j + 1) * h);
      for (std::size_t n = 0; n < es.count(); ++n) c[n] = w[n].decay * c[n] + w[n].w0 * g0[n] + w[n].w1 * g1[n];
      g0 = std::move(g1);
    }
  }
  return es.synthesize(c, z);
}

// ---------------------------------------------------------------------------
// Loop-A homogenization
// ---------------------------------------------------------------------------

/// w1 = u1 - (1 - z) d.
inline std::vector<double> homogenize_loop_a(std::span<const double> u1, std::span<const double> z, double d) {
  std::vector<double> w(u1.size());
  for (std::size_t i = 0; i < u1.size(); ++i) w[i] = u1[i] - (1.0 - z[i]) * d;
  return w;
}

/// u1 = w1 + (1 - z) d.
inline std::vector<double> dehomogenize_loop_a(std::span<const double> w1, std::span<const double> z, double d) {
  std::vector<double> u(w1.size());
  for (std::size_t i = 0; i < w1.size(); ++i) u[i] = w1[i] + (1.0 - z[i]) * d;
  return u;
}

/// Forcing terms of the homogenized loop: f1 enters the parabolic line,
/// f2 the hyperbolic one.
inline ForcingTerm homogenized_forcing_f1(const LoopAParams& pa, const DisturbanceSignal& d) {
  return {[pa, d](double t, double z) { return -(1.0 - z) * (d.derivative(t) + pa.K * d(t)); }, "f1"};
}
inline ForcingTerm homogenized_forcing_f2(const LoopAParams& pa, const DisturbanceSignal& d) {
  return {[pa, d](double t, double z) { return pa.a_tilde * (1.0 - z) * d(t); }, "f2"};
}

// ---------------------------------------------------------------------------
// Boundary trace history
// ---------------------------------------------------------------------------

/// Uniformly sampled history of u1(t, 1). Samples older than the capacity are
/// dropped. Between samples the trace is a cubic Hermite interpolant whose
/// node slopes are backward differences, so an interval never changes once
/// its right end point is known.
class BoundaryTraceHistory {
 public:
  BoundaryTraceHistory(double dt, std::size_t capacity) : dt_(dt), capacity_(std::max<std::size_t>(capacity, 4)) {
    buf_.reserve(capacity_);
  }

  /// Capacity covering a delay of 1/c plus a margin.
  static std::size_t capacity_for(double c, double dt) {
    return static_cast<std::size_t>(std::ceil(1.0 / (c * dt))) + 4;
  }

  void push(double value) {
    if (buf_.size() < capacity_) {
      buf_.push_back(value);
    } else {
      buf_[head_] = value;
      head_ = (head_ + 1) % capacity_;
    }
    ++count_;
  }

  /// Overwrites the newest sample.
  void set_last(double value) {
    if (count_ == 0) throw std::logic_error("BoundaryTraceHistory: empty");
    at_index(count_ - 1) = value;
  }

  std::size_t size() const { return count_; }
  double newest_time() const { return static_cast<double>(count_ - 1) * dt_; }
  double oldest_time() const { return static_cast<double>(first_index()) * dt_; }
  double sample(std::size_t m) const { return const_cast<BoundaryTraceHistory*>(this)->at_index(m); }

  double operator()(double t) const {
    if (count_ == 0) throw std::logic_error("BoundaryTraceHistory: empty");
    const double tol = 1e-9 * dt_;
    if (t < oldest_time() - tol || t > newest_time() + tol)
      throw std::out_of_range("BoundaryTraceHistory: time outside stored window");
    if (count_ == 1) return sample(0);
    double pos = t / dt_;
    auto m = static_cast<std::size_t>(std::floor(pos));
    m = std::clamp(m, first_index(), count_ - 2);
    const double s = std::clamp(pos - static_cast<double>(m), 0.0, 1.0);
    const double y0 = sample(m), y1 = sample(m + 1);
    const double d0 = slope(m), d1 = slope(m + 1);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * dt_ * d0 + (-2 * s3 + 3 * s2) * y1 +
           (s3 - s2) * dt_ * d1;
  }

 private:
  std::size_t first_index() const { return count_ > capacity_ ? count_ - capacity_ : 0; }

  double& at_index(std::size_t m) {
    if (m < first_index() || m >= count_) throw std::out_of_range("BoundaryTraceHistory: sample dropped");
    if (count_ <= capacity_) return buf_[m];
    // newest sample sits just before head_
    const std::size_t back = count_ - 1 - m;
    return buf_[(head_ + capacity_ - 1 - back) % capacity_];
  }

  double slope(std::size_t m) const {
    const std::size_t first = first_index();
    if (m >= first + 2) return (3 * sample(m) - 4 * sample(m - 1) + sample(m - 2)) / (2 * dt_);
    if (m >= first + 1) {
      if (m + 1 < count_) return (sample(m + 1) - sample(m - 1)) / (2 * dt_);
      return (sample(m) - sample(m - 1)) / dt_;
    }
    if (m + 2 < count_) return (-3 * sample(m) + 4 * sample(m + 1) - sample(m + 2)) / (2 * dt_);
    if (m + 1 < count_) return (sample(m + 1) - sample(m)) / dt_;
    return 0.0;
  }

  double dt_;
  std::size_t capacity_;
  std::vector<double> buf_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

namespace detail {

inline double compat_tol(double scale) { return 1e-9 * std::max(1.0, scale); }

inline void check_loop_a_compat(const Profile& u1_0, const DisturbanceSignal& d) {
  const double d0 = d(0.0);
  if (std::abs(u1_0(0.0) - d0) > compat_tol(std::abs(d0)))
    throw std::invalid_argument("loop A: incompatible data, u1_0(0) must equal d(0)");
  if (std::abs(u1_0(1.0)) > compat_tol(0.0))
    throw std::invalid_argument("loop A: incompatible data, u1_0(1) must be 0");
}

inline void check_loop_b_compat(const LoopBParams& pb, const Profile& u1_0, const Profile& u2_0) {
  if (std::abs(u1_0(0.0)) > compat_tol(0.0))
    throw std::invalid_argument("loop B: incompatible data, u1_0(0) must be 0");
  const double target = pb.boundary_gain * u1_0(1.0);
  if (std::abs(u2_0(0.0) - target) > compat_tol(std::abs(target)))
    throw std::invalid_argument("loop B: incompatible data, u2_0(0) must equal k*u1_0(1)");
}

inline WeightFunction default_weight_a(const LoopAParams& pa) { return WeightFunction::loop_a(kPi / 4.0, pa.K); }
inline WeightFunction default_weight_b(const LoopBParams& pb) {
  return WeightFunction(kPi / 2.0, 0.0, -pb.reaction);
}

/// Row-major n_z x N matrix of phi_n(z_i).
inline std::vector<double> synthesis_matrix(const EigenSystem& es, std::span<const double> z) {
  std::vector<double> S(z.size() * es.count());
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t n = 0; n < es.count(); ++n) S[i * es.count() + n] = es.phi(n + 1, z[i]);
  return S;
}

inline void synthesize_into(std::span<const double> S, std::size_t modes, std::span<const double> c,
                            std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    const double* row = S.data() + i * modes;
    for (std::size_t n = 0; n < modes; ++n) acc += row[n] * c[n];
    out[i] = acc;
  }
}

/// Row-major N x n_z matrix mapping grid samples to <phi_n, u>, with u
/// reconstructed between nodes by local cubic interpolation.
inline std::vector<double> grid_projector(const EigenSystem& es, std::size_t n_z, const CompositeGauss& rule) {
  const std::size_t N = es.count();
  std::vector<double> P(N * n_z, 0.0);
  for (std::size_t j = 0; j < rule.size(); ++j) {
    std::size_t first = 0;
    double w[4];
    cubic_stencil(n_z, rule.nodes()[j], first, w);
    const std::size_t width = n_z < 4 ? 2 : 4;
    for (std::size_t n = 0; n < N; ++n) {
      const double base = rule.weights()[j] * es.phi(n + 1, rule.nodes()[j]);
      for (std::size_t k = 0; k < width; ++k) P[n * n_z + first + k] += base * w[k];
    }
  }
  return P;
}

inline void apply_rows(std::span<const double> M, std::size_t rows, std::size_t cols, std::span<const double> x,
                       std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = M.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

/// Exact propagator for x' = A x + F(s), F linear on [0, h]:
///   x(h) = phi0 x(0) + g0 F(0) + g1 F(h).
struct CoupledModeStep {
  Eigen::Matrix2d phi0;
  Eigen::Matrix2d g0;
  Eigen::Matrix2d g1;
};

inline CoupledModeStep coupled_mode_step(const Eigen::Matrix2d& A, double h) {
  Eigen::Matrix<double, 6, 6> B = Eigen::Matrix<double, 6, 6>::Zero();
  B.block<2, 2>(0, 0) = A * h;
  B.block<2, 2>(0, 2) = Eigen::Matrix2d::Identity();
  B.block<2, 2>(2, 4) = Eigen::Matrix2d::Identity();
  const Eigen::Matrix<double, 6, 6> E = B.exp();
  const Eigen::Matrix2d phi1 = E.block<2, 2>(0, 2);
  const Eigen::Matrix2d phi2 = E.block<2, 2>(0, 4);
  return {E.block<2, 2>(0, 0), h * (phi1 - phi2), h * phi2};
}

/// Thomas algorithm; sub[0] and sup[n-1] are ignored.
inline void solve_tridiagonal(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup,
                              std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

inline std::vector<double> sample_profile(const Profile& p, std::span<const double> z) {
  std::vector<double> v(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) v[i] = p(z[i]);
  return v;
}

inline bool store_step(int j, int steps, int every) { return j % every == 0 || j == steps; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Loop A, spectral
// ---------------------------------------------------------------------------

/// Spectral solution of loop A. The homogenized parabolic state w1 and the
/// in-span part of u2 are carried as modal coefficient pairs (c_n, y_n) that
/// obey
///   c_n' = -lambda_n c_n + r b y_n - e_n (d' + K d)
///   y_n' = -b y_n + a c_n + a e_n d,        e_n = <phi_n, 1 - z>,
/// and are advanced exactly per step with d, d' linear in time. The part of
/// u2 outside the truncated span evolves in closed form.
inline Trajectory simulate_loop_a(const LoopAParams& pa, const Profile& u1_0, const Profile& u2_0,
                                  const DisturbanceSignal& d, const SimulationOptions& opts = {}) {
  pa.validate();
  detail::check_loop_a_compat(u1_0, d);
  const Grid& g = opts.grid;
  const int steps = g.steps();
  const double h = g.dt;
  const auto N = static_cast<std::size_t>(opts.modes);
  const EigenSystem es = EigenSystem::dirichlet_dirichlet(pa.K, opts.modes);
  const CompositeGauss rule(opts.quad_panels);
  const WeightFunction eta = opts.weight.value_or(detail::default_weight_a(pa));

  Trajectory tr;
  tr.loop = "A";
  tr.solver = "spectral";
  tr.z = g.nodes();
  const std::size_t nz = tr.z.size();
  const auto S = detail::synthesis_matrix(es, tr.z);

  const double d0 = d(0.0);
  std::vector<double> c = es.project([&](double z) { return u1_0(z) - (1.0 - z) * d0; }, rule);
  std::vector<double> y = es.project([&](double z) { return u2_0(z); }, rule);
  const std::vector<double> e = es.project([](double z) { return 1.0 - z; }, rule);

  // u2 outside the span: exp(-b t) R0 + a Gamma(t) R1 with Gamma' = -b Gamma + d.
  std::vector<double> R0(nz), R1(nz), tmp(nz);
  detail::synthesize_into(S, N, y, tmp);
  for (std::size_t i = 0; i < nz; ++i) R0[i] = u2_0(tr.z[i]) - tmp[i];
  detail::synthesize_into(S, N, e, tmp);
  for (std::size_t i = 0; i < nz; ++i) R1[i] = (1.0 - tr.z[i]) - tmp[i];
  double gamma = 0.0;
  const ExpLinearWeights gw = exp_linear_weights(pa.b_tilde, h);

  std::vector<detail::CoupledModeStep> prop(N);
  for (std::size_t n = 0; n < N; ++n) {
    Eigen::Matrix2d A;
    A << -es.eigenvalues()[n], pa.r * pa.b_tilde, pa.a_tilde, -pa.b_tilde;
    prop[n] = detail::coupled_mode_step(A, h);
  }

  auto record = [&](double t) {
    const double dt_val = d(t);
    std::vector<double> p1(nz), p2(nz), s2(nz);
    detail::synthesize_into(S, N, c, p1);
    detail::synthesize_into(S, N, y, s2);
    const double decay = std::exp(-pa.b_tilde * t);
    for (std::size_t i = 0; i < nz; ++i) {
      p1[i] += (1.0 - tr.z[i]) * dt_val;
      p2[i] = s2[i] + decay * R0[i] + pa.a_tilde * gamma * R1[i];
    }
    tr.max_boundary_residual =
        std::max({tr.max_boundary_residual, std::abs(p1.front() - dt_val), std::abs(p1.back())});
    tr.push(t, std::move(p1), std::move(p2), eta);
  };

  record(0.0);
  for (int j = 0; j < steps; ++j) {
    const double t0 = j * h, t1 = (j + 1) * h;
    const double da = d(t0), db = d(t1);
    const double fa = -(d.derivative(t0) + pa.K * da), fb = -(d.derivative(t1) + pa.K * db);
    for (std::size_t n = 0; n < N; ++n) {
      const Eigen::Vector2d x(c[n], y[n]);
      const Eigen::Vector2d F0(e[n] * fa, pa.a_tilde * e[n] * da);
      const Eigen::Vector2d F1(e[n] * fb, pa.a_tilde * e[n] * db);
      const Eigen::Vector2d xn = prop[n].phi0 * x + prop[n].g0 * F0 + prop[n].g1 * F1;
      c[n] = xn(0);
      y[n] = xn(1);
    }
    gamma = gw.decay * gamma + gw.w0 * da + gw.w1 * db;
    if (detail::store_step(j + 1, steps, opts.store_every)) record(t1);
  }
  tr.metadata["modes"] = std::to_string(opts.modes);
  return tr;
}

// ---------------------------------------------------------------------------
// Loop B, spectral + characteristics
// ---------------------------------------------------------------------------

namespace detail {

/// Row-major N x Q matrix: entry (n, j) = W_j int_0^1 phi_n(z) b(z, s_j) dz,
/// so that <phi_n, int b(., s) u(s) ds> = sum_j entry(n, j) u(s_j).
inline std::vector<double> kernel_modal_matrix(const EigenSystem& es, const Kernel& b, const CompositeGauss& rule) {
  const std::size_t N = es.count(), Q = rule.size();
  std::vector<double> G(N * Q, 0.0);
  if (b.is_zero()) return G;
  std::vector<double> bz(Q * Q);  // b(z_i, s_j)
  for (std::size_t i = 0; i < Q; ++i)
    for (std::size_t j = 0; j < Q; ++j) bz[i * Q + j] = b(rule.nodes()[i], rule.nodes()[j]);
  std::vector<double> phiw(N * Q);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < Q; ++i) phiw[n * Q + i] = rule.weights()[i] * es.phi(n + 1, rule.nodes()[i]);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t i = 0; i < Q; ++i) {
      const double a = phiw[n * Q + i];
      const double* brow = bz.data() + i * Q;
      double* grow = G.data() + n * Q;
      for (std::size_t j = 0; j < Q; ++j) grow[j] += a * brow[j];
    }
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t j = 0; j < Q; ++j) G[n * Q + j] *= rule.weights()[j];
  return G;
}

}  // namespace detail

/// Spectral solution of loop B. u1 is carried in the Dirichlet-Robin
/// eigenbasis; u2 is evaluated exactly on characteristics, from the initial
/// profile for c t <= z and from the stored boundary trace otherwise.
inline Trajectory simulate_loop_b(const LoopBParams& pb, const Profile& u1_0, const Profile& u2_0,
                                  const SimulationOptions& opts = {}) {
  pb.validate();
  detail::check_loop_b_compat(pb, u1_0, u2_0);
  const Grid& g = opts.grid;
  const int steps = g.steps();
  const double h = g.dt;
  const double c_speed = pb.transport_speed;
  const double k = pb.boundary_gain;
  const auto N = static_cast<std::size_t>(opts.modes);
  const EigenSystem es = EigenSystem::dirichlet_robin(pb.diffusion, pb.reaction, pb.robin_q, opts.modes);
  const CompositeGauss rule(opts.quad_panels);
  const WeightFunction eta = opts.weight.value_or(detail::default_weight_b(pb));
  const bool coupled = !pb.kernel.is_zero();
  const auto G = detail::kernel_modal_matrix(es, pb.kernel, rule);
  const std::size_t Q = rule.size();

  Trajectory tr;
  tr.loop = "B";
  tr.solver = "spectral";
  tr.z = g.nodes();
  const std::size_t nz = tr.z.size();
  const auto S = detail::synthesis_matrix(es, tr.z);

  std::vector<double> c = es.project([&](double z) { return u1_0(z); }, rule);
  std::vector<double> phi_at_1(N), robin_row(N);
  for (std::size_t n = 0; n < N; ++n) {
    phi_at_1[n] = es.phi(n + 1, 1.0);
    robin_row[n] = es.dphi(n + 1, 1.0) - pb.robin_q * es.phi(n + 1, 1.0);
  }
  auto trace_of = [&](const std::vector<double>& cc) {
    double acc = 0.0;
    for (std::size_t n = 0; n < N; ++n) acc += phi_at_1[n] * cc[n];
    return acc;
  };

  BoundaryTraceHistory history(h, BoundaryTraceHistory::capacity_for(c_speed, h));
  history.push(u1_0(1.0));

  auto u2_at = [&](double t, double x) {
    if (c_speed * t > x) return k * history(t - x / c_speed);
    return u2_0(x - c_speed * t);
  };

  std::vector<ExpLinearWeights> w(N);
  for (std::size_t n = 0; n < N; ++n) w[n] = exp_linear_weights(es.eigenvalues()[n], h);

  std::vector<double> u2q(Q), F0(N, 0.0), F1(N, 0.0);
  auto modal_forcing = [&](double t, std::vector<double>& F) {
    if (!coupled) return;
    for (std::size_t j = 0; j < Q; ++j) u2q[j] = u2_at(t, rule.nodes()[j]);
    detail::apply_rows(G, N, Q, u2q, F);
  };

  auto record = [&](double t) {
    std::vector<double> p1(nz), p2(nz);
    detail::synthesize_into(S, N, c, p1);
    for (std::size_t i = 0; i < nz; ++i) p2[i] = u2_at(t, tr.z[i]);
    double robin = 0.0;
    for (std::size_t n = 0; n < N; ++n) robin += robin_row[n] * c[n];
    double res = std::max(std::abs(p1.front()), std::abs(robin));
    if (t > 0.0) res = std::max(res, std::abs(p2.front() - k * trace_of(c)));
    tr.max_boundary_residual = std::max(tr.max_boundary_residual, res);
    tr.push(t, std::move(p1), std::move(p2), eta);
  };

  record(0.0);
  modal_forcing(0.0, F0);
  std::vector<double> c_new(N);
  const bool implicit_trace = coupled && c_speed * h > rule.nodes().front();
  for (int j = 0; j < steps; ++j) {
    const double t1 = (j + 1) * h;
    history.push(history.sample(history.size() - 1));
    double trace = history.sample(history.size() - 1);
    for (int it = 0; it < 50; ++it) {
      modal_forcing(t1, F1);
      for (std::size_t n = 0; n < N; ++n) c_new[n] = w[n].decay * c[n] + w[n].w0 * F0[n] + w[n].w1 * F1[n];
      const double next = trace_of(c_new);
      history.set_last(next);
      const bool done = std::abs(next - trace) <= 1e-15 * std::max(1.0, std::abs(next));
      trace = next;
      if (!implicit_trace || done) break;
    }
    if (implicit_trace) modal_forcing(t1, F1);
    c.swap(c_new);
    F0.swap(F1);
    if (detail::store_step(j + 1, steps, opts.store_every)) record(t1);
  }
  tr.metadata["modes"] = std::to_string(opts.modes);
  return tr;
}

// ---------------------------------------------------------------------------
// Finite-difference references
// ---------------------------------------------------------------------------

/// Crank-Nicolson for u1 (Dirichlet data d(t) at z = 0), trapezoidal
/// integrating factor for u2, solved jointly per step.
inline Trajectory fd_reference_loop_a(const LoopAParams& pa, const Profile& u1_0, const Profile& u2_0,
                                      const DisturbanceSignal& d, const SimulationOptions& opts = {}) {
  pa.validate();
  detail::check_loop_a_compat(u1_0, d);
  const Grid& g = opts.grid;
  const int steps = g.steps();
  const double h = g.dt;
  const WeightFunction eta = opts.weight.value_or(detail::default_weight_a(pa));

  Trajectory tr;
  tr.loop = "A";
  tr.solver = "fd";
  tr.z = g.nodes();
  const std::size_t nz = tr.z.size();
  const double dz = g.dz();
  std::vector<double> u1 = detail::sample_profile(u1_0, tr.z);
  std::vector<double> u2 = detail::sample_profile(u2_0, tr.z);
  u1.front() = d(0.0);
  u1.back() = 0.0;

  const double E = std::exp(-pa.b_tilde * h);
  const double alpha = h / (2.0 * dz * dz);
  const double coupling = 0.25 * h * h * pa.r * pa.b_tilde * pa.a_tilde;  // (h/2)^2 r b a
  const double diag_l = 1.0 + 2.0 * alpha + 0.5 * h * pa.K - coupling;
  const std::size_t m = nz - 2;

  auto record = [&](double t) {
    tr.max_boundary_residual = std::max({tr.max_boundary_residual, std::abs(u1.front() - d(t)), std::abs(u1.back())});
    tr.push(t, u1, u2, eta);
  };
  record(0.0);

  std::vector<double> sub(m), diag(m), sup(m), rhs(m), u1_new(nz);
  for (int j = 0; j < steps; ++j) {
    const double t1 = (j + 1) * h;
    const double left_new = d(t1);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = k + 1;
      sub[k] = -alpha;
      sup[k] = -alpha;
      diag[k] = diag_l;
      rhs[k] = alpha * (u1[i - 1] + u1[i + 1]) + (1.0 - 2.0 * alpha - 0.5 * h * pa.K) * u1[i] +
               0.5 * h * pa.r * pa.b_tilde * (1.0 + E) * u2[i] + coupling * E * u1[i];
    }
    rhs.front() += alpha * left_new;
    detail::solve_tridiagonal(sub, diag, sup, rhs);
    u1_new.front() = left_new;
    u1_new.back() = 0.0;
    for (std::size_t k = 0; k < m; ++k) u1_new[k + 1] = rhs[k];
    for (std::size_t i = 0; i < nz; ++i) u2[i] = E * u2[i] + 0.5 * h * pa.a_tilde * (E * u1[i] + u1_new[i]);
    u1.swap(u1_new);
    if (detail::store_step(j + 1, steps, opts.store_every)) record(t1);
  }
  return tr;
}

/// Crank-Nicolson for u1 with a one-sided second-order Robin row at z = 1,
/// trapezoidal quadrature for the non-local term, and u2 advanced along
/// characteristics (cubic interpolation of the previous profile; the boundary
/// trace within the step for nodes with z < c dt).
inline Trajectory fd_reference_loop_b(const LoopBParams& pb, const Profile& u1_0, const Profile& u2_0,
                                      const SimulationOptions& opts = {}) {
  pb.validate();
  detail::check_loop_b_compat(pb, u1_0, u2_0);
  const Grid& g = opts.grid;
  const int steps = g.steps();
  const double h = g.dt;
  const double cs = pb.transport_speed;
  const double k = pb.boundary_gain;
  const double p = pb.diffusion, a = pb.reaction, q = pb.robin_q;
  const WeightFunction eta = opts.weight.value_or(detail::default_weight_b(pb));

  Trajectory tr;
  tr.loop = "B";
  tr.solver = "fd";
  tr.z = g.nodes();
  const std::size_t nz = tr.z.size();
  const std::size_t M = nz - 1;
  const double dz = g.dz();

  std::vector<double> u1 = detail::sample_profile(u1_0, tr.z);
  std::vector<double> u2 = detail::sample_profile(u2_0, tr.z);

  const bool coupled = !pb.kernel.is_zero();
  std::vector<double> Bt;
  if (coupled) {
    Bt.resize(nz * nz);
    for (std::size_t i = 0; i < nz; ++i)
      for (std::size_t j = 0; j < nz; ++j) {
        const double wj = (j == 0 || j == M) ? 0.5 * dz : dz;
        Bt[i * nz + j] = pb.kernel(tr.z[i], tr.z[j]) * wj;
      }
  }
  std::vector<double> f0(nz, 0.0), f1(nz, 0.0);
  auto nonlocal = [&](const std::vector<double>& v, std::vector<double>& out) {
    if (coupled) detail::apply_rows(Bt, nz, nz, v, out);
  };

  auto residual = [&](double t) {
    const double flux = (3 * u1[M] - 4 * u1[M - 1] + u1[M - 2]) / (2 * dz) - q * u1[M];
    double r = std::max(std::abs(u1.front()), std::abs(flux) * dz);
    if (t > 0.0) r = std::max(r, std::abs(u2.front() - k * u1[M]));
    return r;
  };
  auto record = [&](double t) {
    tr.max_boundary_residual = std::max(tr.max_boundary_residual, residual(t));
    tr.push(t, u1, u2, eta);
  };
  record(0.0);
  nonlocal(u2, f0);

  const double alpha = p * h / (2.0 * dz * dz);
  const double beta = 0.5 * a * h;
  std::vector<double> sub(M), diag(M), sup(M), rhs(M), u1_new(nz, 0.0), u2_new(nz);
  for (int j = 0; j < steps; ++j) {
    const double t1 = (j + 1) * h;
    // characteristics that left the boundary before this step
    std::vector<bool> from_trace(nz, false);
    for (std::size_t i = 0; i < nz; ++i) {
      const double x = tr.z[i] - cs * h;
      if (x >= 0.0) {
        u2_new[i] = interpolate_uniform(u2, x);
      } else if (t1 * cs <= tr.z[i]) {
        u2_new[i] = u2_0(tr.z[i] - cs * t1);
      } else {
        from_trace[i] = true;
      }
    }
    double trace_guess = u1[M];
    for (int it = 0; it < 50; ++it) {
      for (std::size_t i = 0; i < nz; ++i) {
        if (!from_trace[i]) continue;
        const double theta = 1.0 - tr.z[i] / (cs * h);  // position of t1 - z/c inside the step
        u2_new[i] = k * ((1.0 - theta) * u1[M] + theta * trace_guess);
      }
      nonlocal(u2_new, f1);
      for (std::size_t r = 0; r < M; ++r) {
        const std::size_t i = r + 1;
        sub[r] = -alpha;
        sup[r] = -alpha;
        diag[r] = 1.0 + 2.0 * alpha - beta;
        const double right = i + 1 <= M ? u1[i + 1] : 0.0;
        rhs[r] = alpha * (u1[i - 1] + right) + (1.0 - 2.0 * alpha + beta) * u1[i] + 0.5 * h * (f0[i] + f1[i]);
      }
      // Robin row u_{M-2} - 4 u_{M-1} + (3 - 2 dz q) u_M = 0, with u_{M-2}
      // eliminated through the row of node M-1.
      const std::size_t last = M - 1;
      const double row_prev_diag = diag[last - 1];
      sub[last] = -4.0 + row_prev_diag / alpha;
      diag[last] = (3.0 - 2.0 * dz * q) - 1.0;
      rhs[last] = rhs[last - 1] / alpha;
      if (M - 2 == 0) {
        // u_{M-2} is the Dirichlet node; nothing to eliminate
        sub[last] = -4.0;
        diag[last] = 3.0 - 2.0 * dz * q;
        rhs[last] = 0.0;
      }
      detail::solve_tridiagonal(sub, diag, sup, rhs);
      u1_new[0] = 0.0;
      for (std::size_t r = 0; r < M; ++r) u1_new[r + 1] = rhs[r];
      const bool done = std::abs(u1_new[M] - trace_guess) <= 1e-15 * std::max(1.0, std::abs(trace_guess));
      trace_guess = u1_new[M];
      if (done) break;
    }
    for (std::size_t i = 0; i < nz; ++i)
      if (from_trace[i]) {
        const double theta = 1.0 - tr.z[i] / (cs * h);
        u2_new[i] = k * ((1.0 - theta) * u1[M] + theta * u1_new[M]);
      }
    nonlocal(u2_new, f1);
    u1.swap(u1_new);
    u2.swap(u2_new);
    f0.swap(f1);
    if (detail::store_step(j + 1, steps, opts.store_every)) record(t1);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Picard fixed-point solvers
// ---------------------------------------------------------------------------

struct PicardOptions {
  double window = 0.25;
  double tolerance = 1e-9;
  int max_iterations = 400;
  int max_halvings = 5;
  /// Exponential damping shift; a coupling-based default is used when empty.
  std::optional<double> shift;
};

namespace detail {

/// Runs `attempt(window_steps, shift)` and on NonContractionError halves the
/// window and doubles the shift, up to `max_halvings` times.
template <typename Attempt>
auto with_window_retry(const PicardOptions& po, double dt, double shift, Attempt&& attempt) {
  int window_steps = std::max(1, static_cast<int>(std::llround(po.window / dt)));
  for (int halvings = 0;; ++halvings) {
    try {
      return attempt(window_steps, shift);
    } catch (const NonContractionError&) {
      if (halvings >= po.max_halvings || window_steps == 1) throw;
      window_steps = std::max(1, window_steps / 2);
      shift *= 2.0;
    }
  }
}

/// Tracks successive sup-norm differences and flags divergence.
struct ContractionMonitor {
  double first = -1.0;
  int growth = 0;
  double last = std::numeric_limits<double>::infinity();

  void observe(double diff) {
    if (!std::isfinite(diff)) throw NonContractionError("picard: iterate diverged (non-finite)");
    if (first < 0.0) first = diff;
    growth = diff > last ? growth + 1 : 0;
    last = diff;
    if (diff > 1e6 * std::max(first, 1e-300) || growth >= 5)
      throw NonContractionError("picard: successive differences are growing");
  }
};

}  // namespace detail

/// Windowed Picard iteration of the shifted loop-A maps on the homogenized
/// system. Returns the trajectory; iteration counts go into metadata.
inline Trajectory picard_solve_loop_a(const LoopAParams& pa, const Profile& u1_0, const Profile& u2_0,
                                      const DisturbanceSignal& d, const SimulationOptions& opts = {},
                                      const PicardOptions& po = {}) {
  pa.validate();
  detail::check_loop_a_compat(u1_0, d);
  const Grid& g = opts.grid;
  const int steps = g.steps();
  const double h = g.dt;
  const auto N = static_cast<std::size_t>(opts.modes);
  const EigenSystem es = EigenSystem::dirichlet_dirichlet(pa.K, opts.modes);
  const CompositeGauss rule(opts.quad_panels);
  const WeightFunction eta = opts.weight.value_or(detail::default_weight_a(pa));
  const double default_shift = std::max(1.0, 2.0 * (2.0 * std::abs(pa.r * pa.b_tilde)));
  const double shift0 = po.shift.value_or(default_shift);

  Trajectory tr;
  tr.loop = "A";
  tr.solver = "picard";
  tr.z = g.nodes();
  const std::size_t nz = tr.z.size();
  const auto S = detail::synthesis_matrix(es, tr.z);
  const auto P = detail::grid_projector(es, nz, rule);
  const std::vector<double> e = es.project([](double z) { return 1.0 - z; }, rule);

  // window start state: w1 modal coefficients, u2 on the grid
  const double d_start = d(0.0);
  std::vector<double> c_start = es.project([&](double z) { return u1_0(z) - (1.0 - z) * d_start; }, rule);
  std::vector<double> u2_start = detail::sample_profile(u2_0, tr.z);

  auto record = [&](double t, std::vector<double> w1, std::vector<double> w2) {
    const double dv = d(t);
    for (std::size_t i = 0; i < nz; ++i) w1[i] += (1.0 - tr.z[i]) * dv;
    tr.max_boundary_residual = std::max({tr.max_boundary_residual, std::abs(w1.front() - dv), std::abs(w1.back())});
    tr.push(t, std::move(w1), std::move(w2), eta);
  };
  {
    std::vector<double> w1(nz);
    detail::synthesize_into(S, N, c_start, w1);
    record(0.0, std::move(w1), u2_start);
  }

  int total_iterations = 0;
  int windows = 0;
  int step = 0;
  std::string shift_used;
  while (step < steps) {
    const double t0 = step * h;
    auto attempt = [&](int window_steps, double shift) {
      const int J = std::min(window_steps, steps - step);
      const std::size_t nt = static_cast<std::size_t>(J) + 1;
      std::vector<double> v1(nt * nz, 0.0), v2(nt * nz, 0.0), v1n(nt * nz), v2n(nt * nz);
      std::vector<double> coeff(N), proj(N), g0(N), g1(N), col(nz);
      std::vector<ExpLinearWeights> wm(N);
      for (std::size_t n = 0; n < N; ++n) wm[n] = exp_linear_weights(es.eigenvalues()[n] + shift, h);
      const ExpLinearWeights w2w = exp_linear_weights(pa.b_tilde + shift, h);
      // f1 modal part and f2 nodal part, already multiplied by exp(-shift tau)
      std::vector<double> f1s(nt), f2s(nt);
      for (std::size_t jj = 0; jj < nt; ++jj) {
        const double tau = static_cast<double>(jj) * h;
        const double ta = t0 + tau;
        const double damp = std::exp(-shift * tau);
        f1s[jj] = -damp * (d.derivative(ta) + pa.K * d(ta));
        f2s[jj] = damp * pa.a_tilde * d(ta);
      }
      detail::ContractionMonitor mon;
      int it = 0;
      for (;; ++it) {
        if (it >= po.max_iterations) throw NonContractionError("picard: no convergence within iteration limit");
        // R1: modal recursion driven by r b v2 + f1
        coeff = c_start;
        auto modal_g = [&](std::size_t jj, std::vector<double>& gout) {
          detail::apply_rows(P, N, nz, std::span<const double>(v2.data() + jj * nz, nz), proj);
          for (std::size_t n = 0; n < N; ++n) gout[n] = pa.r * pa.b_tilde * proj[n] + e[n] * f1s[jj];
        };
        detail::synthesize_into(S, N, coeff, std::span<double>(v1n.data(), nz));
        modal_g(0, g0);
        for (std::size_t jj = 1; jj < nt; ++jj) {
          modal_g(jj, g1);
          for (std::size_t n = 0; n < N; ++n) coeff[n] = wm[n].decay * coeff[n] + wm[n].w0 * g0[n] + wm[n].w1 * g1[n];
          detail::synthesize_into(S, N, coeff, std::span<double>(v1n.data() + jj * nz, nz));
          g0.swap(g1);
        }
        // R2: nodal recursion driven by a v1 + f2
        for (std::size_t i = 0; i < nz; ++i) v2n[i] = u2_start[i];
        for (std::size_t jj = 1; jj < nt; ++jj)
          for (std::size_t i = 0; i < nz; ++i) {
            const double ga = pa.a_tilde * v1[(jj - 1) * nz + i] + (1.0 - tr.z[i]) * f2s[jj - 1];
            const double gb = pa.a_tilde * v1[jj * nz + i] + (1.0 - tr.z[i]) * f2s[jj];
            v2n[jj * nz + i] = w2w.decay * v2n[(jj - 1) * nz + i] + w2w.w0 * ga + w2w.w1 * gb;
          }
        double diff = 0.0;
        for (std::size_t k2 = 0; k2 < v1.size(); ++k2)
          diff = std::max({diff, std::abs(v1n[k2] - v1[k2]), std::abs(v2n[k2] - v2[k2])});
        v1.swap(v1n);
        v2.swap(v2n);
        if (diff <= po.tolerance) break;
        mon.observe(diff);
      }
      total_iterations += it + 1;
      shift_used = std::to_string(shift);
      // undo the shift and emit
      for (std::size_t jj = 1; jj < nt; ++jj) {
        const double grow = std::exp(shift * static_cast<double>(jj) * h);
        std::vector<double> w1(nz), w2(nz);
        for (std::size_t i = 0; i < nz; ++i) {
          w1[i] = grow * v1[jj * nz + i];
          w2[i] = grow * v2[jj * nz + i];
        }
        if (detail::store_step(step + static_cast<int>(jj), steps, opts.store_every))
          record(t0 + static_cast<double>(jj) * h, w1, w2);
        if (jj + 1 == nt) {
          // restart data: recover modal coefficients by re-running the
          // converged modal recursion
          u2_start = w2;
        }
      }
      // modal restart coefficients from the converged v2
      coeff = c_start;
      auto modal_g = [&](std::size_t jj, std::vector<double>& gout) {
        detail::apply_rows(P, N, nz, std::span<const double>(v2.data() + jj * nz, nz), proj);
        for (std::size_t n = 0; n < N; ++n) gout[n] = pa.r * pa.b_tilde * proj[n] + e[n] * f1s[jj];
      };
      modal_g(0, g0);
      for (std::size_t jj = 1; jj < nt; ++jj) {
        modal_g(jj, g1);
        for (std::size_t n = 0; n < N; ++n) coeff[n] = wm[n].decay * coeff[n] + wm[n].w0 * g0[n] + wm[n].w1 * g1[n];
        g0.swap(g1);
      }
      const double grow = std::exp(shift * static_cast<double>(J) * h);
      for (std::size_t n = 0; n < N; ++n) coeff[n] *= grow;
      return std::make_pair(J, coeff);
    };
    auto [J, coeff] = detail::with_window_retry(po, h, shift0, attempt);
    c_start = std::move(coeff);
    step += J;
    ++windows;
  }
  tr.metadata["picard_iterations"] = std::to_string(total_iterations);
  tr.metadata["picard_windows"] = std::to_string(windows);
  tr.metadata["picard_shift"] = shift_used;
  return tr;
}

/// Windowed Picard iteration of the shifted loop-B maps. The transport part
/// reads the boundary trace of the current iterate inside the window and the
/// converged trace of earlier windows outside it.
inline Trajectory picard_solve_loop_b(const LoopBParams& pb, const Profile& u1_0, const Profile& u2_0,
                                      const SimulationOptions& opts = {}, const PicardOptions& po = {}) {
  pb.validate();
  detail::check_loop_b_compat(pb, u1_0, u2_0);
  const Grid& g = opts.grid;
  const int steps = g.steps();
  const double h = g.dt;
  const double cs = pb.transport_speed;
  const double k = pb.boundary_gain;
  const auto N = static_cast<std::size_t>(opts.modes);
  const EigenSystem es = EigenSystem::dirichlet_robin(pb.diffusion, pb.reaction, pb.robin_q, opts.modes);
  const CompositeGauss rule(opts.quad_panels);
  const WeightFunction eta = opts.weight.value_or(detail::default_weight_b(pb));
  const auto G = detail::kernel_modal_matrix(es, pb.kernel, rule);
  const bool coupled = !pb.kernel.is_zero();
  const std::size_t Q = rule.size();
  const double default_shift = 2.0 * (std::abs(k) * kernel_abs_row_max(pb.kernel, 101, 4) + 1.0);
  const double shift0 = po.shift.value_or(default_shift);

  Trajectory tr;
  tr.loop = "B";
  tr.solver = "picard";
  tr.z = g.nodes();
  const std::size_t nz = tr.z.size();
  const auto S = detail::synthesis_matrix(es, tr.z);
  std::vector<double> phi_at_1(N), robin_row(N);
  for (std::size_t n = 0; n < N; ++n) {
    phi_at_1[n] = es.phi(n + 1, 1.0);
    robin_row[n] = es.dphi(n + 1, 1.0) - pb.robin_q * es.phi(n + 1, 1.0);
  }

  // converged boundary trace u1(t_m, 1) at every time node so far
  std::vector<double> trace_hist{u1_0(1.0)};
  auto past_trace = [&](double t) {
    // cubic Lagrange on the uniform time nodes 0..t_last
    const std::size_t n = trace_hist.size();
    if (n == 1) return trace_hist[0];
    const double span_t = static_cast<double>(n - 1) * h;
    return interpolate_uniform(trace_hist, std::clamp(t / span_t, 0.0, 1.0));
  };

  std::vector<double> c_start = es.project([&](double z) { return u1_0(z); }, rule);

  {
    std::vector<double> p1(nz), p2(nz);
    detail::synthesize_into(S, N, c_start, p1);
    for (std::size_t i = 0; i < nz; ++i) p2[i] = u2_0(tr.z[i]);
    tr.max_boundary_residual = std::max(tr.max_boundary_residual, std::abs(p1.front()));
    tr.push(0.0, std::move(p1), std::move(p2), eta);
  }

  int total_iterations = 0, windows = 0, step = 0;
  std::string shift_used;
  while (step < steps) {
    const double t0 = step * h;
    // u2 at window start, through characteristics into the converged past
    auto u2_window_start = [&](double x) {
      if (cs * t0 > x) return k * past_trace(t0 - x / cs);
      return u2_0(x - cs * t0);
    };
    auto attempt = [&](int window_steps, double shift) {
      const int J = std::min(window_steps, steps - step);
      const std::size_t nt = static_cast<std::size_t>(J) + 1;
      const double W = static_cast<double>(J) * h;
      std::vector<ExpLinearWeights> wm(N);
      for (std::size_t n = 0; n < N; ++n) wm[n] = exp_linear_weights(es.eigenvalues()[n] + shift, h);
      // iterate on the shifted trace v1(t_j, 1) and coefficients
      std::vector<double> trace(nt, 0.0), trace_new(nt);
      std::vector<double> coeffs(nt * N, 0.0), coeffs_new(nt * N);
      std::vector<double> v2q(Q), F0(N), F1(N);
      auto v2_at = [&](const std::vector<double>& tv, std::size_t jj, double x) {
        const double t = static_cast<double>(jj) * h;
        if (cs * t > x) {
          const double tau = t - x / cs;
          const double v1 = nt == 1 ? tv[0] : interpolate_uniform(tv, tau / W);
          return k * std::exp(-shift * x / cs) * v1;
        }
        return std::exp(-shift * t) * u2_window_start(x - cs * t);
      };
      auto forcing = [&](const std::vector<double>& tv, std::size_t jj, std::vector<double>& F) {
        if (!coupled) {
          std::fill(F.begin(), F.end(), 0.0);
          return;
        }
        for (std::size_t q = 0; q < Q; ++q) v2q[q] = v2_at(tv, jj, rule.nodes()[q]);
        detail::apply_rows(G, N, Q, v2q, F);
      };
      detail::ContractionMonitor mon;
      std::vector<double> v1prev(nt * nz, 0.0), v1cur(nt * nz), v2prev(nt * nz, 0.0), v2cur(nt * nz);
      int it = 0;
      for (;; ++it) {
        if (it >= po.max_iterations) throw NonContractionError("picard: no convergence within iteration limit");
        std::copy(c_start.begin(), c_start.end(), coeffs_new.begin());
        forcing(trace, 0, F0);
        for (std::size_t jj = 1; jj < nt; ++jj) {
          forcing(trace, jj, F1);
          for (std::size_t n = 0; n < N; ++n)
            coeffs_new[jj * N + n] =
                wm[n].decay * coeffs_new[(jj - 1) * N + n] + wm[n].w0 * F0[n] + wm[n].w1 * F1[n];
          F0.swap(F1);
        }
        for (std::size_t jj = 0; jj < nt; ++jj) {
          double acc = 0.0;
          for (std::size_t n = 0; n < N; ++n) acc += phi_at_1[n] * coeffs_new[jj * N + n];
          trace_new[jj] = acc;
          detail::synthesize_into(S, N, std::span<const double>(coeffs_new.data() + jj * N, N),
                                  std::span<double>(v1cur.data() + jj * nz, nz));
          for (std::size_t i = 0; i < nz; ++i) v2cur[jj * nz + i] = v2_at(trace, jj, tr.z[i]);
        }
        double diff = 0.0;
        for (std::size_t k2 = 0; k2 < v1cur.size(); ++k2)
          diff = std::max({diff, std::abs(v1cur[k2] - v1prev[k2]), std::abs(v2cur[k2] - v2prev[k2])});
        v1prev.swap(v1cur);
        v2prev.swap(v2cur);
        trace.swap(trace_new);
        coeffs.swap(coeffs_new);
        if (diff <= po.tolerance && it > 0) break;
        if (it > 0) mon.observe(diff);
      }
      total_iterations += it + 1;
      shift_used = std::to_string(shift);
      std::vector<double> unshifted_trace(nt);
      for (std::size_t jj = 0; jj < nt; ++jj) unshifted_trace[jj] = std::exp(shift * static_cast<double>(jj) * h) * trace[jj];
      // emit with the converged trace (v2 uses the same trace as v1)
      for (std::size_t jj = 1; jj < nt; ++jj) {
        const double grow = std::exp(shift * static_cast<double>(jj) * h);
        std::vector<double> p1(nz), p2(nz);
        for (std::size_t i = 0; i < nz; ++i) {
          p1[i] = grow * v1prev[jj * nz + i];
          p2[i] = grow * v2_at(trace, jj, tr.z[i]);
        }
        double robin = 0.0;
        for (std::size_t n = 0; n < N; ++n) robin += robin_row[n] * coeffs[jj * N + n];
        const double res = std::max({std::abs(p1.front()), grow * std::abs(robin),
                                     std::abs(p2.front() - k * unshifted_trace[jj])});
        tr.max_boundary_residual = std::max(tr.max_boundary_residual, res);
        if (detail::store_step(step + static_cast<int>(jj), steps, opts.store_every))
          tr.push(t0 + static_cast<double>(jj) * h, std::move(p1), std::move(p2), eta);
      }
      std::vector<double> c_end(N);
      const double grow = std::exp(shift * W);
      for (std::size_t n = 0; n < N; ++n) c_end[n] = grow * coeffs[J * N + n];
      return std::make_tuple(J, c_end, unshifted_trace);
    };
    auto [J, c_end, new_trace] = detail::with_window_retry(po, h, shift0, attempt);
    c_start = std::move(c_end);
    for (std::size_t jj = 1; jj < new_trace.size(); ++jj) trace_hist.push_back(new_trace[jj]);
    step += J;
    ++windows;
  }
  tr.metadata["picard_iterations"] = std::to_string(total_iterations);
  tr.metadata["picard_windows"] = std::to_string(windows);
  tr.metadata["picard_shift"] = shift_used;
  return tr;
}

}  // namespace pdeloop
