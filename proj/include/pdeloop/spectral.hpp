#pragma once

// Sturm-Liouville eigensystems of the two boundary-condition families used by
// the loops, sine weight functions and the weighted sup norm.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <functional>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>
#include <fmt/format.h>

#include "pdeloop/certificate.hpp"
#include "pdeloop/numerics.hpp"

namespace pdeloop {

/// Roots omega_n of omega cot(omega) = q in ((n-1) pi, n pi), n = 1..count.
inline std::vector<double> robin_frequencies(double q, int count) {
  if (!(q < 1.0)) throw std::domain_error("robin_frequencies: q must be < 1");
  if (count < 1) throw std::invalid_argument("robin_frequencies: count must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 1; n <= count; ++n) {
    if (q == 0.0) {
      out.push_back((2 * n - 1) * kPi / 2.0);
      continue;
    }
    constexpr double eps = 1e-9;
    const double lo = (n - 1) * kPi + eps;
    const double hi = n * kPi - eps;
    auto f = [q](double w) { return w * std::cos(w) / std::sin(w) - q; };
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * std::max(1.0, std::abs(a)); };
    std::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
    out.push_back(0.5 * (a + b));
  }
  return out;
}

/// Offsets b_n = (2n-1) pi/2 - omega_n, each in (-pi/2, pi/2).
inline std::vector<double> robin_offsets(double q, int count) {
  auto w = robin_frequencies(q, count);
  std::vector<double> b(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    b[i] = q == 0.0 ? 0.0 : (2 * n - 1) * kPi / 2.0 - w[i];
  }
  return b;
}

/// Truncated orthonormal eigensystem phi_n(z) = A_n sin(omega_n z).
class EigenSystem {
 public:
  enum class Family { DirichletDirichlet, DirichletRobin };

  Family family() const { return family_; }
  std::size_t count() const { return eigenvalues_.size(); }
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const std::vector<double>& frequencies() const { return frequencies_; }
  const std::vector<double>& offsets() const { return offsets_; }
  const std::vector<double>& normalizers() const { return normalizers_; }
  /// Normalizers as printed in closed form; kept for comparison only.
  const std::vector<double>& printed_normalizers() const { return printed_normalizers_; }
  const std::vector<std::string>& notes() const { return notes_; }

  double diffusion() const { return diffusion_; }
  /// Zero-order coefficient of the operator -p u'' + potential u.
  double potential() const { return potential_; }
  double robin_q() const { return robin_q_; }

  /// 1-based mode index.
  double phi(std::size_t n, double z) const {
    return normalizers_[n - 1] * std::sin(frequencies_[n - 1] * z);
  }
  double dphi(std::size_t n, double z) const {
    return normalizers_[n - 1] * frequencies_[n - 1] * std::cos(frequencies_[n - 1] * z);
  }

  /// Operator -p u'' + potential u on [0,1] with the family's boundary conditions.
  static EigenSystem dirichlet_dirichlet(double K, int count) {
    if (count < 1) throw std::invalid_argument("eigensystem: count must be >= 1");
    EigenSystem es;
    es.family_ = Family::DirichletDirichlet;
    es.diffusion_ = 1.0;
    es.potential_ = K;
    for (int n = 1; n <= count; ++n) {
      const double w = n * kPi;
      es.frequencies_.push_back(w);
      es.offsets_.push_back(0.0);
      es.eigenvalues_.push_back(K + w * w);
      es.normalizers_.push_back(std::sqrt(2.0));
      es.printed_normalizers_.push_back(std::sqrt(2.0));
    }
    return es;
  }

  /// -p u'' - a u with u(0) = 0, u'(1) = q u(1).
  static EigenSystem dirichlet_robin(double p, double a, double q, int count) {
    if (!(p > 0.0)) throw std::invalid_argument("eigensystem: p must be > 0");
    EigenSystem es;
    es.family_ = Family::DirichletRobin;
    es.diffusion_ = p;
    es.potential_ = -a;
    es.robin_q_ = q;
    es.frequencies_ = robin_frequencies(q, count);
    es.offsets_ = robin_offsets(q, count);
    for (int n = 1; n <= count; ++n) {
      const double w = es.frequencies_[static_cast<std::size_t>(n - 1)];
      const double b = es.offsets_[static_cast<std::size_t>(n - 1)];
      es.eigenvalues_.push_back(p * w * w - a);
      // int_0^1 sin^2(w z) dz = 1/2 - sin(2w)/(4w)
      const double A = std::sqrt(4.0 * w / (2.0 * w - std::sin(2.0 * w)));
      es.normalizers_.push_back(A);
      const double m = (2 * n - 1) * kPi;
      const double printed = std::sqrt((2.0 * m - 4.0 * b) / (m - 2.0 * b - std::sin(m - 2.0 * b)));
      es.printed_normalizers_.push_back(printed);
      if (std::abs(printed - A) > 1e-10 * A) {
        std::ostringstream os;
        os << "normalizer mismatch at n=" << n << ": unit-norm " << A << " vs closed form " << printed;
        es.notes_.push_back(os.str());
      }
    }
    return es;
  }

  /// Coefficients <phi_n, f> for n = 1..count.
  template <typename F>
  std::vector<double> project(F&& f, const CompositeGauss& rule) const {
    std::vector<double> fv(rule.size());
    for (std::size_t j = 0; j < rule.size(); ++j) fv[j] = f(rule.nodes()[j]);
    std::vector<double> c(count(), 0.0);
    for (std::size_t n = 1; n <= count(); ++n) {
      double acc = 0.0;
      for (std::size_t j = 0; j < rule.size(); ++j) acc += rule.weights()[j] * phi(n, rule.nodes()[j]) * fv[j];
      c[n - 1] = acc;
    }
    return c;
  }

  std::vector<double> synthesize(std::span<const double> coeffs, std::span<const double> z) const {
    std::vector<double> out(z.size(), 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
      double acc = 0.0;
      for (std::size_t n = 1; n <= std::min(count(), coeffs.size()); ++n) acc += coeffs[n - 1] * phi(n, z[i]);
      out[i] = acc;
    }
    return out;
  }

  /// CSV with columns n,b_n,lambda_n,A_n.
  std::string to_csv() const;

 private:
  Family family_ = Family::DirichletDirichlet;
  double diffusion_ = 1.0;
  double potential_ = 0.0;
  double robin_q_ = 0.0;
  std::vector<double> eigenvalues_;
  std::vector<double> frequencies_;
  std::vector<double> offsets_;
  std::vector<double> normalizers_;
  std::vector<double> printed_normalizers_;
  std::vector<std::string> notes_;
};

inline std::string EigenSystem::to_csv() const {
  std::string out = "n,b_n,lambda_n,A_n\n";
  for (std::size_t i = 0; i < count(); ++i)
    out += fmt::format("{},{:.16e},{:.16e},{:.16e}\n", i + 1, offsets_[i], eigenvalues_[i], normalizers_[i]);
  return out;
}

inline EigenSystem eigensystem_dirichlet_robin(double p, double a, double q, int count) {
  return EigenSystem::dirichlet_robin(p, a, q, count);
}

inline EigenSystem eigensystem_dirichlet_dirichlet(double K, int count) {
  return EigenSystem::dirichlet_dirichlet(K, count);
}

/// eta(z) = sin(theta + omega z) with the decay constant sigma of the owning
/// problem.
class WeightFunction {
 public:
  WeightFunction() : WeightFunction(kPi / 2.0, 0.0, 1.0) {}
  WeightFunction(double theta, double omega, double sigma) : theta_(theta), omega_(omega), sigma_(sigma) {
    if (!(theta > 0.0) || !(omega >= 0.0) || !(theta + omega < kPi))
      throw std::invalid_argument("WeightFunction: need theta > 0, omega >= 0, theta + omega < pi");
  }

  /// Weight for the Dirichlet-Dirichlet loop: omega = pi - 2 theta, sigma = K + omega^2.
  static WeightFunction loop_a(double theta, double K) {
    if (!(theta > 0.0 && theta < kPi / 2.0))
      throw std::invalid_argument("WeightFunction::loop_a: theta must lie in (0, pi/2)");
    const double omega = kPi - 2.0 * theta;
    return {theta, omega, K + omega * omega};
  }

  /// Weight for the Dirichlet-Robin loop: sigma = p omega^2 - a.
  static WeightFunction loop_b(double theta, double omega, double p, double a) {
    return {theta, omega, p * omega * omega - a};
  }

  double theta() const { return theta_; }
  double omega() const { return omega_; }
  double sigma() const { return sigma_; }

  double operator()(double z) const { return std::sin(theta_ + omega_ * z); }
  double d1(double z) const { return omega_ * std::cos(theta_ + omega_ * z); }
  double d2(double z) const { return -omega_ * omega_ * std::sin(theta_ + omega_ * z); }

  /// min and max of eta on [0,1]; eta is concave there so the minimum sits at
  /// an endpoint.
  double min_value() const { return std::min((*this)(0.0), (*this)(1.0)); }
  double max_value() const {
    const double peak = (kPi / 2.0 - theta_) / (omega_ == 0.0 ? 1.0 : omega_);
    if (omega_ > 0.0 && peak > 0.0 && peak < 1.0) return 1.0;
    return std::max((*this)(0.0), (*this)(1.0));
  }

 private:
  double theta_;
  double omega_;
  double sigma_;
};

/// max_i |u(z_i)| / eta(z_i).
inline double weighted_sup_norm(std::span<const double> profile, std::span<const double> z,
                                const WeightFunction& eta) {
  if (profile.size() != z.size()) throw std::invalid_argument("weighted_sup_norm: size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double w = eta(z[i]);
    if (!(w > 0.0)) throw std::domain_error("weighted_sup_norm: weight not positive on grid");
    m = std::max(m, std::abs(profile[i]) / w);
  }
  return m;
}

/// Sturm-Liouville operator -(p f')' + q f with boundary rows
/// b1 f(0) + b2 f'(0) = 0 and a1 f(1) + a2 f'(1) = 0.
struct SLSpec {
  std::function<double(double)> p = [](double) { return 1.0; };
  std::function<double(double)> dp = [](double) { return 0.0; };
  std::function<double(double)> q = [](double) { return 0.0; };
  double b1 = -1.0, b2 = 0.0;  // Dirichlet at z = 0
  double a1 = 1.0, a2 = 0.0;   // Dirichlet at z = 1

  void validate() const {
    if (std::abs(a1) + std::abs(a2) == 0.0 || std::abs(b1) + std::abs(b2) == 0.0)
      throw std::invalid_argument("SLSpec: degenerate boundary row");
    if (!(b2 > 0.0 || (b2 == 0.0 && b1 < 0.0)))
      throw std::invalid_argument("SLSpec: left boundary row violates the sign normalization");
    if (!(a2 > 0.0 || (a2 == 0.0 && a1 > 0.0)))
      throw std::invalid_argument("SLSpec: right boundary row violates the sign normalization");
  }

  static SLSpec loop_a(double K) {
    SLSpec s;
    s.q = [K](double) { return K; };
    return s;
  }
  /// -p u'' - a u with u(0) = 0, u'(1) - q u(1) = 0.
  static SLSpec loop_b(double p, double a, double robin_q) {
    SLSpec s;
    s.p = [p](double) { return p; };
    s.q = [a](double) { return -a; };
    s.a1 = -robin_q;
    s.a2 = 1.0;
    return s;
  }
};

struct H4Report {
  Certificate certificate;
  double differential_slack;  // min over nodes of -sigma eta - (p eta'' + p' eta' - q eta)
  double left_margin;         // -(b1 eta(0) + b2 eta'(0))
  double right_margin;        // a1 eta(1) + a2 eta'(1)
};

/// Checks the weight assumption on the given nodes. The differential
/// inequality is non-strict and is accepted with a relative slack of 1e-12;
/// both boundary inequalities are strict.
inline H4Report check_H4(const SLSpec& sl, const WeightFunction& eta, double sigma, std::span<const double> z) {
  sl.validate();
  double slack = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (double x : z) {
    const double lhs = sl.p(x) * eta.d2(x) + sl.dp(x) * eta.d1(x) - sl.q(x) * eta(x);
    const double rhs = -sigma * eta(x);
    slack = std::min(slack, rhs - lhs);
    scale = std::max({scale, std::abs(lhs), std::abs(rhs)});
  }
  const double left = -(sl.b1 * eta(0.0) + sl.b2 * eta.d1(0.0));
  const double right = sl.a1 * eta(1.0) + sl.a2 * eta.d1(1.0);
  const double tol = 1e-12 * std::max(1.0, scale);
  H4Report rep{Certificate::strict(ConditionId::WeightAssumption, 0.0, std::min({slack + tol, left, right})),
               slack, left, right};
  rep.certificate.witness.theta = eta.theta();
  rep.certificate.witness.omega = eta.omega();
  std::ostringstream os;
  os << "differential slack " << slack << ", boundary margins " << left << " / " << right;
  rep.certificate.notes.push_back(os.str());
  return rep;
}

}  // namespace pdeloop
