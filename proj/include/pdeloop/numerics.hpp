#pragma once

// Small numerical building blocks shared by the spectral, solver and
// certification layers: composite Gauss-Legendre quadrature on [0,1],
// local cubic interpolation on uniform grids, and exact integration of
// exp(-lambda (h - s)) against piecewise-linear forcing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace pdeloop {

inline constexpr double kPi = 3.14159265358979323846;

/// Composite Gauss-Legendre rule on [0,1] with 64 nodes per panel.
class CompositeGauss {
 public:
  explicit CompositeGauss(int panels = 8) {
    if (panels < 1) throw std::invalid_argument("CompositeGauss: panels must be >= 1");
    using Rule = boost::math::quadrature::gauss<double, 64>;
    const auto& abscissa = Rule::abscissa();
    const auto& weights = Rule::weights();
    const double width = 1.0 / panels;
    nodes_.reserve(static_cast<std::size_t>(panels) * 64);
    weights_.reserve(nodes_.capacity());
    for (int p = 0; p < panels; ++p) {
      const double mid = (p + 0.5) * width;
      const double half = 0.5 * width;
      // boost stores the non-negative half of the symmetric node set.
      for (std::size_t i = abscissa.size(); i-- > 0;) {
        nodes_.push_back(mid - half * abscissa[i]);
        weights_.push_back(half * weights[i]);
      }
      for (std::size_t i = 0; i < abscissa.size(); ++i) {
        nodes_.push_back(mid + half * abscissa[i]);
        weights_.push_back(half * weights[i]);
      }
    }
  }

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return nodes_.size(); }

  template <typename F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) acc += weights_[i] * f(nodes_[i]);
    return acc;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Uniform nodes z_i = i/(n-1) on [0,1].
inline std::vector<double> uniform_nodes(int n) {
  if (n < 2) throw std::invalid_argument("uniform_nodes: need at least 2 nodes");
  std::vector<double> z(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
  return z;
}

/// Four-point Lagrange weights for evaluating samples on a uniform [0,1] grid
/// at x. Writes the first stencil index to `first`.
inline void cubic_stencil(std::size_t n, double x, std::size_t& first, double w[4]) {
  const double h = 1.0 / static_cast<double>(n - 1);
  if (n < 4) {
    // linear fallback
    double pos = std::clamp(x / h, 0.0, static_cast<double>(n - 1));
    std::size_t i = std::min(static_cast<std::size_t>(pos), n - 2);
    const double s = pos - static_cast<double>(i);
    first = i;
    w[0] = 1.0 - s;
    w[1] = s;
    w[2] = w[3] = 0.0;
    return;
  }
  const double pos = std::clamp(x / h, 0.0, static_cast<double>(n - 1));
  auto i = static_cast<std::ptrdiff_t>(std::floor(pos));
  i = std::clamp<std::ptrdiff_t>(i - 1, 0, static_cast<std::ptrdiff_t>(n) - 4);
  first = static_cast<std::size_t>(i);
  const double s = pos - static_cast<double>(i);  // local coordinate, nodes at 0,1,2,3
  w[0] = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
  w[1] = s * (s - 2.0) * (s - 3.0) / 2.0;
  w[2] = -s * (s - 1.0) * (s - 3.0) / 2.0;
  w[3] = s * (s - 1.0) * (s - 2.0) / 6.0;
}

/// Local cubic interpolation of samples given on the uniform grid of [0,1].
inline double interpolate_uniform(std::span<const double> values, double x) {
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("interpolate_uniform: empty sample set");
  if (n == 1) return values[0];
  std::size_t first = 0;
  double w[4];
  cubic_stencil(n, x, first, w);
  const std::size_t width = n < 4 ? 2 : 4;
  double acc = 0.0;
  for (std::size_t k = 0; k < width; ++k) acc += w[k] * values[first + k];
  return acc;
}

/// Weights for advancing y' = -lambda y + g(s), g linear on [0, h]:
///   y(h) = decay * y(0) + w0 * g(0) + w1 * g(h).
struct ExpLinearWeights {
  double decay;
  double w0;
  double w1;
};

inline ExpLinearWeights exp_linear_weights(double lambda, double h) {
  const double x = lambda * h;
  double phi1 = 0.0;  // (1 - e^{-x}) / x
  double phi2 = 0.0;  // (x - 1 + e^{-x}) / x^2
  if (std::abs(x) < 1e-2) {
    // Taylor series, enough terms for double precision at |x| < 1e-2
    double term1 = 1.0, term2 = 0.5;
    phi1 = 0.0;
    phi2 = 0.0;
    double xp = 1.0;
    double fact = 1.0;
    for (int k = 0; k < 10; ++k) {
      // phi1 = sum (-x)^k/(k+1)!, phi2 = sum (-x)^k/(k+2)!
      fact *= (k + 1);
      term1 = xp / fact;
      term2 = xp / (fact * (k + 2));
      phi1 += term1;
      phi2 += term2;
      xp *= -x;
    }
  } else {
    const double em1 = -std::expm1(-x);  // 1 - e^{-x}
    phi1 = em1 / x;
    phi2 = (x - em1) / (x * x);
  }
  return {std::exp(-x), h * (phi1 - phi2), h * phi2};
}

inline double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace pdeloop
