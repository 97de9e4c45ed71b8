#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pdeloop/verify.hpp"

using namespace pdeloop;

namespace {
std::vector<double> times(double T, int n) {
  std::vector<double> t(n + 1);
  for (int i = 0; i <= n; ++i) t[i] = T * i / n;
  return t;
}

SimulationOptions coarse(double T) {
  SimulationOptions o;
  o.grid = {101, 2e-3, T};
  o.modes = 32;
  o.store_every = 5;
  return o;
}
}  // namespace

TEST(FitDecay, PureExponential) {
  const auto t = times(5.0, 500);
  std::vector<double> y;
  for (double x : t) y.push_back(std::exp(-2 * x));
  const auto f = fit_decay(t, y);
  EXPECT_NEAR(f.delta_hat, 2.0, 1e-6);
  EXPECT_NEAR(f.M_hat, 1.0, 1e-9);
}

TEST(FitDecay, TwoExponentialsMatchLeastSquares) {
  const auto t = times(5.0, 500);
  std::vector<double> y, wx, wy;
  for (double x : t) {
    y.push_back(2 * std::exp(-x) + std::exp(-5 * x));
    if (x >= 1.0 - 1e-12) {
      wx.push_back(x);
      wy.push_back(std::log(y.back()));
    }
  }
  const auto f = fit_decay(t, y, 1.0, 5.0);
  const double slope = oracle::ls_line(wx, wy).second;
  EXPECT_NEAR(f.delta_hat, -slope, 1e-10);
  EXPECT_GE(f.delta_hat, 1.0);
  EXPECT_LE(f.delta_hat, 1.01);
  // the fitted envelope bounds every sample
  for (std::size_t j = 0; j < t.size(); ++j) EXPECT_LE(y[j], f.M_hat * std::exp(-f.delta_hat * t[j]) * y[0] * (1 + 1e-12));
}

TEST(FitDecay, ConstantAndGrowth) {
  const auto t = times(4.0, 400);
  EXPECT_NEAR(fit_decay(t, std::vector<double>(t.size(), 3.0)).delta_hat, 0.0, 1e-9);
  std::vector<double> g;
  for (double x : t) g.push_back(std::exp(0.5 * x));
  EXPECT_NEAR(fit_decay(t, g).delta_hat, -0.5, 1e-9);
  EXPECT_THROW(fit_decay(std::vector<double>{0, 1}, std::vector<double>{1, 1}), std::invalid_argument);
}

TEST(IssBound, ZeroData) {
  const auto tr = simulate_loop_a({1, 1, 1, 1}, Profile::zero(), Profile::zero(), {}, coarse(1.0));
  const auto r = check_iss_bound(tr, 1.0, 1.0, 0.0, DisturbanceSignal{});
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.samples, tr.size());
}

TEST(IssBound, CertifiedLoopAWithSinusoid) {
  const LoopAParams pa{1.0, 1.0, 2.0, 1.5};
  ASSERT_TRUE(check_loop_a(pa).pass);
  const auto iss = optimize_iss_loop_a(pa);
  ASSERT_TRUE(iss.small_gain);
  const auto u1 = Profile::sine(1.0), u2 = Profile::sine(0.5);
  const auto free_run = simulate_loop_a(pa, u1, u2, {}, coarse(10.0));
  const auto fit = fit_decay(free_run);
  EXPECT_GT(fit.delta_hat, 0.0);
  const auto d = make_disturbance("sinusoid", 0.5, 2 * kPi, 0.0);
  const auto forced = simulate_loop_a(pa, u1, u2, d, coarse(10.0));
  const auto r = check_iss_bound(forced, fit.M_hat, fit.delta_hat, iss.gamma, d);
  EXPECT_EQ(r.violations, 0u) << "max excess " << r.max_excess;
  // a far too small gain is caught
  EXPECT_GT(check_iss_bound(forced, fit.M_hat, fit.delta_hat, 1e-3, d).violations, 0u);
  EXPECT_THROW(check_iss_bound(forced, 1.0, 1.0, kInf, d), std::invalid_argument);
}

TEST(WeightedParabolicBound, PureParabolicWithBoundaryDisturbance) {
  const LoopAParams pa{1.0, 0.0, 0.0, 1.0};
  const auto d = make_disturbance("sinusoid", 0.1, 2 * kPi, 0.0);
  auto o = coarse(3.0);
  o.grid.n_z = 201;
  o.store_every = 1;
  const auto tr = simulate_loop_a(pa, Profile::sine(1.0), Profile::zero(), d, o);
  for (double theta : {0.2, 0.6, 1.2}) {
    const auto r = check_weighted_parabolic_bound(tr, pa, theta, d);
    EXPECT_EQ(r.violations, 0u) << "theta " << theta << " excess " << r.max_excess;
  }
}

TEST(Sharpness, EqualityIsStationary) {
  const LoopAParams pa{1.0, 1.0, 1.0 + kPi * kPi, 1.0};
  EXPECT_NEAR(sharpness_mode(pa).mu, 0.0, 1e-12);
  const auto r = sharpness_probe(pa, coarse(1.0));
  EXPECT_LE(r.drift, 0.01);
}

TEST(Sharpness, RootMatchesQuadraticFormula) {
  for (double extra : {1.0, 5.0, 30.0}) {
    const LoopAParams pa{2.0, 1.5, (2.0 + kPi * kPi + extra) / 1.5, 0.7};
    EXPECT_NEAR(sharpness_mode(pa).mu, oracle::dispersion_root(2.0, 0.7, 0.7 * pa.coupling()), 1e-12);
  }
  EXPECT_THROW(sharpness_mode({1.0, 1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST(Sharpness, GrowthAboveThreshold) {
  const LoopAParams pa{1.0, 1.0, 2.0 + kPi * kPi, 1.0};
  const auto r = sharpness_probe(pa, coarse(1.0));
  EXPECT_NEAR(r.fitted_growth, r.mode.mu, 0.02 * r.mode.mu);
}

TEST(DelaySweep, ZeroKernelDecaysAtFirstEigenvalue) {
  LoopBParams pb;
  pb.boundary_gain = 0.8;
  pb.kernel = Kernel::named("zero");
  const Profile u1{[](double z) { return std::sin(kPi * z / 2); }, "mode 1"};
  const auto u2 = Profile::linear(0.8, 0.8);
  const auto rows = delay_independence_sweep(pb, {4.0}, u1, u2, coarse(4.0));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].fit.delta_hat, kPi * kPi / 4, 1e-3 * kPi * kPi / 4);
  EXPECT_THROW(delay_independence_sweep(pb, {0.0}, u1, u2, coarse(1.0)), std::invalid_argument);
}

TEST(Magnification, NeutralStringReachesUnitGain) {
  const WaveKVParams wp{1.0, 1.0, 1.0};
  const auto r = magnification_probe(wp, 0.3, 0.5, 20.0, coarse(1.0));
  EXPECT_EQ(r.s, 0.0);
  EXPECT_NEAR(r.g_bound, 1.0, 1e-6);
  EXPECT_GE(r.empirical_gain, 1.0 - 1e-3);
  EXPECT_LE(r.empirical_gain, 1.2);
  EXPECT_LE(r.empirical_gain, r.gamma_certified);
  EXPECT_EQ(magnification_probe(wp, 0.0, 0.5, 2.0, coarse(1.0)).empirical_gain, 0.0);
  EXPECT_THROW(magnification_probe({1.0, kPi, 0.0}, 0.3, 0.5, 2.0), std::invalid_argument);
}
