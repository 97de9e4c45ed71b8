#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pdeloop/certify.hpp"

using namespace pdeloop;

TEST(LoopACondition, Examples) {
  EXPECT_TRUE(check_loop_a({1.0, 0.0, 5.0, 1.0}).pass);
  const auto c = check_loop_a({0.0, 1.0, kPi * kPi, 1.0});
  EXPECT_FALSE(c.pass);
  EXPECT_EQ(c.margin, 0.0);
  EXPECT_EQ(to_string(c.condition), "A-2.7");
  EXPECT_TRUE(check_loop_a({0.0, -1.0, kPi * kPi - 1e-6, 1.0}).pass);
  const auto bad = check_loop_a({1.0, 1.0, 1.0, 0.0});
  EXPECT_FALSE(bad.pass);
  ASSERT_EQ(bad.notes.size(), 1u);
  EXPECT_NE(bad.notes[0].find("b_tilde"), std::string::npos);
}

TEST(KelvinVoigtCondition, Examples) {
  EXPECT_FALSE(check_wave_kv({1.0, kPi / std::sqrt(2.0), 0.0}).pass);
  EXPECT_TRUE(check_wave_kv({1.0, 1.0, 2.0}).pass);
  EXPECT_TRUE(check_wave_kv({1.0, 1.0, 1.0}).pass);
}

TEST(KelvinVoigtCondition, AgreesWithMappedLoopA) {
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      for (int k = 0; k < 12; ++k) {
        const WaveKVParams wp{0.1 + 0.4 * i, 0.2 + 0.7 * j, 0.5 * k};
        EXPECT_EQ(check_wave_kv(wp).pass, check_loop_a(kv_wave_to_loop_a(wp).params).pass);
      }
}

TEST(PositiveSpectrum, MatchesFirstEigenvalue) {
  for (double q : {0.0, 0.5, -1.5}) {
    const auto es = EigenSystem::dirichlet_robin(1.3, 0.0, q, 1);
    const double lam1 = es.eigenvalues()[0];
    EXPECT_TRUE(check_positive_spectrum(1.3, lam1 * (1 - 1e-9), q).pass);
    EXPECT_FALSE(check_positive_spectrum(1.3, lam1 * (1 + 1e-9), q).pass);
  }
  EXPECT_TRUE(check_positive_spectrum(1.0, -3.0, 0.0).pass);
}

TEST(ThetaOmega, ZeroKernel) {
  LoopBParams pb;
  pb.robin_q = 0.2;
  pb.reaction = 0.5;
  pb.boundary_gain = 3.0;
  pb.kernel = Kernel::named("zero");
  const auto s = find_theta_omega(pb);
  EXPECT_EQ(s.certificate.lhs, 0.0);
  EXPECT_TRUE(s.certificate.pass);
}

TEST(ThetaOmega, ConstantKernelThreshold) {
  // q = 0, p = 1, a = 0, b = beta: the supremum of omega^2 sin(theta)/sin(omega+theta)
  // over the admissible set is max omega^2 cos(omega), reached where tan(omega) = 2/omega.
  const double w = oracle::bisect([](double x) { return std::tan(x) - 2.0 / x; }, 0.5, 1.5);
  const double beta_star = w * w * std::cos(w);
  auto certified = [](double beta) {
    LoopBParams pb;
    pb.boundary_gain = 1.0;
    pb.kernel = Kernel::named("one", beta);
    return find_theta_omega(pb).certificate.pass;
  };
  EXPECT_TRUE(certified(0.97 * beta_star));
  EXPECT_FALSE(certified(1.01 * beta_star));
}

TEST(ThetaOmega, InadmissibleWitnessFails) {
  LoopBParams pb;
  pb.kernel = Kernel::named("zero");
  const auto c = evaluate_small_gain_b(pb, 1.0, 3.0);
  EXPECT_FALSE(c.pass);
  EXPECT_FALSE(c.notes.empty());
}

TEST(ThetaOmega, MonotoneInGain) {
  LoopBParams pb;
  pb.robin_q = -0.5;
  pb.reaction = -0.5;
  pb.kernel = Kernel::named("exp_neg_s");
  double prev = kInf;
  for (double k : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    pb.boundary_gain = k;
    const double m = find_theta_omega(pb).certificate.margin;
    EXPECT_LE(m, prev + 1e-12);
    prev = m;
  }
}

TEST(DiffusionRobustness, Example) {
  BacksteppingParams bp{1.0, 0.1, 1.0, 1.0, Kernel::named("one")};
  const auto r = check_diffusion_robustness(bp);
  EXPECT_NEAR(r.certificate.lhs, 0.2, 1e-12);
  EXPECT_TRUE(r.certificate.pass);
  EXPECT_NEAR(r.p_max, 0.5, 1e-12);
  bp.kernel = Kernel::named("zero");
  EXPECT_EQ(check_diffusion_robustness(bp).p_max, kInf);
}

TEST(DiffusionRobustness, AgreesWithWeightedConditionAtHalfPi) {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> v(0.2, 3.0), p(0.05, 2.0), k(-2.0, 2.0);
  for (int i = 0; i < 30; ++i) {
    const BacksteppingParams bp{v(gen), p(gen), 1.0, k(gen), Kernel::named(i % 2 ? "one" : "exp_neg_z")};
    const auto pb = backstepping_to_loop_b(bp);
    EXPECT_EQ(check_diffusion_robustness(bp).certificate.pass, evaluate_small_gain_b(pb, kPi / 2, 0.0).pass);
  }
}

TEST(GainP, ClosedForm) {
  const WaveKVParams wp{1.0, 1.0, 0.0};
  EXPECT_NEAR(gain_P(kPi / 4, wp), 1.0 / (kPi * kPi / 4 - 1.0), 1e-14);
  double prev = 0.0;
  for (double t = 0.0; t < 0.9; t += 0.05) {
    const double P = gain_P(t, wp);
    EXPECT_GT(P, prev);
    prev = P;
  }
  EXPECT_THROW(gain_P(kPi / 2, wp), std::domain_error);
}

namespace {
double g_brute(double s, int n) {
  const double hi = 0.5 * (oracle::pi - std::sqrt(std::abs(s) - s));
  return oracle::brute_min(
             [s](double t) {
               const double den = (oracle::pi - 2 * t) * (oracle::pi - 2 * t) - s;
               if (den <= 0) return std::numeric_limits<double>::infinity();
               const double P = std::abs(s) / den;
               if (P >= 1) return std::numeric_limits<double>::infinity();
               return 1.0 / (std::sin(t) * (1 - std::sqrt(P)) * (1 - std::sqrt(P)));
             },
             0.0, hi, n)
      .second;
}
}  // namespace

TEST(GainG, AnchorAndBruteForce) {
  EXPECT_NEAR(gain_g(0.0).g_value, 1.0, 1e-6);
  EXPECT_NEAR(gain_g(1.0).g_value, g_brute(1.0, 1000000), 1e-6);
  EXPECT_NEAR(gain_g(-1.0).g_value, g_brute(-1.0, 1000000), 1e-6);
  for (double s : {-4.0, -0.5, 0.3, 2.0, 5.0}) EXPECT_GE(gain_g(s).g_value, 1.0);
  EXPECT_TRUE(gain_g(-kPi * kPi / 2).domain_empty);
  EXPECT_TRUE(gain_g(-5.0).domain_empty);
}

TEST(GainCurve, MinimumAtZeroAndRefinement) {
  const auto c = gain_curve(-kPi * kPi / 2 + 0.1, 3.0, 201);
  EXPECT_TRUE(c.min_at_zero);
  EXPECT_TRUE(c.monotone_flanks);
  EXPECT_EQ(c.rows[c.argmin].s, 0.0);
  const auto fine = gain_curve(-2.0, 3.0, 11), finer = gain_curve(-2.0, 3.0, 21);
  for (int i = 0; i < 11; ++i) EXPECT_NEAR(fine.rows[i].g_value, finer.rows[2 * i].g_value, 1e-4 * fine.rows[i].g_value);
  EXPECT_THROW(gain_curve(1.0, 0.0, 5), std::invalid_argument);
}

TEST(IssLoopA, DecoupledFormula) {
  const LoopAParams pa{1.0, 0.0, 2.0, 0.5};
  const double t = 0.7, e = 0.1, z = 2.0;
  const auto c = iss_constants_loop_a(pa, t, e, z);
  EXPECT_EQ(c.L, 0.0);
  EXPECT_TRUE(c.small_gain);
  EXPECT_NEAR(c.gamma, (1.1 * 2.0 / 0.5 + 1.0) * 1.1 * 1.5 / std::sin(t), 1e-12);
  EXPECT_NEAR(c.sigma, 1.0 + std::pow(kPi - 1.4, 2), 1e-14);
}

TEST(IssLoopA, GammaBlowsUpAtUnitProduct) {
  const double t = 0.5, e = 0.05, z = 1.0;
  const double sigma = 1.0 + std::pow(kPi - 2 * t, 2);
  double prev = 0.0;
  for (double gap : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const LoopAParams pa{1.0, 1.0, sigma * (1 - gap) / ((1 + z) * (1 + e) * (1 + e)), 1.0};
    const auto c = iss_constants_loop_a(pa, t, e, z);
    EXPECT_NEAR(c.L, 1 - gap, 1e-12);
    EXPECT_GT(c.gamma, prev * 5);
    prev = c.gamma;
  }
  const LoopAParams over{1.0, 1.0, sigma / ((1 + z) * (1 + e) * (1 + e)), 1.0};
  EXPECT_FALSE(iss_constants_loop_a(over, t, e, z).small_gain);
  EXPECT_EQ(iss_constants_loop_a(over, t, e, z).gamma, kInf);
}

TEST(IssLoopA, OptimizedWaveGainAtZero) {
  const auto c = optimize_iss_loop_a({0.0, 1.0, 0.0, 1.0}, IssObjective::KvGain, 0.0);
  ASSERT_TRUE(c.kv_gain);
  EXPECT_NEAR(*c.kv_gain, 1.0, 1e-5);
}

TEST(IssLoopA, OptimizedGammaDecreasesWithDamping) {
  double prev = kInf;
  for (double K : {0.0, 1.0, 3.0, 10.0}) {
    const auto c = optimize_iss_loop_a({K, 1.0, 4.0, 1.0});
    ASSERT_TRUE(c.small_gain);
    EXPECT_LT(c.gamma, prev);
    prev = c.gamma;
  }
}

TEST(IssLoopB, ZeroKernel) {
  LoopBParams pb;
  pb.boundary_gain = 2.0;
  pb.kernel = Kernel::named("zero");
  const auto c = iss_constants_loop_b(pb, 1.0, 0.3, 0.1);
  EXPECT_EQ(c.product, 0.0);
  EXPECT_EQ(c.coeff_u2, 1.0);
  EXPECT_NEAR(c.coeff_u1, 1.0 + 1.1 * 2.0 * std::sin(1.3), 1e-14);
}

TEST(IssLoopB, ProductIsScaledCertificate) {
  LoopBParams pb;
  pb.robin_q = 0.3;
  pb.reaction = 0.2;
  pb.boundary_gain = -0.7;
  pb.kernel = Kernel::named("exp_neg_zs");
  const double t = 0.4, w = 0.8;
  ASSERT_TRUE(theta_omega_admissible(pb.diffusion, pb.reaction, pb.robin_q, t, w));
  const auto cert = evaluate_small_gain_b(pb, t, w);
  for (double e : {1e-3, 0.05, 0.3}) {
    const auto c = iss_constants_loop_b(pb, t, w, e);
    EXPECT_NEAR(c.product, (1 + e) * (1 + e) * cert.lhs / cert.rhs, 1e-12);
    EXPECT_EQ(c.small_gain, (1 + e) * (1 + e) * cert.lhs < cert.rhs);
  }
  EXPECT_THROW(iss_constants_loop_b(pb, 2.0, 2.0, 0.1), std::invalid_argument);
}
