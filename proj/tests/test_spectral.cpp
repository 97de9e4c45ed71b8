#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pdeloop/spectral.hpp"

using namespace pdeloop;

TEST(RobinOffsets, ZeroQ) {
  for (double b : robin_offsets(0.0, 30)) EXPECT_EQ(b, 0.0);
}

TEST(RobinOffsets, BisectionOracle) {
  const auto b = robin_offsets(0.5, 1);
  EXPECT_NEAR(b[0], oracle::pi / 2 - oracle::robin_root(0.5, 1), 1e-12);
  const auto w = robin_frequencies(-1.0, 2);
  EXPECT_GT(w[1], kPi);
  EXPECT_LT(w[1], 2 * kPi);
  EXPECT_NEAR(w[1], oracle::robin_root(-1.0, 2), 1e-11);
  EXPECT_LT(std::abs(w[1] / std::tan(w[1]) + 1.0), 1e-10);
}

TEST(RobinOffsets, RangeAndDecay) {
  for (double q : {-3.0, -0.4, 0.3, 0.9}) {
    const auto b = robin_offsets(q, 50);
    double C = 0.0;
    for (std::size_t n = 0; n < b.size(); ++n) {
      EXPECT_GT(b[n], -kPi / 2);
      EXPECT_LT(b[n], kPi / 2);
      C = std::max(C, std::abs(b[n]) * (n + 1));
    }
    // |b_n| <= C/n with C fitted on the first half holds on the second
    double C_head = 0.0;
    for (std::size_t n = 0; n < 25; ++n) C_head = std::max(C_head, std::abs(b[n]) * (n + 1));
    for (std::size_t n = 25; n < 50; ++n) EXPECT_LE(std::abs(b[n]) * (n + 1), C_head * (1 + 1e-9));
  }
  EXPECT_THROW(robin_offsets(1.0, 3), std::domain_error);
}

TEST(RobinOffsets, CotangentBranchDecreasing) {
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 1; i < 10000; ++i) {
    const double w = kPi * i / 10000;
    const double v = w / std::tan(w);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(EigenSystem, DirichletRobinZeroQ) {
  const auto es = EigenSystem::dirichlet_robin(1.0, 0.0, 0.0, 20);
  EXPECT_NEAR(es.eigenvalues()[0], kPi * kPi / 4, 1e-14);
  for (std::size_t n = 0; n < 20; ++n) {
    const double w = (2.0 * n + 1) * kPi / 2;
    EXPECT_NEAR(es.eigenvalues()[n], w * w, 1e-10);
    EXPECT_NEAR(es.normalizers()[n], std::sqrt(2.0), 1e-14);
  }
}

TEST(EigenSystem, OrthonormalityBySimpson) {
  for (double q : {0.0, 0.5, -2.0}) {
    const auto es = EigenSystem::dirichlet_robin(1.3, 0.2, q, 20);
    for (std::size_t n = 1; n <= 20; n += 3)
      for (std::size_t m = n; m <= 20; m += 4) {
        const double ip = oracle::simpson([&](double z) { return es.phi(n, z) * es.phi(m, z); }, 0, 1, 20000);
        EXPECT_NEAR(ip, n == m ? 1.0 : 0.0, 1e-8) << "q=" << q << " n=" << n << " m=" << m;
      }
  }
}

TEST(EigenSystem, PrintedNormalizerMatches) {
  const auto es = EigenSystem::dirichlet_robin(1.0, 0.0, 0.5, 10);
  for (std::size_t n = 0; n < 10; ++n) EXPECT_NEAR(es.printed_normalizers()[n], es.normalizers()[n], 1e-10);
  EXPECT_TRUE(es.notes().empty());
}

TEST(EigenSystem, BoundaryConditionsAndResidual) {
  const double p = 0.8, a = 0.3, q = 0.6;
  const auto es = EigenSystem::dirichlet_robin(p, a, q, 8);
  auto residual = [&](std::size_t n, double h) {
    double r = 0.0;
    for (double z = h; z < 1.0 - h / 2; z += h) {
      const double d2 = (es.phi(n, z + h) - 2 * es.phi(n, z) + es.phi(n, z - h)) / (h * h);
      r = std::max(r, std::abs(-p * d2 - a * es.phi(n, z) - es.eigenvalues()[n - 1] * es.phi(n, z)));
    }
    return r;
  };
  for (std::size_t n = 1; n <= 8; ++n) {
    EXPECT_NEAR(es.phi(n, 0.0), 0.0, 1e-15);
    EXPECT_NEAR(es.dphi(n, 1.0) - q * es.phi(n, 1.0), 0.0, 1e-9 * es.frequencies()[n - 1]);
    const double r1 = residual(n, 0.01), r2 = residual(n, 0.005);
    EXPECT_NEAR(r1 / r2, 4.0, 0.1);
  }
}

TEST(EigenSystem, DirichletDirichlet) {
  const auto es = EigenSystem::dirichlet_dirichlet(0.0, 20);
  EXPECT_NEAR(es.eigenvalues()[0], kPi * kPi, 1e-14);
  EXPECT_NEAR(es.phi(1, 0.5), std::sqrt(2.0), 1e-15);
  // int 2 sin(n pi z) sin(m pi z) dz = delta_nm, analytic
  for (std::size_t n = 1; n <= 20; ++n)
    for (std::size_t m = 1; m <= 20; ++m) {
      const double ip = oracle::simpson([&](double z) { return es.phi(n, z) * es.phi(m, z); }, 0, 1, 20000);
      EXPECT_NEAR(ip, n == m ? 1.0 : 0.0, 1e-12);
    }
}

TEST(EigenSystem, SummabilityProxyConverges) {
  auto partial = [](int N) {
    const auto es = EigenSystem::dirichlet_robin(1.0, 0.5, 0.3, N);
    double s = 0.0;
    for (int n = 0; n < N; ++n) s += es.normalizers()[n] / es.eigenvalues()[n];
    return s;
  };
  EXPECT_NEAR(partial(200), partial(400), 5e-3);
}

TEST(EigenSystem, CsvDump) {
  const auto csv = EigenSystem::dirichlet_robin(1.0, 0.0, 0.0, 2).to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,b_n,lambda_n,A_n");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(WeightedNorm, Basics) {
  const auto z = uniform_nodes(101);
  const auto eta = WeightFunction::loop_a(0.4, 1.0);
  std::vector<double> u(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) u[i] = eta(z[i]);
  EXPECT_NEAR(weighted_sup_norm(u, z, eta), 1.0, 1e-15);
  EXPECT_EQ(weighted_sup_norm(std::vector<double>(z.size(), 0.0), z, eta), 0.0);
  std::mt19937 gen(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    for (auto& x : u) x = nd(gen);
    const double sup = sup_norm(u), w = weighted_sup_norm(u, z, eta);
    EXPECT_LE(sup / eta.max_value(), w * (1 + 1e-14));
    EXPECT_LE(w, sup / eta.min_value() * (1 + 1e-14));
  }
  EXPECT_THROW(WeightFunction(0.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(WeightFunction(1.0, kPi - 1.0, 1.0), std::invalid_argument);
}

TEST(CheckH4, LoopAEquality) {
  const auto z = uniform_nodes(201);
  for (double theta : {0.1, 0.7, 1.5}) {
    const auto eta = WeightFunction::loop_a(theta, 2.0);
    const auto rep = check_H4(SLSpec::loop_a(2.0), eta, 2.0 + std::pow(kPi - 2 * theta, 2), z);
    EXPECT_TRUE(rep.certificate.pass);
    EXPECT_NEAR(rep.differential_slack, 0.0, 1e-12);
    EXPECT_NEAR(rep.left_margin, std::sin(theta), 1e-15);
    EXPECT_NEAR(rep.right_margin, std::sin(theta), 1e-14);
    // a larger sigma breaks the differential inequality
    EXPECT_FALSE(check_H4(SLSpec::loop_a(2.0), eta, eta.sigma() + 0.1, z).certificate.pass);
  }
}

TEST(CheckH4, LoopBEquality) {
  const auto z = uniform_nodes(201);
  const double p = 1.5, a = 0.2, q = 0.1, theta = 0.3, omega = 1.0;
  ASSERT_GT(omega / std::tan(omega + theta), q);
  const auto eta = WeightFunction::loop_b(theta, omega, p, a);
  const auto rep = check_H4(SLSpec::loop_b(p, a, q), eta, p * omega * omega - a, z);
  EXPECT_TRUE(rep.certificate.pass);
  EXPECT_NEAR(rep.differential_slack, 0.0, 1e-12);
  EXPECT_GT(rep.right_margin, 0.0);
}
