// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>

#include "benchmarks.hpp"
#include "oracles.hpp"
#include "pdeloop/pdeloop.hpp"

using namespace pdeloop;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s %2d %s: %s [%.2f s of %.0f s]%s\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
              budget_s, in_time ? "" : " over budget");
  std::fflush(stdout);
}

SimulationOptions grid(int n_z, double dt, double T, int modes = 64, int store_every = 1) {
  SimulationOptions o;
  o.grid = {n_z, dt, T};
  o.modes = modes;
  o.store_every = store_every;
  return o;
}

Outcome gain_anchor() {
  const double g0 = gain_g(0.0).g_value;
  const auto c = gain_curve(-kPi * kPi / 2 + 0.1, 3.0, 201);
  const bool ok = std::abs(g0 - 1.0) <= 1e-6 && c.min_at_zero && c.monotone_flanks && c.rows[c.argmin].s == 0.0;
  return {ok, fmt::format("g(0)={:.10f} argmin s={} monotone={}", g0, c.rows[c.argmin].s, c.monotone_flanks)};
}

Outcome eigen_anchors() {
  bool ok = true;
  for (double b : robin_offsets(0.0, 20)) ok = ok && b == 0.0;
  const double p = 1.3, a = 0.2;
  const auto es0 = EigenSystem::dirichlet_robin(p, a, 0.0, 20);
  double lam_err = 0.0;
  for (int n = 1; n <= 20; ++n) {
    const double w = (2 * n - 1) * kPi / 2;
    lam_err = std::max(lam_err, std::abs(es0.eigenvalues()[n - 1] - (p * w * w - a)));
  }
  double ortho = 0.0;
  for (double q : {0.0, 0.5, -2.0}) {
    const auto es = EigenSystem::dirichlet_robin(p, a, q, 20);
    for (std::size_t n = 1; n <= 20; ++n)
      for (std::size_t m = n; m <= 20; ++m) {
        const double ip = oracle::simpson([&](double z) { return es.phi(n, z) * es.phi(m, z); }, 0, 1, 20000);
        ortho = std::max(ortho, std::abs(ip - (n == m ? 1.0 : 0.0)));
      }
  }
  const auto es = EigenSystem::dirichlet_robin(p, a, 0.6, 5);
  auto residual = [&](std::size_t n, double h) {
    double r = 0.0;
    for (double z = h; z < 1.0 - h / 2; z += h) {
      const double d2 = (es.phi(n, z + h) - 2 * es.phi(n, z) + es.phi(n, z - h)) / (h * h);
      r = std::max(r, std::abs(-p * d2 - a * es.phi(n, z) - es.eigenvalues()[n - 1] * es.phi(n, z)));
    }
    return r;
  };
  double worst_ratio = 4.0;
  for (std::size_t n = 1; n <= 5; ++n) {
    const double ratio = residual(n, 0.01) / residual(n, 0.005);
    if (std::abs(ratio - 4.0) > std::abs(worst_ratio - 4.0)) worst_ratio = ratio;
  }
  ok = ok && lam_err <= 1e-10 && ortho <= 1e-8 && std::abs(worst_ratio - 4.0) <= 0.2;
  return {ok, fmt::format("lambda err {:.2e}, orthonormality {:.2e}, residual ratio {:.3f}", lam_err, ortho,
                          worst_ratio)};
}

Outcome single_mode() {
  const LoopAParams pa{1.0, 0.0, 0.0, 1.0};
  const double exact = std::exp(-(1 + kPi * kPi) * 0.1);
  const auto o = grid(201, 1e-3, 0.1);
  const auto sp = simulate_loop_a(pa, Profile::sine(1.0), Profile::zero(), {}, o);
  const auto fd = fd_reference_loop_a(pa, Profile::sine(1.0), Profile::zero(), {}, o);
  const double e_sp = std::abs(sp.sup_u1.back() - exact), e_fd = std::abs(fd.sup_u1.back() - exact) / exact;
  return {e_sp <= 1e-6 && e_fd <= 0.01, fmt::format("spectral abs err {:.2e}, FD rel err {:.2e}", e_sp, e_fd)};
}

Outcome sharpness() {
  const auto o = grid(201, 1e-3, 1.0);
  const auto eq = sharpness_probe({1.0, 1.0, 1.0 + kPi * kPi, 1.0}, o);
  const auto above = sharpness_probe({1.0, 1.0, 2.0 + kPi * kPi, 1.0}, o);
  const double rel = std::abs(above.fitted_growth - above.mode.mu) / above.mode.mu;
  return {eq.drift <= 0.01 && rel <= 0.02,
          fmt::format("drift {:.2e}, growth {:.5f} vs mu {:.5f} (rel {:.2e})", eq.drift, above.fitted_growth,
                      above.mode.mu, rel)};
}

Outcome soundness_sweep() {
  std::mt19937 gen(2024);
  std::uniform_real_distribution<double> K(-4.0, 6.0), frac(-0.95, 0.95), b(0.3, 3.0), r(0.2, 2.0);
  const auto d = make_disturbance("sinusoid", 0.5, 2 * kPi, 0.0);
  const auto o = grid(101, 2e-3, 8.0, 32, 5);
  const Profile u1 = Profile::sine(1.0), u2{[](double z) { return std::cos(z); }, "cos"};
  int certified = 0, decaying = 0, violations = 0;
  double min_delta = kInf;
  while (certified < 25) {
    LoopAParams pa{K(gen), r(gen), 0.0, b(gen)};
    pa.a_tilde = frac(gen) * (pa.K + kPi * kPi) / pa.r;
    if (!check_loop_a(pa).pass) continue;
    const auto iss = optimize_iss_loop_a(pa);
    if (!iss.small_gain) continue;
    ++certified;
    const auto fit = fit_decay(simulate_loop_a(pa, u1, u2, {}, o));
    min_delta = std::min(min_delta, fit.delta_hat);
    if (fit.delta_hat > 0.0) ++decaying;
    const auto forced = simulate_loop_a(pa, u1, u2, d, o);
    violations += static_cast<int>(check_iss_bound(forced, fit.M_hat, fit.delta_hat, iss.gamma, d).violations);
  }
  return {decaying == certified && violations == 0,
          fmt::format("{}/{} decaying, min delta_hat {:.4f}, {} bound violations", decaying, certified, min_delta,
                      violations)};
}

Outcome delay_independence() {
  LoopBParams pb;
  pb.diffusion = 1.0;
  pb.robin_q = 0.0;
  pb.reaction = -1.0;
  pb.boundary_gain = 0.5;
  pb.kernel = Kernel::named("exp_neg_z", 0.2);
  const auto cert = find_theta_omega(pb).certificate;
  const double w1 = robin_frequencies(pb.robin_q, 1).front();
  const Profile u1{[w1](double z) { return std::sin(w1 * z); }, "robin mode 1"};
  const double trace = pb.boundary_gain * std::sin(w1);
  const Profile u2{[trace](double) { return trace; }, "trace constant"};
  const auto rows = delay_independence_sweep(pb, {0.25, 1.0, 4.0}, u1, u2, grid(101, 2e-3, 12.0, 32, 5));
  bool ok = cert.pass;
  std::string detail = fmt::format("certificate margin {:.4f};", cert.margin);
  for (const auto& row : rows) {
    ok = ok && row.fit.delta_hat > 0.0;
    detail += fmt::format(" c={} delta_hat={:.4f}", row.speed, row.fit.delta_hat);
  }
  return {ok, detail};
}

Outcome transform_consistency() {
  int kv_dis = 0, bs_dis = 0, kv_pass = 0, bs_pass = 0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j)
      for (int k = 0; k < 10; ++k) {
        const WaveKVParams wp{0.1 + 0.3 * i, 0.1 + 0.45 * j, 0.55 * k};
        const bool a = check_wave_kv(wp).pass;
        kv_pass += a;
        if (a != check_loop_a(kv_wave_to_loop_a(wp).params).pass) ++kv_dis;
      }
  // kernels whose row integral int|l(z,s)|ds is largest at z = 0
  const std::vector<std::string> kernels = {"one", "exp_neg_z", "one_minus_z_half", "exp_neg_s", "cos_pi_s"};
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> v(0.2, 3.0), lp(std::log(0.02), std::log(2.0)), u(0.0, 1.0);
  for (int n = 0; n < 100; ++n) {
    BacksteppingParams bp;
    bp.transport_v = v(gen);
    bp.diffusion = std::exp(lp(gen));
    bp.transport_c = 1.0;
    bp.kernel = Kernel::named(kernels[n % kernels.size()]);
    // gain spread around the threshold v^2 / (4 p^2 max int|l|)
    const double threshold = bp.transport_v * bp.transport_v / (4 * bp.diffusion * bp.diffusion * kernel_abs_row_max(bp.kernel));
    bp.gain = (n % 2 ? 1.0 : -1.0) * threshold * (0.5 + u(gen));
    const bool a = check_diffusion_robustness(bp).certificate.pass;
    bs_pass += a;
    if (a != evaluate_small_gain_b(backstepping_to_loop_b(bp), kPi / 2, 0.0).pass) ++bs_dis;
  }
  return {kv_dis == 0 && bs_dis == 0,
          fmt::format("KV disagreements {} (passing {}/1000), backstepping disagreements {} (passing {}/100)", kv_dis,
                      kv_pass, bs_dis, bs_pass)};
}

Outcome cross_solver() {
  const auto o = grid(201, 1e-3, 1.0);
  const bench::LoopACase a;
  const auto a_sp = simulate_loop_a(a.params, a.u1, a.u2, a.d, o);
  const auto a_fd = fd_reference_loop_a(a.params, a.u1, a.u2, a.d, o);
  const auto a_pi = picard_solve_loop_a(a.params, a.u1, a.u2, a.d, o, {});
  const bench::LoopBCase b;
  const auto b_sp = simulate_loop_b(b.params, b.u1, b.u2, o);
  const auto b_fd = fd_reference_loop_b(b.params, b.u1, b.u2, o);
  const auto b_pi = picard_solve_loop_b(b.params, b.u1, b.u2, o, {});
  const double errs[] = {bench::relative_discrepancy(a_sp, a_fd), bench::relative_discrepancy(a_sp, a_pi),
                         bench::relative_discrepancy(a_fd, a_pi), bench::relative_discrepancy(b_sp, b_fd),
                         bench::relative_discrepancy(b_sp, b_pi), bench::relative_discrepancy(b_fd, b_pi)};
  const double worst = *std::max_element(std::begin(errs), std::end(errs));
  return {worst <= 1e-3, fmt::format("A: {:.2e} {:.2e} {:.2e}, B: {:.2e} {:.2e} {:.2e}", errs[0], errs[1], errs[2],
                                     errs[3], errs[4], errs[5])};
}

Outcome weighted_bound() {
  const LoopAParams pa{1.0, 0.0, 0.0, 1.0};
  const auto d = make_disturbance("sinusoid", 0.1, 2 * kPi, 0.0);
  const auto tr = simulate_loop_a(pa, Profile::sine(1.0), Profile::zero(), d, grid(201, 1e-3, 3.0));
  std::size_t violations = 0, samples = 0;
  double excess = -kInf;
  for (double theta : {0.2, 0.6, 1.0, 1.4}) {
    const auto r = check_weighted_parabolic_bound(tr, pa, theta, d);
    violations += r.violations;
    samples += r.samples;
    excess = std::max(excess, r.max_excess);
  }
  return {violations == 0, fmt::format("{} violations over {} samples, max excess {:.3e}", violations, samples, excess)};
}

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(PDELOOPGAIN_EXE) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "pdeloop_acceptance";
  fs::remove_all(root);
  std::vector<fs::path> cfgs;
  for (const auto& e : fs::directory_iterator(PDELOOP_CONFIG_DIR))
    if (e.path().extension() == ".json") cfgs.push_back(e.path());
  std::sort(cfgs.begin(), cfgs.end());
  std::size_t compared = 0, differing = 0;
  int bad_exit = 0;
  for (const auto& cfg : cfgs) {
    const auto command = json::parse(read_file(cfg.string())).at("command").get<std::string>();
    std::vector<fs::path> dirs;
    for (const char* pass : {"first", "second"}) {
      const auto dir = root / pass / cfg.stem();
      fs::create_directories(dir);
      const int rc = run_cli(command + " --config " + cfg.string() + " --out " + dir.string());
      if (rc != 0 && rc != 2 && rc != 3) ++bad_exit;
      dirs.push_back(dir);
    }
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      const auto other = dirs[1] / e.path().filename();
      ++compared;
      if (!fs::exists(other) || read_file(e.path().string()) != read_file(other.string())) ++differing;
    }
  }
  return {compared > 0 && differing == 0 && bad_exit == 0,
          fmt::format("{} configs, {} artifacts compared, {} differing", cfgs.size(), compared, differing)};
}

}  // namespace

int main() {
  criterion(1, "gain anchor", 5, gain_anchor);
  criterion(2, "eigen anchors", 5, eigen_anchors);
  criterion(3, "single-mode decay", 10, single_mode);
  criterion(4, "sharpness boundary", 30, sharpness);
  criterion(5, "small-gain soundness sweep", 300, soundness_sweep);
  criterion(6, "delay independence", 120, delay_independence);
  criterion(7, "transform consistency", 60, transform_consistency);
  criterion(8, "cross-solver agreement", 120, cross_solver);
  criterion(9, "weighted parabolic bound", 30, weighted_bound);
  criterion(10, "determinism", 600, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
