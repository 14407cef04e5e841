#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "convdl/dict/pgd.hpp"
#include "oracles.hpp"

using namespace convdl;
using namespace convdl::dict;

namespace {

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

// sum_w Z_k[w] * (Z*D - X)_p[w + tau], everything computed on the domain
Dictionary direct_gradient(const Signal& x, const ActivationMap& z,
                           const Dictionary& d) {
  const Signal rec = oracle::convolve_loops(z, d);
  Dictionary grad(d.atoms, d.channels, d.support);
  for_each_pos(d.support.box(), [&](const Pos& tau) {
    for (int k = 0; k < d.atoms; ++k)
      for (int p = 0; p < d.channels; ++p) {
        double s = 0;
        for_each_pos(x.domain.box(), [&](const Pos& u) {
          Pos g = u;
          for (int i = 0; i < x.domain.d; ++i) g[i] += tau[i];
          if (!x.domain.contains(g)) return;
          s += z.at(k, u) * (rec.at(g, p) - x.at(g, p));
        });
        grad.at(k, tau, p) = s;
      }
  });
  return grad;
}

double direct_objective(const Signal& x, const ActivationMap& z,
                        const Dictionary& d) {
  return oracle::objective_loops(x, z, d, 0.0);
}

struct Instance {
  Signal x;
  ActivationMap z;
  Dictionary d;
};

Instance random_instance(std::uint64_t seed, bool two_d = false,
                         double rate = 0.08) {
  std::mt19937_64 rng(seed);
  const Domain omega = two_d ? Domain::d2(14, 11) : Domain::d1(40);
  const Domain theta = two_d ? Domain::d2(3, 4) : Domain::d1(5);
  Instance inst;
  inst.d = oracle::random_dictionary(rng, 2, 2, theta);
  inst.z = oracle::random_sparse_activation(rng, omega, 2, rate, 2.0);
  inst.x = oracle::random_signal(rng, omega, 2);
  return inst;
}

}  // namespace

TEST_CASE("compute_stats") {
  SUBCASE("a single interior dirac") {
    const Domain omega = Domain::d1(32);
    const Domain theta = Domain::d1(4);
    ActivationMap z(omega, 1);
    z.at(0, make_pos(10)) = 2.0;
    Signal x(omega, 1);
    const grid::WorkerGrid g(omega, theta, make_pos(1));
    const SufficientStats stats = compute_stats(z, x, g);
    for_each_pos(stats.phi.lags.box(), [&](const Pos& s) {
      const double want = (s[0] == 3) ? 4.0 : 0.0;  // lag 0 at shifted index L-1
      CHECK(stats.phi.at(0, 0, s) == doctest::Approx(want));
    });
    CHECK(stats.rim.empty());
  }

  SUBCASE("zero code gives zero statistics") {
    const Domain omega = Domain::d2(12, 12);
    const Domain theta = Domain::d2(3, 3);
    const ActivationMap z(omega, 2);
    std::mt19937_64 rng(3);
    const Signal x = oracle::random_signal(rng, omega, 2);
    const grid::WorkerGrid g(omega, theta, make_pos(2, 2));
    const SufficientStats stats = compute_stats(z, x, g);
    for (double v : stats.phi.values) CHECK(v == 0.0);
    for (double v : stats.psi.values) CHECK(v == 0.0);
    CHECK(stats.x_sqnorm == doctest::Approx(sq_l2(x.values)));
  }

  SUBCASE("distributed map-reduce matches one worker") {
    std::mt19937_64 rng(7);
    const Domain omega = Domain::d2(24, 18);
    const Domain theta = Domain::d2(3, 3);
    const ActivationMap z = oracle::random_sparse_activation(rng, omega, 3, 0.1);
    const Signal x = oracle::random_signal(rng, omega, 2);
    const grid::WorkerGrid one(omega, theta, make_pos(1, 1));
    const grid::WorkerGrid four(omega, theta, make_pos(2, 2));
    const SufficientStats a = compute_stats(z, x, one);
    const SufficientStats b = compute_stats(z, x, four);
    REQUIRE(a.phi.values.size() == b.phi.values.size());
    for (std::size_t i = 0; i < a.phi.values.size(); ++i)
      CHECK(std::abs(a.phi.values[i] - b.phi.values[i]) < 1e-10);
    for (std::size_t i = 0; i < a.psi.values.size(); ++i)
      CHECK(std::abs(a.psi.values[i] - b.psi.values[i]) < 1e-10);
    CHECK(a.rim.size() == b.rim.size());
    CHECK(rel_err(a.x_sqnorm, b.x_sqnorm) < 1e-12);

    // bit-stable re-run
    const SufficientStats c = compute_stats(z, x, four);
    CHECK(b.phi.values == c.phi.values);
    CHECK(b.psi.values == c.psi.values);
  }

  SUBCASE("gram symmetry phi_{k,k'}[t] == phi_{k',k}[-t]") {
    std::mt19937_64 rng(11);
    const Domain omega = Domain::d1(48);
    const Domain theta = Domain::d1(6);
    const ActivationMap z = oracle::random_sparse_activation(rng, omega, 3, 0.2);
    Signal x(omega, 1);
    const grid::WorkerGrid g(omega, theta, make_pos(2));
    const SufficientStats stats = compute_stats(z, x, g);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for_each_pos(stats.phi.lags.box(), [&](const Pos& s) {
          Pos neg{};
          neg[0] = (stats.phi.lags.sizes[0] - 1) - s[0];
          CHECK(stats.phi.at(a, b, s) ==
                doctest::Approx(stats.phi.at(b, a, neg)).epsilon(1e-10));
        });
  }
}

TEST_CASE("gradient from statistics") {
  SUBCASE("stationary when psi equals phi * D") {
    std::mt19937_64 rng(13);
    const Instance inst = random_instance(13);
    const grid::WorkerGrid g(inst.x.domain, inst.d.support, make_pos(1));
    SufficientStats stats = compute_stats(inst.z, inst.x, g);
    stats.rim.clear();  // synthetic stationarity in the pure-lag model
    const Dictionary gd = gradient_from_stats(inst.d, stats);
    SufficientStats fake = stats;
    // overwrite psi with phi * D, gradient must vanish
    Dictionary pd = gd;
    for (std::size_t i = 0; i < pd.values.size(); ++i)
      pd.values[i] += stats.psi.values[i];
    fake.psi.values = pd.values;
    const Dictionary zero = gradient_from_stats(inst.d, fake);
    for (double v : zero.values) CHECK(std::abs(v) < 1e-12);
  }

  SUBCASE("matches the direct full-domain gradient to 1e-10") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const Instance inst = random_instance(100 + seed, seed % 2);
      const grid::WorkerGrid g =
          grid::make_grid(inst.x.domain, 1, inst.d.support);
      const SufficientStats stats = compute_stats(inst.z, inst.x, g);
      const Dictionary got = gradient_from_stats(inst.d, stats);
      const Dictionary want = direct_gradient(inst.x, inst.z, inst.d);
      double scale = 1;
      for (double v : want.values) scale = std::max(scale, std::abs(v));
      for (std::size_t i = 0; i < got.values.size(); ++i)
        CHECK(std::abs(got.values[i] - want.values[i]) <= 1e-10 * scale);
    }
  }

  SUBCASE("matches central finite differences") {
    const Instance inst = random_instance(55);
    const grid::WorkerGrid g = grid::make_grid(inst.x.domain, 1, inst.d.support);
    const SufficientStats stats = compute_stats(inst.z, inst.x, g);
    const Dictionary grad = gradient_from_stats(inst.d, stats);
    const double h = 1e-6;
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<index_t> pick(0, inst.d.values.size() - 1);
    for (int probe = 0; probe < 25; ++probe) {
      const index_t i = pick(rng);
      Dictionary dp = inst.d, dm = inst.d;
      dp.values[i] += h;
      dm.values[i] -= h;
      const double fd =
          (direct_objective(inst.x, inst.z, dp) - direct_objective(inst.x, inst.z, dm)) /
          (2 * h);
      CHECK(std::abs(grad.values[i] - fd) <=
            1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("objective from statistics") {
  SUBCASE("zero dictionary gives half the signal energy") {
    const Instance inst = random_instance(21);
    const grid::WorkerGrid g(inst.x.domain, inst.d.support, make_pos(1));
    const SufficientStats stats = compute_stats(inst.z, inst.x, g);
    Dictionary zero(inst.d.atoms, inst.d.channels, inst.d.support);
    CHECK(rel_err(objective_from_stats(zero, stats), 0.5 * stats.x_sqnorm) < 1e-12);
  }

  SUBCASE("zero code gives half the signal energy for any dictionary") {
    std::mt19937_64 rng(23);
    const Domain omega = Domain::d1(32);
    const ActivationMap z(omega, 2);
    const Signal x = oracle::random_signal(rng, omega, 2);
    const Dictionary d = oracle::random_dictionary(rng, 2, 2, Domain::d1(5));
    const grid::WorkerGrid g(omega, d.support, make_pos(1));
    const SufficientStats stats = compute_stats(z, x, g);
    CHECK(rel_err(objective_from_stats(d, stats), 0.5 * sq_l2(x.values)) < 1e-8);
  }

  SUBCASE("random probes agree with the direct residual objective") {
    const Instance base = random_instance(31, true, 0.15);
    const grid::WorkerGrid g = grid::make_grid(base.x.domain, 1, base.d.support);
    const SufficientStats stats = compute_stats(base.z, base.x, g);
    std::mt19937_64 rng(77);
    for (int probe = 0; probe < 100; ++probe) {
      const Dictionary d = oracle::random_dictionary(rng, 2, 2, base.d.support, false);
      CHECK(rel_err(objective_from_stats(d, stats),
                    direct_objective(base.x, base.z, d)) < 1e-8);
    }
  }
}

TEST_CASE("projection onto the unit ball") {
  std::mt19937_64 rng(41);
  Dictionary d = oracle::random_dictionary(rng, 3, 1, Domain::d1(4), false);
  double* a0 = d.atom(0);
  for (index_t i = 0; i < 4; ++i) a0[i] *= 5;  // blow one atom up
  Dictionary before = d;
  const double n1 = std::sqrt(d.atom_sqnorm(1));
  project_unit_ball(d);
  CHECK(std::sqrt(d.atom_sqnorm(0)) == doctest::Approx(1.0).epsilon(1e-12));
  // direction preserved
  const double ratio = before.atom(0)[1] / d.atom(0)[1];
  CHECK(before.atom(0)[2] / d.atom(0)[2] == doctest::Approx(ratio));
  if (n1 <= 1.0)
    for (index_t i = 0; i < 4; ++i) CHECK(d.atom(1)[i] == before.atom(1)[i]);
  // zero atom untouched, projection idempotent
  Dictionary z(1, 1, Domain::d1(3));
  project_unit_ball(z);
  for (double v : z.values) CHECK(v == 0.0);
  Dictionary again = d;
  project_unit_ball(again);
  for (std::size_t i = 0; i < d.values.size(); ++i)
    CHECK(again.values[i] == d.values[i]);
}

TEST_CASE("projected gradient descent") {
  SUBCASE("zero gradient leaves the dictionary unchanged") {
    const Instance inst = random_instance(51);
    const grid::WorkerGrid g(inst.x.domain, inst.d.support, make_pos(1));
    SufficientStats stats = compute_stats(inst.z, inst.x, g);
    stats.rim.clear();
    // force stationarity: psi = phi * D
    Dictionary gd = gradient_from_stats(inst.d, stats);
    for (std::size_t i = 0; i < gd.values.size(); ++i)
      stats.psi.values[i] += gd.values[i];
    const PgdResult r = pgd_update(inst.d, stats);
    CHECK(r.d.values == inst.d.values);
    CHECK(!r.stalled);
  }

  SUBCASE("scalar quadratic reaches the analytic minimizer") {
    // one atom, support of one sample: F = 1/2 (phi0 D^2 - 2 psi0 D + c)
    const Domain omega = Domain::d1(16);
    const Domain theta = Domain::d1(1);
    ActivationMap z(omega, 1);
    z.at(0, make_pos(3)) = 1.0;
    z.at(0, make_pos(9)) = 2.0;
    Signal x(omega, 1);
    x.at(make_pos(3), 0) = 0.6;
    x.at(make_pos(9), 0) = 1.0;
    const grid::WorkerGrid g(omega, theta, make_pos(1));
    const SufficientStats stats = compute_stats(z, x, g);
    const double minimizer = (0.6 * 1 + 1.0 * 2) / (1 + 4);  // psi over phi
    Dictionary d0(1, 1, theta);
    d0.at(0, make_pos(0), 0) = -0.9;
    const PgdResult r = pgd_update(d0, stats);
    CHECK(r.d.at(0, make_pos(0), 0) == doctest::Approx(minimizer).epsilon(1e-6));
  }

  SUBCASE("objective never increases across accepted steps") {
    const Instance inst = random_instance(61, true);
    const grid::WorkerGrid g = grid::make_grid(inst.x.domain, 1, inst.d.support);
    const SufficientStats stats = compute_stats(inst.z, inst.x, g);
    std::mt19937_64 rng(5);
    const Dictionary d0 =
        oracle::random_dictionary(rng, inst.d.atoms, inst.d.channels, inst.d.support);
    const PgdResult r = pgd_update(d0, stats);
    double prev = r.initial_objective;
    for (const PgdStep& s : r.steps) {
      CHECK(s.objective <= prev + 1e-12);
      prev = s.objective;
    }
    CHECK(r.final_objective <= r.initial_objective);
    for (int k = 0; k < r.d.atoms; ++k)
      CHECK(r.d.atom_sqnorm(k) <= 1.0 + 1e-12);
  }

  SUBCASE("power iteration dominates the quadratic form") {
    const Instance inst = random_instance(71);
    const grid::WorkerGrid g(inst.x.domain, inst.d.support, make_pos(1));
    const SufficientStats stats = compute_stats(inst.z, inst.x, g);
    const double lam = gram_operator_norm(stats.phi, inst.d.channels, inst.d.support);
    std::mt19937_64 rng(7);
    for (int probe = 0; probe < 20; ++probe) {
      Dictionary v = oracle::random_dictionary(rng, inst.d.atoms, inst.d.channels,
                                               inst.d.support);
      Dictionary av = gradient_from_stats(v, stats);
      SufficientStats zero_psi = stats;
      std::fill(zero_psi.psi.values.begin(), zero_psi.psi.values.end(), 0.0);
      zero_psi.rim.clear();
      av = gradient_from_stats(v, zero_psi);  // pure phi * v
      const double rayleigh = dot(av.values, v.values) / sq_l2(v.values);
      CHECK(rayleigh <= lam * (1 + 1e-6));
    }
  }
}
