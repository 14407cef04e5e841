#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "convdl/csc/solver.hpp"
#include "convdl/grid/protocol.hpp"
#include "oracles.hpp"

using namespace convdl;
using namespace convdl::grid;

TEST_CASE("make_grid") {
  const Domain omega = Domain::d2(512, 512);
  const Domain theta = Domain::d2(16, 16);

  SUBCASE("square factorization is preferred") {
    const WorkerGrid g = make_grid(omega, 4, theta);
    CHECK(g.axis_count(0) == 2);
    CHECK(g.axis_count(1) == 2);
    const Box s0 = g.subdomain(0);
    CHECK(s0.hi[0] - s0.lo[0] == 256);
    CHECK(s0.hi[1] - s0.lo[1] == 256);
  }

  SUBCASE("one worker owns the whole domain") {
    const WorkerGrid g = make_grid(omega, 1, theta);
    CHECK(g.worker_count() == 1);
    CHECK(g.subdomain(0).volume() == omega.size());
  }

  SUBCASE("49 workers arrange as 7x7") {
    const WorkerGrid g = make_grid(omega, 49, theta);
    CHECK(g.axis_count(0) == 7);
    CHECK(g.axis_count(1) == 7);
  }

  SUBCASE("infeasible counts raise an error naming the maximum") {
    // edges must be >= 32, so at most 16 workers per axis
    CHECK_THROWS_AS((void)make_grid(omega, 1024, theta), GridError);
    try {
      (void)make_grid(omega, 1024, theta);
    } catch (const GridError& e) {
      CHECK(e.max_feasible == 256);
    }
  }

  SUBCASE("line split caps at T1 / 2L1") {
    const Domain om = Domain::d2(128, 128);
    const Domain th = Domain::d2(8, 8);
    CHECK(max_feasible_workers(om, th, Split::kLine) == 8);
    CHECK(max_feasible_workers(om, th, Split::kGrid) == 64);
    const WorkerGrid g = make_grid(om, 8, th, Split::kLine);
    CHECK(g.axis_count(0) == 8);
    CHECK(g.axis_count(1) == 1);
    CHECK_THROWS_AS((void)make_grid(om, 9, th, Split::kLine), GridError);
  }

  SUBCASE("partition is exact on a small remainder-heavy domain") {
    const Domain om = Domain::d2(23, 17);
    const Domain th = Domain::d2(2, 2);
    const WorkerGrid g = make_grid(om, 6, th);
    std::vector<int> owner_count(om.size(), 0);
    for (int w = 0; w < g.worker_count(); ++w)
      for_each_pos(g.subdomain(w), [&](const Pos& p) {
        ++owner_count[om.index(p)];
        CHECK(g.owner(p) == w);
      });
    for (int c : owner_count) CHECK(c == 1);
    // remainder spread keeps edges within one row of each other
    for (int axis = 0; axis < 2; ++axis) {
      index_t lo = 1 << 30, hi = 0;
      for (int w = 0; w < g.worker_count(); ++w) {
        const Box b = g.subdomain(w);
        lo = std::min(lo, b.hi[axis] - b.lo[axis]);
        hi = std::max(hi, b.hi[axis] - b.lo[axis]);
      }
      CHECK(hi - lo <= 1);
    }
  }

  SUBCASE("snake order steps between grid-adjacent workers") {
    const WorkerGrid g = make_grid(Domain::d2(96, 64), 12, Domain::d2(4, 4));
    const auto& order = g.snake_order();
    REQUIRE(static_cast<int>(order.size()) == g.worker_count());
    std::set<int> seen(order.begin(), order.end());
    CHECK(static_cast<int>(seen.size()) == g.worker_count());
    for (std::size_t i = 1; i < order.size(); ++i)
      CHECK(g.adjacent(order[i - 1], order[i]));
  }
}

TEST_CASE("border geometry") {
  SUBCASE("1d worked example") {
    const Domain omega = Domain::d1(400);
    const Domain theta = Domain::d1(10);
    Box sub{1, make_pos(100), make_pos(200)};
    const BorderGeometry bg(sub, theta, omega);
    CHECK(bg.in_border_L(make_pos(100)));
    CHECK(bg.in_border_L(make_pos(109)));
    CHECK(!bg.in_border_L(make_pos(110)));
    CHECK(!bg.in_border_L(make_pos(189)));
    CHECK(bg.in_border_L(make_pos(190)));
    CHECK(bg.in_border_L(make_pos(199)));
    CHECK(!bg.in_border_L(make_pos(200)));

    CHECK(bg.in_extension(make_pos(90)));
    CHECK(bg.in_extension(make_pos(99)));
    CHECK(!bg.in_extension(make_pos(89)));
    CHECK(bg.in_extension(make_pos(200)));
    CHECK(bg.in_extension(make_pos(209)));
    CHECK(!bg.in_extension(make_pos(210)));
    CHECK(!bg.in_extension(make_pos(150)));

    CHECK(bg.in_border_2L(make_pos(119)));
    CHECK(!bg.in_border_2L(make_pos(120)));
    CHECK(bg.in_border_2L(make_pos(180)));
  }

  SUBCASE("extension clips at the domain edge") {
    const Domain omega = Domain::d1(200);
    const Domain theta = Domain::d1(10);
    Box sub{1, make_pos(0), make_pos(100)};
    const BorderGeometry bg(sub, theta, omega);
    CHECK(!bg.in_extension(make_pos(0)));
    CHECK(bg.in_extension(make_pos(100)));
    CHECK(bg.slab().lo[0] == 0);  // nothing below the domain
    CHECK(bg.slab().hi[0] == 110);
  }

  SUBCASE("2d border is the full rim") {
    const Domain omega = Domain::d2(64, 64);
    const Domain theta = Domain::d2(4, 4);
    Box sub{2, make_pos(16, 16), make_pos(32, 32)};
    const BorderGeometry bg(sub, theta, omega);
    CHECK(bg.in_border_L(make_pos(17, 24)));  // near one face only
    CHECK(bg.in_border_L(make_pos(17, 17)));  // corner
    CHECK(!bg.in_border_L(make_pos(24, 24)));
    index_t count = 0;
    for_each_pos(sub, [&](const Pos& p) { count += bg.in_border_L(p); });
    CHECK(count == 16 * 16 - 8 * 8);
  }
}

TEST_CASE("notify_set") {
  const Domain omega = Domain::d2(96, 96);
  const Domain theta = Domain::d2(4, 4);
  const WorkerGrid g = make_grid(omega, 9, theta);  // 3x3 of 32x32
  const int center = g.index(make_pos(1, 1));

  SUBCASE("interior update notifies nobody") {
    CHECK(notify_set(make_pos(48, 48), g).empty());
  }

  SUBCASE("face update notifies exactly the facing neighbor") {
    // position near the right face of the center worker
    const Pos p = make_pos(48, 62);
    const auto set = notify_set(p, g);
    REQUIRE(set.size() == 1);
    CHECK(set[0] == g.index(make_pos(1, 2)));
  }

  SUBCASE("corner update notifies three neighbors") {
    const Pos p = make_pos(62, 62);
    const auto set = notify_set(p, g);
    CHECK(set.size() == 3);
  }

  SUBCASE("routing completeness on a brute-force sweep") {
    Pos margin{theta.sizes[0], theta.sizes[1], 0};
    for_each_pos(omega.box(), [&](const Pos& p) {
      Box v;
      v.d = 2;
      for (int i = 0; i < 2; ++i) {
        v.lo[i] = p[i] - theta.sizes[i] + 1;
        v.hi[i] = p[i] + theta.sizes[i];
      }
      const int self = g.owner(p);
      std::set<int> want;
      for (int w = 0; w < g.worker_count(); ++w) {
        if (w == self) continue;
        const Box reach =
            g.subdomain(w).expanded(margin).intersect(omega.box());
        if (v.intersects(reach)) want.insert(w);
      }
      const auto got = notify_set(p, g);
      CHECK(std::set<int>(got.begin(), got.end()) == want);
      for (int w : got) CHECK(g.adjacent(self, w));
    });
  }
}

TEST_CASE("soft lock arbitration") {
  SUBCASE("a strictly better competitor rejects the candidate") {
    const Competitor c[]{{0.7, 2}};
    CHECK(!soft_lock_accepts(0.5, 1, c));
  }

  SUBCASE("equal magnitudes resolve by worker index") {
    const Competitor lower[]{{0.5, 0}};
    const Competitor higher[]{{0.5, 3}};
    CHECK(!soft_lock_accepts(0.5, 1, lower));
    CHECK(soft_lock_accepts(0.5, 1, higher));
  }

  SUBCASE("no competitors accepts") {
    CHECK(soft_lock_accepts(0.0, 0, {}));
  }

  SUBCASE("arbitration is total: exactly one of two views wins") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> mag(0, 1);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 2000; ++trial) {
      const double a = mag(rng);
      const double b = coin(rng) ? a : mag(rng);  // force frequent ties
      const int wa = 3, wb = 5;
      const Competitor from_a[]{{b, wb}};
      const Competitor from_b[]{{a, wa}};
      const bool a_wins = soft_lock_accepts(a, wa, from_a);
      const bool b_wins = soft_lock_accepts(b, wb, from_b);
      CHECK(a_wins != b_wins);
    }
  }
}

TEST_CASE("interference decomposition") {
  std::mt19937_64 rng(101);
  const Domain omega = Domain::d1(64);
  const Domain theta = Domain::d1(5);
  const Dictionary d = oracle::random_dictionary(rng, 3, 2, theta);
  csc::XCorrTable xc(d, omega);

  SUBCASE("far-apart updates do not interfere at all") {
    const SimultaneousUpdate u[]{{0, make_pos(5), 1.3}, {1, make_pos(40), -2.0}};
    CHECK(interference_delta(u, xc) == 0.0);
  }

  SUBCASE("a single update has no cross-term") {
    const SimultaneousUpdate u[]{{2, make_pos(11), 0.7}};
    CHECK(interference_delta(u, xc) == 0.0);
  }

  SUBCASE("overlapping sets match the direct objective difference") {
    // exercises pair counts 2..5 including shared neighborhoods (3+ updates
    // inside one V), which the 1d analysis of prior work could not cover
    for (int n_up = 2; n_up <= 5; ++n_up) {
      const Signal x = oracle::random_signal(rng, omega, 2);
      csc::XCorrTable xcr(d, omega);
      xcr.prepare_all();
      csc::CoordKernel kernel(xcr, 0.15);
      csc::CscState s = csc::init_state(x, d);

      std::uniform_int_distribution<int> atom_dist(0, 2);
      std::uniform_int_distribution<index_t> base(20, 30);
      std::normal_distribution<double> val(0.0, 1.5);
      std::vector<SimultaneousUpdate> ups;
      std::set<std::pair<int, index_t>> used;
      while (static_cast<int>(ups.size()) < n_up) {
        const int k = atom_dist(rng);
        const index_t p = base(rng);  // clustered: overlapping neighborhoods
        if (!used.insert({k, p}).second) continue;
        ups.push_back({k, make_pos(p), val(rng)});
      }

      double sum_individual = 0;
      for (const auto& u : ups) {
        csc::CandidateUpdate cu;
        cu.atom = u.atom;
        cu.pos = u.pos;
        cu.old_value = s.z_at(u.atom, u.pos);
        cu.new_value = cu.old_value + u.dz;
        cu.dz = u.dz;
        sum_individual += kernel.cost_delta(s, cu);
      }

      ActivationMap z_before(omega, 3);
      csc::export_region(s, s.slab, z_before);
      ActivationMap z_after = z_before;
      for (const auto& u : ups) z_after.at(u.atom, u.pos) += u.dz;
      const double direct = oracle::objective_loops(x, z_before, d, 0.15) -
                            oracle::objective_loops(x, z_after, d, 0.15);

      const double cross = interference_delta(ups, xcr);
      CHECK(std::abs(sum_individual - cross - direct) /
                std::max(1.0, std::abs(direct)) <
            1e-10);
    }
  }
}

TEST_CASE("acceptance bound") {
  const Domain theta = Domain::d2(16, 16);

  SUBCASE("worked 2x2 example") {
    const WorkerGrid g = make_grid(Domain::d2(512, 512), 4, theta);
    const auto b = acceptance_bound(g);
    CHECK(b.value == doctest::Approx(0.87890625).epsilon(1e-12));
    CHECK(!b.clamped);
  }

  SUBCASE("single worker in 1d") {
    const Domain om = Domain::d1(512);
    const WorkerGrid g = make_grid(om, 1, Domain::d1(16));
    CHECK(acceptance_bound(g).value == doctest::Approx(1.0 - 16.0 / 512));
  }

  SUBCASE("near the half-speed regime") {
    // per-axis count about (T/L) * (1 - 2^(-1/2)) lands the bound near 1/2
    const WorkerGrid g(Domain::d2(512, 512), theta, make_pos(9, 9));
    const auto b = acceptance_bound(g);
    CHECK(b.value == doctest::Approx(0.5).epsilon(0.05));
  }

  SUBCASE("clamps to zero when a worker row is thinner than L") {
    // construct directly; make_grid would refuse this geometry
    const WorkerGrid g(Domain::d1(64), Domain::d1(2), make_pos(32));
    const auto b = acceptance_bound(g);
    CHECK(b.value == 0.0);
    CHECK(b.clamped);
  }
}
