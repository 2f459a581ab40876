#include <doctest.h>

#include <cmath>
#include <functional>
#include <memory>

#include "adauction/error.hpp"
#include "adauction/mechanisms.hpp"
#include "support.hpp"

using namespace adauction;

namespace {

const auto U = ValueDistribution::uniform(0, 1);

AdProfile two_uniform() { return AdProfile({{U, QualityLaw::Random}, {U, QualityLaw::Random}}); }

struct Run {
  const AdProfile& profile;
  std::vector<Quality> q;
  double state;
  std::function<AuctionOutcome(const AuctionInput&)> mech;

  AuctionOutcome operator()(std::vector<double> bids) const {
    AuctionInput in{state, bids, q, profile};
    return mech(in);
  }
};

// Smallest own bid that wins, by a 200-point scan then bisection.
std::optional<double> critical_bid(const Run& run, std::vector<double> bids, std::size_t i, double lo, double hi) {
  auto wins = [&](double b) {
    bids[i] = b;
    return run(bids).winner == i;
  };
  if (!wins(hi)) return std::nullopt;
  if (wins(lo)) return lo;
  double a = lo, b = hi;
  for (int k = 1; k < 200; ++k) {
    double x = lo + (hi - lo) * k / 199.0;
    if (wins(x)) {
      b = x;
      break;
    }
    a = x;
  }
  while (b - a > 1e-12) {
    double m = 0.5 * (a + b);
    (wins(m) ? b : a) = m;
  }
  return b;
}

}  // namespace

TEST_CASE("static multiplier examples") {
  auto p = two_uniform();
  std::vector<Quality> q{Quality::Good, Quality::Good};
  std::vector<double> bids{0.8, 0.6};
  auto out = run_static_multiplier({1.0, bids, q, p}, 0.0);
  REQUIRE(out.winner == 0u);
  CHECK(out.scores[0] == doctest::Approx(0.6));
  CHECK(out.scores[1] == doctest::Approx(0.2));
  CHECK(out.payment == doctest::Approx(0.6).epsilon(1e-9));

  bids = {0.4, 0.3};
  CHECK_FALSE(run_static_multiplier({1.0, bids, q, p}, 0.0).winner);

  SUBCASE("quality multiplier flips the winner") {
    std::vector<Quality> mixed{Quality::Good, Quality::Bad};
    Run run{p, mixed, 1.0, [](const AuctionInput& in) { return run_static_multiplier(in, 0.5); }};
    auto o = run({0.3, 0.9});
    REQUIRE(o.winner == 1u);
    CHECK(o.scores[0] == doctest::Approx(0.1));
    CHECK(o.scores[1] == doctest::Approx(0.3));
    CHECK(o.payment == doctest::Approx(0.8).epsilon(1e-9));
    auto crit = critical_bid(run, {0.3, 0.9}, 1, 0.0, 1.0);
    REQUIRE(crit);
    CHECK(std::abs(*crit - 0.8) <= 1e-9);
  }
}

TEST_CASE("ctr-scaled multiplier reduces to the static one") {
  auto p = two_uniform();
  std::vector<Quality> q{Quality::Good, Quality::Bad};
  std::vector<double> bids{0.45, 0.7};
  auto same = [](const AuctionOutcome& a, const AuctionOutcome& b) {
    return a.winner == b.winner && a.payment == b.payment && a.scores == b.scores;
  };
  CHECK(same(run_ctr_scaled({1.0, bids, q, p}, 0.7), run_static_multiplier({1.0, bids, q, p}, 0.0)));
  CHECK(same(run_ctr_scaled({0.0, bids, q, p}, 0.7), run_static_multiplier({0.0, bids, q, p}, 0.7)));
  CHECK(same(run_ctr_scaled({0.5, bids, q, p}, 1.0), run_static_multiplier({0.5, bids, q, p}, 0.5)));

  Rng rng(12);
  for (int k = 0; k < 2000; ++k) {
    double s = static_cast<double>(static_cast<int>(rng.uniform() * 11)) / 10.0;
    double eta = rng.uniform();
    std::vector<double> b{rng.uniform(), rng.uniform()};
    std::vector<Quality> qq{rng.uniform() < 0.5 ? Quality::Good : Quality::Bad,
                            rng.uniform() < 0.5 ? Quality::Good : Quality::Bad};
    CHECK(same(run_ctr_scaled({s, b, qq, p}, eta), run_static_multiplier({s, b, qq, p}, eta * (1.0 - s))));
  }
}

TEST_CASE("optimal-MDP auction") {
  auto p = two_uniform();
  std::vector<Quality> q{Quality::Good, Quality::Bad};

  SUBCASE("zero corrections give Myerson's auction") {
    auto sol = testing::flat_solution({0.0, 0.5, 1.0}, 0.0, 0.0);
    Rng rng(5);
    for (int k = 0; k < 500; ++k) {
      std::vector<double> b{rng.uniform(), rng.uniform()};
      for (double s : {0.5, 1.0}) {
        auto a = run_optimal_mdp({s, b, q, p}, sol);
        auto m = run_static_multiplier({s, b, q, p}, 0.0);
        CHECK(a.winner == m.winner);
        CHECK(std::abs(a.payment - m.payment) <= 1e-9);
      }
    }
  }

  SUBCASE("single bidder threshold") {
    AdProfile one({{U, QualityLaw::Good}});
    auto sol = testing::flat_solution({0.0, 0.5, 1.0}, 0.1, 0.1);
    std::vector<Quality> g{Quality::Good};
    std::vector<double> hi{0.7}, lo{0.39};
    auto win = run_optimal_mdp({0.5, hi, g, one}, sol);
    REQUIRE(win.winner == 0u);
    CHECK(win.payment == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(win.expected_revenue == doctest::Approx(0.2).epsilon(1e-9));
    CHECK_FALSE(run_optimal_mdp({0.5, lo, g, one}, sol).winner);
  }

  SUBCASE("zero state pays the support floor") {
    auto sol = testing::flat_solution({0.0, 0.5, 1.0}, 0.1, -0.2);
    std::vector<double> b{0.2, 0.9};
    auto out = run_optimal_mdp({0.0, b, q, p}, sol);
    REQUIRE(out.winner == 0u);
    CHECK(out.payment == 0.0);
  }

  SUBCASE("solved correlated profile: payment is the critical bid") {
    auto su = ValueDistribution::shifted_uniform(1, 2);
    AdProfile corr({{U, QualityLaw::Good}, {U, QualityLaw::Good}, {su, QualityLaw::Bad}});
    auto grid = StateGrid::unit(11);
    SolverOptions opt;
    opt.n_samples = 5000;
    auto sol = solve_value_iteration(corr, TransitionKernel::step_kernel(grid), grid, opt);
    std::vector<Quality> qq{Quality::Good, Quality::Good, Quality::Bad};
    Run run{corr, qq, 0.5, [&](const AuctionInput& in) { return run_optimal_mdp(in, sol); }};
    Rng rng(8);
    int checked = 0;
    for (int k = 0; k < 300; ++k) {
      std::vector<double> b{rng.uniform(), rng.uniform(), 1.0 + rng.uniform()};
      auto out = run(b);
      if (!out.winner) continue;
      std::size_t w = *out.winner;
      double lo = corr.value(w).lower(), hi = corr.value(w).upper();
      auto crit = critical_bid(run, b, w, lo, hi);
      REQUIRE(crit);
      CHECK(std::abs(out.payment - *crit) <= 1e-6);
      ++checked;
    }
    CHECK(checked > 100);
  }
}

TEST_CASE("adjusted-bid and reserve second price") {
  auto p = two_uniform();
  std::vector<Quality> q{Quality::Good, Quality::Bad};
  auto sol = testing::flat_solution({0.0, 0.5, 1.0}, 0.0, 0.0);
  std::vector<double> bids{0.9, 0.7};
  for (auto out : {run_spa_adjusted({0.5, bids, q, p}, sol, 0.0, 0.5), run_spa_reserve({0.5, bids, q, p}, 0.5)}) {
    REQUIRE(out.winner == 0u);
    CHECK(out.payment == doctest::Approx(0.7));
    CHECK(out.expected_revenue == doctest::Approx(0.35));
  }
  bids = {0.4, 0.3};
  CHECK_FALSE(run_spa_adjusted({0.5, bids, q, p}, sol, 0.0, 0.5).winner);
  CHECK_FALSE(run_spa_reserve({0.5, bids, q, p}, 0.5).winner);

  SUBCASE("single eligible bidder pays the reserve minus its adjustment") {
    // (eta / ctr) * gap = (1 / 0.5) * 0.1 = 0.2 for the good ad.
    auto adj = testing::flat_solution({0.0, 0.5, 1.0}, 0.09, -0.9, 0.9);
    std::vector<double> b{0.9, 0.1};
    auto out = run_spa_adjusted({0.5, b, q, p}, adj, 1.0, 0.5);
    REQUIRE(out.winner == 0u);
    CHECK(out.payment == doctest::Approx(0.3).epsilon(1e-12));
  }

  SUBCASE("unopposed without reserve pays zero") {
    std::vector<double> b{0.9, 0.1};
    auto out = run_spa_reserve({0.5, b, q, AdProfile({{U, QualityLaw::Good}, {U, QualityLaw::Good}})}, 0.0);
    REQUIRE(out.winner == 0u);
    CHECK(out.payment == doctest::Approx(0.1));
    AdProfile one({{U, QualityLaw::Good}});
    std::vector<double> single{0.9};
    std::vector<Quality> g{Quality::Good};
    CHECK(run_spa_reserve({0.5, single, g, one}, 0.0).payment == 0.0);
  }

  SUBCASE("ctr = 0 with eta > 0 is undefined") {
    CHECK_THROWS_AS(run_spa_adjusted({0.0, bids, q, p}, sol, 0.5, 0.2), ZeroStateUndefined);
    CHECK_NOTHROW(run_spa_adjusted({0.0, bids, q, p}, sol, 0.0, 0.2));
  }
}

TEST_CASE("score auctions charge the support floor when unopposed") {
  auto su = ValueDistribution::shifted_uniform(1, 2);
  AdProfile one({{su, QualityLaw::Good}});
  std::vector<Quality> g{Quality::Good};
  std::vector<double> b{1.3};
  auto out = run_static_multiplier({0.5, b, g, one}, 1.0);
  REQUIRE(out.winner == 0u);
  CHECK(out.payment == 1.0);
}

TEST_CASE("individual rationality and quality monotonicity") {
  auto p = two_uniform();
  Rng rng(31);
  for (int k = 0; k < 3000; ++k) {
    std::vector<double> b{rng.uniform(), rng.uniform()};
    std::vector<Quality> q{rng.uniform() < 0.5 ? Quality::Good : Quality::Bad,
                           rng.uniform() < 0.5 ? Quality::Good : Quality::Bad};
    double s = static_cast<double>(static_cast<int>(rng.uniform() * 11)) / 10.0;
    double eta = rng.uniform();
    for (int kind = 0; kind < 3; ++kind) {
      auto mech = [&](std::span<const Quality> qq) {
        AuctionInput in{s, b, qq, p};
        if (kind == 0) return run_static_multiplier(in, eta);
        if (kind == 1) return run_ctr_scaled(in, eta);
        return run_spa_reserve(in, eta);
      };
      auto out = mech(q);
      if (!out.winner) continue;
      const std::size_t w = *out.winner;
      CHECK(out.payment <= b[w] + 1e-12);
      CHECK(out.payment >= 0.0);
      if (kind < 2 && q[w] == Quality::Bad) {
        auto flipped = q;
        flipped[w] = Quality::Good;
        CHECK(mech(flipped).winner == w);
      }
    }
  }
}

TEST_CASE("input and spec validation") {
  auto p = two_uniform();
  std::vector<Quality> q{Quality::Good, Quality::Bad};
  std::vector<double> out_of_support{1.4, 0.2}, short_bids{0.4};
  CHECK_THROWS_AS(run_static_multiplier({0.5, out_of_support, q, p}, 0.0), OutOfSupport);
  CHECK_THROWS_AS(run_static_multiplier({0.5, short_bids, q, p}, 0.0), ConfigError);
  AdProfile discrete({{ValueDistribution::point_mass(0.5), QualityLaw::Good}});
  std::vector<double> half{0.5};
  std::vector<Quality> g{Quality::Good};
  CHECK_THROWS_AS(run_static_multiplier({0.5, half, g, discrete}, 0.0), DiscreteUnsupported);

  CHECK_THROWS_AS(validate(mechanism::StaticMultiplier{-0.1}), ConfigError);
  CHECK_THROWS_AS(validate(mechanism::OptimalMdp{}), ConfigError);
  CHECK_THROWS_AS(validate(mechanism::SimpleTwoStage{}), ConfigError);
  CHECK_NOTHROW(validate(mechanism::SpaReserve{0.3}));
  CHECK(mechanism_kind(mechanism::Myerson{}) == "myerson");
  CHECK(mechanism_kind(mechanism::SpaAdjusted{}) == "spa_adjusted");
}
