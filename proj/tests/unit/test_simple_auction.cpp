#include <doctest.h>

#include <cmath>
#include <memory>

#include "adauction/error.hpp"
#include "adauction/simple_auction.hpp"
#include "support.hpp"

using namespace adauction;

namespace {

const auto U = ValueDistribution::uniform(0, 1);

AdProfile uniform_random_profile() {
  return AdProfile({{U, QualityLaw::Random}, {U, QualityLaw::Random}, {U, QualityLaw::Random}});
}

AdProfile correlated_profile() {
  auto su = ValueDistribution::shifted_uniform(1, 2);
  return AdProfile({{U, QualityLaw::Good}, {U, QualityLaw::Good}, {su, QualityLaw::Bad}});
}

std::shared_ptr<const MdpSolution> solve(const AdProfile& p, std::size_t samples) {
  auto grid = StateGrid::unit(11);
  SolverOptions opt;
  opt.n_samples = samples;
  return std::make_shared<const MdpSolution>(solve_value_iteration(p, TransitionKernel::step_kernel(grid), grid, opt));
}

}  // namespace

TEST_CASE("second price with eager reserves") {
  std::vector<double> bids{0.9, 0.7};
  std::vector<Reserve> r{Reserve::at(0.5), Reserve::at(0.5)};
  auto a = spa_with_eager_reserves(bids, r);
  CHECK(a.winner == 0u);
  CHECK(a.payment == 0.7);
  r = {Reserve::at(0.5), Reserve::at(0.8)};
  auto b = spa_with_eager_reserves(bids, r);
  CHECK(b.winner == 0u);
  CHECK(b.payment == 0.5);
  std::vector<double> one{0.6};
  std::vector<Reserve> never{Reserve::above_support()};
  CHECK_FALSE(spa_with_eager_reserves(one, never).winner);
  std::vector<double> tie{0.6, 0.6};
  std::vector<Reserve> zero{Reserve::at(0.0), Reserve::at(0.0)};
  auto t = spa_with_eager_reserves(tie, zero);
  CHECK(t.winner == 0u);
  CHECK(t.payment == 0.6);
}

TEST_CASE("partition choice") {
  std::vector<Quality> all_good{Quality::Good, Quality::Good};
  AllocationStats st;
  st.r_good = 0.0;
  st.r_bad = 0.3;
  auto p = choose_partition(st, all_good);
  CHECK(p.s1 == std::vector<std::size_t>{0, 1});
  CHECK(p.s2.empty());

  std::vector<Quality> mixed{Quality::Bad, Quality::Good};
  st.r_good = st.r_bad = 0.25;
  st.p_good = 0.4;
  st.p_bad = 0.3;
  auto tie = choose_partition(st, mixed);
  CHECK(tie.s1_is_good);
  CHECK(tie.s1 == std::vector<std::size_t>{1});
  CHECK(tie.p1 == 0.4);
  CHECK(tie.p2 == 0.3);

  std::vector<Quality> all_bad{Quality::Bad, Quality::Bad};
  st.r_good = 1.0;
  st.r_bad = 0.0;
  CHECK_FALSE(choose_partition(st, all_bad).s1_is_good);
}

TEST_CASE("correlated profile: partition branch matches an independent re-estimate") {
  auto profile = correlated_profile();
  auto sol = solve(profile, 20000);
  auto samples = SampleSet::draw(profile, sol->n_samples, sol->sample_seed);
  std::vector<Quality> q{Quality::Good, Quality::Good, Quality::Bad};
  const std::size_t s = 5;
  auto plan = choose_partition(*sol, samples, s, q);

  Rng rng(404);
  double rg = 0.0, rb = 0.0;
  const std::size_t n = 1000000;
  for (std::size_t k = 0; k < n; ++k) {
    double phi[3] = {2 * rng.uniform() - 1, 2 * rng.uniform() - 1, 2 * (1 + rng.uniform()) - 2};
    double best = 0.0;
    int w = -1;
    for (int i = 0; i < 3; ++i) {
      double score = 0.5 * phi[i] + (i < 2 ? sol->delta_good[s] : sol->delta_bad[s]);
      if (score > best) best = score, w = i;
    }
    if (w >= 0) (w < 2 ? rg : rb) += phi[w];
  }
  CHECK(plan.s1_is_good == (rg >= rb));
}

TEST_CASE("single first-stage bidder reserve") {
  AdProfile one({{U, QualityLaw::Good}});
  auto sol = std::make_shared<const MdpSolution>(testing::flat_solution({0.0, 0.5, 1.0}, 0.1, 0.1, 0.9, 1));
  TwoStagePlanner planner(sol, one, SampleSet::draw(one, 1000, 1));
  std::vector<Quality> g{Quality::Good};
  std::vector<double> bid{0.7};
  Rng rng(3);
  auto res = two_stage_spa({0.5, bid, g, one}, planner, rng);
  REQUIRE(res.outcome.winner == 0u);
  CHECK(res.outcome.payment == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(res.trace.stage == 1);
  CHECK(res.trace.table.phi_tilde == -INFINITY);
  std::vector<double> low{0.35};
  CHECK_FALSE(two_stage_spa({0.5, low, g, one}, planner, rng).outcome.winner);
}

TEST_CASE("scaled reserve at the zero state") {
  CHECK(scaled_reserve(U, -0.1, 0.0) == Reserve::at(0.0));
  CHECK(scaled_reserve(U, 0.0, 0.0) == Reserve::at(0.0));
  CHECK_FALSE(scaled_reserve(U, 0.1, 0.0).reachable());
  auto r = scaled_reserve(U, -0.1, 0.5);
  CHECK(r.value() == doctest::Approx(0.4).epsilon(1e-9));
}

namespace {

struct Tally {
  double rounds = 0, s1_wins = 0, s1_expect = 0, s1_var = 0;
  double s2_wins = 0, s2_expect = 0, s2_var = 0;
  double plan_var = 0;  // sampling error of the planner's p1 / p2
  double entry_rounds = 0, entries = 0, entry_expect = 0, entry_var = 0;
  double virt = 0, virt2 = 0, stage_bound = 0;
  double clamped = 0, all = 0;
  bool zero_rho_excludes = true;
};

Tally run_rounds(const TwoStagePlanner& planner, const AdProfile& profile, double state, std::size_t n, bool skip_clamped,
                 std::uint64_t seed) {
  Tally t;
  Rng values(seed), mech(seed + 1);
  const std::size_t s = planner.solution().grid.index_of(state);
  const double m = static_cast<double>(planner.samples().rows());
  for (std::size_t k = 0; k < n; ++k) {
    auto v = profile.draw_values(values);
    auto q = profile.draw_qualities(values);
    const auto& plan = planner.plan(s, quality_mask(q));
    auto res = two_stage_spa({state, v, q, profile}, planner, plan, mech);
    t.all += 1;
    const auto& tr = res.trace;
    if (tr.table.i_star && tr.table.rho1 == 0.0) {
      const auto& r = tr.table.reserves[*tr.table.i_star];
      t.zero_rho_excludes = t.zero_rho_excludes && (!r.reachable() || r.value() >= U.upper());
    }
    if (tr.table.rho_clamped) {
      t.clamped += 1;
      if (skip_clamped) continue;
    }
    const auto& part = plan.partition;
    t.rounds += 1;
    t.s1_wins += tr.stage == 1;
    t.s2_wins += tr.stage == 2;
    t.s1_expect += part.p1;
    t.s1_var += part.p1 * (1 - part.p1);
    t.s2_expect += part.p2;
    t.s2_var += part.p2 * (1 - part.p2);
    t.plan_var += 0.25 / m;
    if (tr.stage != 1 && !part.s2.empty() && part.p1 < 1) {
      double e = part.p2 / (1 - part.p1);
      t.entry_rounds += 1;
      t.entries += tr.second_stage_entered;
      t.entry_expect += e;
      t.entry_var += e * (1 - e);
    }
    double phi = res.outcome.winner ? virtual_value(profile.value(*res.outcome.winner), v[*res.outcome.winner]) : 0.0;
    t.virt += phi;
    t.virt2 += phi * phi;
    t.stage_bound += 0.25 * std::max(part.r1, part.r2);
  }
  return t;
}

}  // namespace

TEST_CASE("uniform profile at 0.5: stage frequencies match p1 and p2") {
  auto profile = uniform_random_profile();
  auto sol = solve(profile, 100000);
  const std::size_t n = 100000;

  for (auto mode : {P1PrimeMode::Conditional, P1PrimeMode::Marginal}) {
    CAPTURE(static_cast<int>(mode));
    auto planner = TwoStagePlanner::create(sol, profile, mode);
    // Conditional mode: only rounds whose rho needed no clamping carry the
    // exact matching property.
    auto t = run_rounds(*planner, profile, 0.5, n, mode == P1PrimeMode::Conditional, 99);
    MESSAGE("clamped fraction " << t.clamped / t.all);
    // Planner p1 / p2 are sample means over the solver rows; their error
    // adds to the binomial error of the rounds (fully correlated across rounds).
    auto band = [&](double var) { return 3 * std::sqrt(var / (t.rounds * t.rounds) + t.plan_var / t.rounds); };
    CHECK(std::abs(t.s1_wins - t.s1_expect) / t.rounds <= band(t.s1_var));
    CHECK(std::abs(t.s2_wins - t.s2_expect) / t.rounds <= band(t.s2_var));
    REQUIRE(t.entry_rounds > 0);
    CHECK(std::abs(t.entries - t.entry_expect) <= 3 * std::sqrt(t.entry_var));
    const double mean_virt = t.virt / t.rounds;
    const double se_virt = std::sqrt((t.virt2 / t.rounds - mean_virt * mean_virt) / t.rounds);
    CHECK(mean_virt >= t.stage_bound / t.rounds - 3 * se_virt);
    CHECK(t.zero_rho_excludes);
  }
}

TEST_CASE("planner validation") {
  auto profile = uniform_random_profile();
  CHECK_THROWS_AS(TwoStagePlanner::create(nullptr, profile), ConfigError);
  auto sol = std::make_shared<const MdpSolution>(testing::flat_solution({0.0, 1.0}, 0.0, 0.0, 0.9, 2));
  CHECK_THROWS_AS(TwoStagePlanner(sol, profile, SampleSet::draw(profile, 10, 1)), ConfigError);
}
