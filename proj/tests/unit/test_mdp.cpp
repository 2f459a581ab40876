#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "adauction/error.hpp"
#include "adauction/mdp.hpp"
#include "support.hpp"

using namespace adauction;

namespace {

AdProfile uniform_random_profile() {
  auto u = ValueDistribution::uniform(0, 1);
  return AdProfile({{u, QualityLaw::Random}, {u, QualityLaw::Random}, {u, QualityLaw::Random}});
}

// Every row of every state moves like "no ad": corrections vanish.
TransitionKernel outcome_free_kernel(const StateGrid& grid) {
  auto k = TransitionKernel::step_kernel(grid, {0.1, 0.1, 0.0, 0.1});
  for (std::size_t s = 0; s < grid.size(); ++s) {
    auto none = std::vector<double>(k.row(s, Outcome::None).begin(), k.row(s, Outcome::None).end());
    k.set_row(s, Outcome::Good, none);
    k.set_row(s, Outcome::Bad, none);
  }
  return k;
}

}  // namespace

TEST_CASE("state grid") {
  auto g = StateGrid::unit(11);
  CHECK(g.size() == 11);
  CHECK(g.index_of(0.5) == 5);
  CHECK(g.index_of(0.3) == 3);
  CHECK_THROWS_AS(g.index_of(0.55), StateOffGrid);
  CHECK_THROWS_AS(StateGrid({0.5, 0.2}), ConfigError);
  CHECK_THROWS_AS(StateGrid({0.0, 1.5}), ConfigError);
}

TEST_CASE("default step kernel") {
  auto g = StateGrid::unit(11);
  auto k = TransitionKernel::step_kernel(g);
  CHECK_NOTHROW(k.validate());
  CHECK(k.row(5, Outcome::Bad)[4] == doctest::Approx(0.8));
  CHECK(k.row(5, Outcome::Bad)[5] == doctest::Approx(0.2));
  CHECK(k.row(5, Outcome::Good)[6] == doctest::Approx(0.2));
  CHECK(k.row(5, Outcome::None)[6] == doctest::Approx(0.1));
  CHECK(k.row(10, Outcome::Good)[10] == 1.0);
  CHECK(k.row(0, Outcome::Bad)[0] == 1.0);
  CHECK_THROWS_AS(k.set_row(0, Outcome::Good, std::vector<double>(11, 0.05)), ConfigError);
}

TEST_CASE("bellman backup with outcome-independent rows is Myerson plus continuation") {
  auto grid = StateGrid::unit(11);
  auto kernel = outcome_free_kernel(grid);
  auto profile = uniform_random_profile();
  auto samples = SampleSet::draw(profile, 5000, 3);
  std::vector<double> V(grid.size());
  for (std::size_t s = 0; s < V.size(); ++s) V[s] = 1.0 + 0.3 * static_cast<double>(s);
  const std::size_t s = 4;
  double myerson = 0.0;
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    double best = 0.0;
    for (std::size_t i = 0; i < 3; ++i) best = std::max(best, 2 * samples.value(r, i) - 1);
    myerson += best;
  }
  myerson /= static_cast<double>(samples.rows());
  const double cont = 0.9 * (0.1 * V[5] + 0.9 * V[4]);
  CHECK(bellman_backup(V, s, grid, kernel, 0.9, samples) == doctest::Approx(0.4 * myerson + cont).epsilon(1e-12));
}

TEST_CASE("absorbing zero state has value zero") {
  auto grid = StateGrid::unit(11);
  auto kernel = TransitionKernel::step_kernel(grid);
  std::vector<double> stay(grid.size(), 0.0);
  stay[0] = 1.0;
  for (auto o : {Outcome::Good, Outcome::Bad, Outcome::None}) kernel.set_row(0, o, stay);
  SolverOptions opt;
  opt.n_samples = 2000;
  auto sol = solve_value_iteration(uniform_random_profile(), kernel, grid, opt);
  CHECK(sol.value[0] == 0.0);
}

TEST_CASE("gamma = 0 gives the one-round optimum after one sweep") {
  auto grid = StateGrid::unit(11);
  SolverOptions opt;
  opt.gamma = 0.0;
  opt.n_samples = 3000;
  auto profile = uniform_random_profile();
  auto sol = solve_value_iteration(profile, TransitionKernel::step_kernel(grid), grid, opt);
  auto samples = SampleSet::draw(profile, opt.n_samples, opt.seed);
  double myerson = 0.0;
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    double best = 0.0;
    for (std::size_t i = 0; i < 3; ++i) best = std::max(best, 2 * samples.value(r, i) - 1);
    myerson += best;
  }
  myerson /= static_cast<double>(samples.rows());
  for (std::size_t s = 0; s < grid.size(); ++s) CHECK(sol.value[s] == doctest::Approx(grid[s] * myerson).epsilon(1e-12));
  REQUIRE(sol.residual_history.size() >= 2);
  CHECK(sol.residual_history[1] == 0.0);
}

TEST_CASE("solution invariants on the random-quality uniform profile") {
  auto grid = StateGrid::unit(11);
  SolverOptions opt;
  opt.n_samples = 5000;
  auto sol = solve_value_iteration(uniform_random_profile(), TransitionKernel::step_kernel(grid), grid, opt);
  CHECK(sol.residual <= opt.tol);
  for (std::size_t k = 1; k < sol.residual_history.size(); ++k) {
    CHECK(sol.residual_history[k] <= opt.gamma * sol.residual_history[k - 1] + 1e-12);
  }
  for (std::size_t s = 0; s < grid.size(); ++s) {
    CHECK(sol.value[s] >= 0.0);
    CHECK(sol.p_alloc_good[s] + sol.p_alloc_bad[s] <= 1.0 + 1e-12);
    double wins = 0.0, virt = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      wins += sol.win_prob[s][i];
      virt += sol.virtual_revenue[s][i];
    }
    CHECK(std::abs(wins - sol.p_alloc_good[s] - sol.p_alloc_bad[s]) <= 1e-9);
    CHECK(std::abs(sol.expected_reward[s] - grid[s] * virt) <= 1e-9);
    CHECK(sol.delta_good[s] == doctest::Approx(opt.gamma * sol.gap_good[s]));
  }
}

TEST_CASE("value iterates from zero are nondecreasing") {
  auto grid = StateGrid::unit(11);
  auto kernel = TransitionKernel::step_kernel(grid);
  auto samples = SampleSet::draw(uniform_random_profile(), 2000, 5);
  std::vector<double> V(grid.size(), 0.0), next(grid.size());
  for (int k = 0; k < 60; ++k) {
    for (std::size_t s = 0; s < grid.size(); ++s) next[s] = bellman_backup(V, s, grid, kernel, 0.95, samples);
    for (std::size_t s = 0; s < grid.size(); ++s) CHECK(next[s] >= V[s] - 1e-12);
    V = next;
  }
}

TEST_CASE("doubling the sample count moves V within Monte Carlo error") {
  // A +-1e-6 band is not reachable by a finite sample average; use 3 standard
  // errors of the per-round reward at the largest state instead.
  auto grid = StateGrid::unit(11);
  auto kernel = TransitionKernel::step_kernel(grid);
  auto profile = uniform_random_profile();
  SolverOptions a, b;
  b.n_samples = 2 * a.n_samples;
  b.seed = 77;
  auto sa = solve_value_iteration(profile, kernel, grid, a);
  auto sb = solve_value_iteration(profile, kernel, grid, b);
  // Per-row reward is bounded by 1 + |Delta|; its variance under one sample
  // set bounds the error of V by (1/(1 - gamma)) times the row SE.
  auto samples = SampleSet::draw(profile, a.n_samples, a.seed);
  double mean = 0.0, sq = 0.0;
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    double best = 0.0;
    for (std::size_t i = 0; i < 3; ++i) best = std::max(best, samples.phi(r, i));
    mean += best;
    sq += best * best;
  }
  mean /= static_cast<double>(samples.rows());
  const double sd = std::sqrt(sq / static_cast<double>(samples.rows()) - mean * mean);
  const double se = sd * std::sqrt(1.0 / a.n_samples + 1.0 / b.n_samples) / (1.0 - a.gamma);
  for (std::size_t s = 0; s < grid.size(); ++s) CHECK(std::abs(sa.value[s] - sb.value[s]) <= 3 * se);
}

TEST_CASE("solver errors") {
  auto grid = StateGrid::unit(11);
  auto kernel = TransitionKernel::step_kernel(grid);
  SolverOptions opt;
  opt.n_samples = 500;
  AdProfile toy({{ValueDistribution::point_mass(0.1), QualityLaw::Good},
                 {ValueDistribution::point_mass(1.0), QualityLaw::Bad}});
  CHECK_THROWS_AS(solve_value_iteration(toy, kernel, grid, opt), DiscreteUnsupported);
  opt.max_iters = 3;
  CHECK_THROWS_AS(solve_value_iteration(uniform_random_profile(), kernel, grid, opt), NotConverged);
  opt.max_iters = 10000;
  opt.gamma = 1.0;
  CHECK_THROWS_AS(solve_value_iteration(uniform_random_profile(), kernel, grid, opt), ConfigError);
}

TEST_CASE("modified virtual value") {
  auto u = ValueDistribution::uniform(0, 1);
  auto sol = testing::flat_solution({0.0, 0.5, 1.0}, 0.2, -0.1);
  CHECK(modified_virtual_value(sol, u, Quality::Good, 0.75, 0.5) == doctest::Approx(0.45).epsilon(1e-15));
  CHECK(modified_virtual_value(sol, u, Quality::Bad, 0.75, 0.5) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(modified_virtual_value(sol, u, Quality::Good, 0.1, 0.0) == 0.2);
  CHECK(modified_virtual_value(sol, u, Quality::Good, 0.9, 0.0) == 0.2);
  auto zero = testing::flat_solution({0.0, 0.5, 1.0}, 0.0, 0.0);
  CHECK(modified_virtual_value(zero, u, Quality::Bad, 0.75, 1.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(modified_virtual_value(sol, u, Quality::Good, 1.2, 0.5), OutOfSupport);
  CHECK_THROWS_AS(modified_virtual_value(sol, u, Quality::Good, 0.5, 0.3), StateOffGrid);
}

TEST_CASE("allocation statistics, trivial cases") {
  auto u = ValueDistribution::uniform(0, 1);
  SUBCASE("all good") {
    AdProfile p({{u, QualityLaw::Good}, {u, QualityLaw::Good}});
    auto samples = SampleSet::draw(p, 4000, 2);
    auto sol = testing::flat_solution({0.0, 0.5, 1.0}, 0.05, -0.3);
    auto st = allocation_stats(sol, samples, 1);
    CHECK(st.p_bad == 0.0);
    CHECK(st.r_bad == 0.0);
    CHECK(st.p_good > 0.0);
  }
  SUBCASE("one bidder at the top state") {
    AdProfile p({{u, QualityLaw::Good}});
    const std::size_t n = 40000;
    auto samples = SampleSet::draw(p, n, 4);
    auto sol = testing::flat_solution({0.0, 1.0}, 0.0, 0.0);
    auto st = allocation_stats(sol, samples, 1);
    CHECK(std::abs(st.p_good - 0.5) <= 3 * std::sqrt(0.25 / n));
  }
}

TEST_CASE("optimal winner with outcome-independent rows is Myerson's winner") {
  auto grid = StateGrid::unit(11);
  auto profile = uniform_random_profile();
  SolverOptions opt;
  opt.n_samples = 3000;
  auto sol = solve_value_iteration(profile, outcome_free_kernel(grid), grid, opt);
  auto samples = SampleSet::draw(profile, opt.n_samples, opt.seed);
  for (std::size_t s = 1; s < grid.size(); ++s) {
    CHECK(sol.delta_good[s] == 0.0);
    CHECK(sol.delta_bad[s] == 0.0);
    std::vector<Quality> q(3);
    for (std::size_t r = 0; r < samples.rows(); ++r) {
      std::optional<std::size_t> expect;
      double best = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        q[i] = samples.quality(r, i);
        if (grid[s] * samples.phi(r, i) > best) {
          best = grid[s] * samples.phi(r, i);
          expect = i;
        }
      }
      CHECK(optimal_winner(samples.phis(r), q, grid[s], 0.0, 0.0) == expect);
    }
  }
}

TEST_CASE("allocation statistics agree with an independent re-estimate") {
  auto grid = StateGrid::unit(11);
  auto profile = uniform_random_profile();
  SolverOptions opt;
  auto sol = solve_value_iteration(profile, TransitionKernel::step_kernel(grid), grid, opt);
  const std::size_t s = 5;
  const double ctr = grid[s];
  auto samples = SampleSet::draw(profile, opt.n_samples, opt.seed);
  auto st = allocation_stats(sol, samples, s);

  // Fresh draws, scored directly from phi(v) = 2v - 1.
  const std::size_t n = 1000000;
  Rng rng(2024);
  double pg = 0, pb = 0, rg = 0, rb = 0, rg2 = 0, rb2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double best = 0.0, best_phi = 0.0;
    int best_q = 0;
    for (int i = 0; i < 3; ++i) {
      double v = rng.uniform();
      int q = rng.uniform() < 0.5 ? 1 : -1;
      double phi = 2 * v - 1;
      double score = ctr * phi + (q > 0 ? sol.delta_good[s] : sol.delta_bad[s]);
      if (score > best) {
        best = score;
        best_phi = phi;
        best_q = q;
      }
    }
    if (best_q > 0) {
      pg += 1;
      rg += best_phi;
      rg2 += best_phi * best_phi;
    } else if (best_q < 0) {
      pb += 1;
      rb += best_phi;
      rb2 += best_phi * best_phi;
    }
  }
  const double N = static_cast<double>(n), M = static_cast<double>(samples.rows());
  auto band = [&](double p, double second_moment) {
    double var = second_moment - p * p;
    return 3 * std::sqrt(var * (1.0 / N + 1.0 / M));
  };
  pg /= N, pb /= N, rg /= N, rb /= N;
  CHECK(std::abs(st.p_good - pg) <= band(pg, pg));
  CHECK(std::abs(st.p_bad - pb) <= band(pb, pb));
  CHECK(std::abs(st.r_good - rg) <= band(rg, rg2 / N));
  CHECK(std::abs(st.r_bad - rb) <= band(rb, rb2 / N));
}
