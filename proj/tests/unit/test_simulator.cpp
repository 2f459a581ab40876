#include <doctest.h>

#include <cmath>
#include <sstream>

#include "adauction/error.hpp"
#include "adauction/simulator.hpp"

using namespace adauction;

namespace {

const auto U = ValueDistribution::uniform(0, 1);

ExperimentConfig uniform_config(int reps, int rounds) {
  ExperimentConfig cfg;
  cfg.name = "uniform";
  cfg.rounds = rounds;
  cfg.repetitions = reps;
  cfg.seed = 11;
  cfg.bidders = {{U, QualityLaw::Random}, {U, QualityLaw::Random}, {U, QualityLaw::Random}};
  cfg.solver.n_samples = 5000;
  return cfg;
}

MechanismConfig mech(std::string kind) {
  MechanismConfig m;
  m.kind = std::move(kind);
  return m;
}

bool same_summary(const PointSummary& a, const PointSummary& b) {
  return a.revenue == b.revenue && a.state == b.state && a.good_rate == b.good_rate && a.bad_rate == b.bad_rate &&
         a.cumulative_revenue == b.cumulative_revenue && a.final_cumulative == b.final_cumulative;
}

}  // namespace

TEST_CASE("transitions of the default kernel") {
  auto grid = StateGrid::unit(11);
  auto k = TransitionKernel::step_kernel(grid);
  Rng rng(1);
  const int n = 100000;
  int down = 0;
  for (int i = 0; i < n; ++i) {
    CHECK(apply_transition(k, 10, Outcome::Good, rng) == 10u);
    CHECK(apply_transition(k, 0, Outcome::Bad, rng) == 0u);
    auto next = apply_transition(k, 5, Outcome::Bad, rng);
    CHECK((next == 4u || next == 5u));
    down += next == 4u;
  }
  CHECK(std::abs(down / double(n) - 0.8) <= 3 * std::sqrt(0.16 / n));
}

TEST_CASE("a mechanism that never allocates follows the no-ad walk") {
  auto cfg = uniform_config(1, 300);
  AdProfile p = cfg.profile();
  auto log = run_episode(p, cfg.grid, cfg.kernel, mechanism::SpaReserve{2.0}, {300, 0.5, ClickMode::Expected},
                         episode_streams(3, 0));
  double prev = 0.5;
  for (const auto& r : log.rounds) {
    CHECK(r.revenue == 0.0);
    CHECK(r.shown == Outcome::None);
    CHECK(r.state == prev);
    CHECK((r.next_state == r.state || std::abs(r.next_state - std::min(1.0, r.state + 0.1)) < 1e-12));
    prev = r.next_state;
  }
  CHECK(log.rounds.back().next_state > 0.5);
}

TEST_CASE("one round of second price with reserve") {
  AdProfile p({{U, QualityLaw::Good}, {U, QualityLaw::Good}, {U, QualityLaw::Bad}});
  std::vector<double> bids{0.9, 0.7, 0.1};
  std::vector<Quality> q{Quality::Good, Quality::Good, Quality::Bad};
  Rng rng(1);
  auto out = run_mechanism(mechanism::SpaReserve{0.5}, {0.5, bids, q, p}, rng);
  CHECK(out.expected_revenue == doctest::Approx(0.35).epsilon(1e-12));
}

TEST_CASE("episode accounting") {
  auto cfg = uniform_config(1, 500);
  AdProfile p = cfg.profile();
  for (auto clicks : {ClickMode::Expected, ClickMode::Bernoulli}) {
    auto log = run_episode(p, cfg.grid, cfg.kernel, mechanism::Myerson{}, {500, 0.5, clicks}, episode_streams(5, 2));
    double total = 0.0, expected = 0.0, cumulative = 0.0;
    for (const auto& r : log.rounds) {
      CHECK(cfg.grid.find(r.state).has_value());
      CHECK(r.revenue >= 0.0);
      cumulative += r.revenue;
      total += r.revenue;
      expected += r.state * r.payment;
      if (clicks == ClickMode::Bernoulli) CHECK((r.revenue == 0.0 || r.revenue == r.payment));
    }
    if (clicks == ClickMode::Expected) CHECK(std::abs(total - expected) <= 1e-9);
    CHECK(log.errors == 0);
  }
}

TEST_CASE("zero-state adjusted auction is logged as showing nothing") {
  auto cfg = uniform_config(1, 50);
  cfg.solver.gamma = 0.5;
  auto sol = std::make_shared<const MdpSolution>(solve_value_iteration(cfg.profile(), cfg.kernel, cfg.grid, cfg.solver));
  AdProfile p = cfg.profile();
  auto log = run_episode(p, cfg.grid, cfg.kernel, mechanism::SpaAdjusted{0.5, 0.0, sol}, {50, 0.0, ClickMode::Expected},
                         episode_streams(1, 0));
  REQUIRE(log.rounds.front().state == 0.0);
  CHECK(log.rounds.front().error);
  CHECK(log.rounds.front().shown == Outcome::None);
  CHECK(log.errors >= 1);
}

TEST_CASE("point-mass kernel with one repetition: report equals the episode") {
  auto cfg = uniform_config(1, 60);
  cfg.kernel = TransitionKernel::step_kernel(cfg.grid, {0.1, 1.0, 1.0, 1.0});
  cfg.mechanisms = {mech("myerson")};
  std::map<double, std::shared_ptr<const MdpSolution>> sols;
  auto points = expand_tuning(cfg, sols);
  REQUIRE(points.size() == 1);
  auto summary = run_point(cfg, points[0], {});
  AdProfile p = cfg.profile();
  auto log = run_episode(p, cfg.grid, cfg.kernel, points[0].spec, {60, 0.5, ClickMode::Expected},
                         episode_streams(cfg.seed, 0));
  double cum = 0.0;
  for (std::size_t t = 0; t < log.rounds.size(); ++t) {
    cum += log.rounds[t].revenue;
    CHECK(summary.revenue[t] == log.rounds[t].revenue);
    CHECK(summary.state[t] == log.rounds[t].state);
    CHECK(summary.cumulative_revenue[t] == doctest::Approx(cum).epsilon(1e-12));
    CHECK(summary.good_rate[t] + summary.bad_rate[t] + summary.none_rate[t] == doctest::Approx(1.0));
  }
}

TEST_CASE("reports are deterministic and independent of the worker count") {
  auto cfg = uniform_config(12, 80);
  auto m = mech("static_multiplier");
  m.eta = {0.0, 0.5};
  cfg.mechanisms = {m, mech("myerson"), mech("ctr_scaled")};
  cfg.mechanisms.back().eta = {0.3};
  std::map<double, std::shared_ptr<const MdpSolution>> sols;
  auto points = expand_tuning(cfg, sols);
  REQUIRE(points.size() == 4);
  auto a = run_experiment(cfg, points, {1, {}});
  auto b = run_experiment(cfg, points, {3, {}});
  for (std::size_t i = 0; i < a.mechanisms.size(); ++i) {
    for (std::size_t j = 0; j < a.mechanisms[i].points.size(); ++j) {
      CHECK(same_summary(a.mechanisms[i].points[j], b.mechanisms[i].points[j]));
    }
  }
  // eta = 0 is Myerson's auction on identical streams.
  CHECK(same_summary(a.mechanisms[0].points[0], a.mechanisms[1].points[0]));

  std::ostringstream s1, s2;
  write_summary_csv(s1, a);
  write_summary_csv(s2, b);
  CHECK(s1.str() == s2.str());
  CHECK(s1.str().rfind("experiment,mechanism,tuning,round,revenue,cumulative_revenue,average_revenue_so_far,state,"
                       "good_rate,bad_rate,none_rate\n",
                       0) == 0);
  // Header plus one row per round for the best point of each mechanism.
  std::size_t lines = 0;
  for (char c : s1.str()) lines += c == '\n';
  CHECK(lines == 1 + 3 * 80);
}

TEST_CASE("best tuning point has the highest final cumulative revenue") {
  auto cfg = uniform_config(10, 100);
  auto m = mech("spa_reserve");
  m.reserve = {0.0, 0.3, 0.6, 0.9};
  cfg.mechanisms = {m};
  std::map<double, std::shared_ptr<const MdpSolution>> sols;
  auto report = run_experiment(cfg, expand_tuning(cfg, sols), {});
  const auto& r = report.mechanisms.at(0);
  for (const auto& p : r.points) CHECK(p.final_cumulative <= r.points[r.best].final_cumulative);
}

TEST_CASE("optimal-MDP discounted revenue estimates V*(0.5)") {
  auto cfg = uniform_config(100, 500);
  cfg.solver.n_samples = 20000;
  cfg.discount_factors = {0.95};
  auto m = mech("optimal_mdp");
  m.gamma = {0.95};
  cfg.mechanisms = {m};
  std::map<double, std::shared_ptr<const MdpSolution>> sols;
  auto points = expand_tuning(cfg, sols);
  auto summary = run_point(cfg, points.at(0), {});
  const auto& sol = *sols.at(0.95);
  const auto& est = summary.discounted.at(0);
  double vmax = 0.0;
  for (double v : sol.value) vmax = std::max(vmax, v);
  const double target = sol.value[cfg.grid.index_of(0.5)];
  MESSAGE("estimate " << est.mean << " +- " << est.se << " vs V* " << target);
  CHECK(std::abs(est.mean - target) <= 3 * est.se + std::pow(0.95, 500) * vmax);
}

TEST_CASE("Myerson drives the uniform experiment toward zero") {
  auto cfg = uniform_config(100, 500);
  cfg.mechanisms = {mech("myerson")};
  std::map<double, std::shared_ptr<const MdpSolution>> sols;
  auto summary = run_point(cfg, expand_tuning(cfg, sols).at(0), {});

  // The induced chain: a good ad w.p. 7/16, a bad ad w.p. 7/16, nothing w.p. 1/8.
  const double pg = 7.0 / 16, pb = 7.0 / 16, pn = 1.0 / 8;
  const double up = 0.2 * pg + 0.1 * pn, down = 0.8 * pb;
  std::vector<double> dist(11, 0.0);
  dist[5] = 1.0;
  std::vector<double> mean{0.5};
  for (int t = 1; t < 500; ++t) {
    std::vector<double> next(11, 0.0);
    for (int s = 0; s < 11; ++s) {
      next[std::min(10, s + 1)] += dist[s] * up;
      next[std::max(0, s - 1)] += dist[s] * down;
      next[s] += dist[s] * (1 - up - down);
    }
    dist = next;
    double m = 0.0;
    for (int s = 0; s < 11; ++s) m += dist[s] * s / 10.0;
    CHECK(m <= mean.back() + 1e-12);
    mean.push_back(m);
  }
  double var = 0.0;
  for (int s = 0; s < 11; ++s) var += dist[s] * (s / 10.0 - mean.back()) * (s / 10.0 - mean.back());
  CHECK(std::abs(summary.state.back() - mean.back()) <= 3 * std::sqrt(var / 100) + 1e-9);
  CHECK(summary.state.back() < 0.1);
}

TEST_CASE("configuration errors surface from tuning expansion") {
  auto cfg = uniform_config(1, 10);
  cfg.mechanisms = {mech("bogus")};
  std::map<double, std::shared_ptr<const MdpSolution>> sols;
  CHECK_THROWS_AS(expand_tuning(cfg, sols), ConfigError);
  auto m = mech("static_multiplier");
  m.eta = {-1.0};
  cfg.mechanisms = {m};
  CHECK_THROWS_AS(expand_tuning(cfg, sols), ConfigError);
}
