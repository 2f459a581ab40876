#include "adauction/mechanisms.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "adauction/error.hpp"
#include "adauction/simple_auction.hpp"
#include "adauction/text.hpp"

namespace adauction {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_input(const AuctionInput& in) {
  const auto n = in.profile.size();
  if (in.bids.size() != n || in.qualities.size() != n) {
    throw ConfigError("auction input sizes do not match the profile");
  }
  if (!(in.state >= 0.0 && in.state <= 1.0)) throw OutOfSupport("state must lie in [0, 1]");
  in.profile.require_continuous();
  for (std::size_t i = 0; i < n; ++i) {
    if (!in.profile.value(i).in_support(in.bids[i])) {
      throw OutOfSupport("bid " + format_double(in.bids[i]) + " of bidder " + std::to_string(i) +
                         " outside support");
    }
  }
}

struct Ranking {
  std::optional<std::size_t> winner;
  double best = 0.0;
  double runner_up = 0.0;  // max(0, second-highest score)
};

// Highest strictly positive score, lowest index on ties.
Ranking rank_positive(std::span<const double> scores) {
  Ranking r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > r.best) {
      r.best = scores[i];
      r.winner = i;
    }
  }
  if (r.winner) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (i != *r.winner) r.runner_up = std::max(r.runner_up, scores[i]);
    }
  }
  return r;
}

double critical_from_reserve(const Reserve& r, double bid) {
  // The winner's own bid clears its threshold; rounding may leave the
  // inverse a hair above it.
  if (!r.reachable()) return bid;
  return std::min(r.value(), bid);
}

AuctionOutcome finish(const AuctionInput& in, std::vector<double> scores, std::optional<std::size_t> winner,
                      double payment) {
  AuctionOutcome out;
  out.scores = std::move(scores);
  out.winner = winner;
  out.payment = winner ? std::max(0.0, payment) : 0.0;
  out.expected_revenue = in.state * out.payment;
  return out;
}

}  // namespace

AuctionOutcome run_static_multiplier(const AuctionInput& in, double eta) {
  check_input(in);
  const auto n = in.profile.size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = virtual_value(in.profile.value(i), in.bids[i]) + eta * static_cast<int>(in.qualities[i]);
  }
  auto rank = rank_positive(scores);
  double payment = 0.0;
  if (rank.winner) {
    std::size_t w = *rank.winner;
    auto r = inverse_virtual_value(in.profile.value(w), rank.runner_up - eta * static_cast<int>(in.qualities[w]));
    payment = critical_from_reserve(r, in.bids[w]);
  }
  return finish(in, std::move(scores), rank.winner, payment);
}

AuctionOutcome run_ctr_scaled(const AuctionInput& in, double eta) {
  return run_static_multiplier(in, eta * (1.0 - in.state));
}

AuctionOutcome run_optimal_mdp(const AuctionInput& in, const MdpSolution& sol) {
  check_input(in);
  const auto n = in.profile.size();
  const std::size_t s = sol.grid.index_of(in.state);
  const double ctr = sol.grid[s];
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = ctr * virtual_value(in.profile.value(i), in.bids[i]) + sol.delta(s, in.qualities[i]);
  }
  auto rank = rank_positive(scores);
  double payment = 0.0;
  if (rank.winner) {
    std::size_t w = *rank.winner;
    const auto& dist = in.profile.value(w);
    double need = rank.runner_up - sol.delta(s, in.qualities[w]);
    if (ctr > 0.0) {
      payment = critical_from_reserve(inverse_virtual_value(dist, need / ctr), in.bids[w]);
    } else {
      // Allocation does not depend on the own bid.
      payment = dist.lower();
    }
  }
  return finish(in, std::move(scores), rank.winner, payment);
}

namespace {

AuctionOutcome spa_on_adjusted(const AuctionInput& in, std::span<const double> adjustments, double reserve) {
  const auto n = in.profile.size();
  std::vector<double> adjusted(n);
  for (std::size_t i = 0; i < n; ++i) adjusted[i] = in.bids[i] + adjustments[i];
  std::vector<Reserve> reserves(n, Reserve::at(reserve));
  auto res = spa_with_eager_reserves(adjusted, reserves);
  double payment = res.winner ? res.payment - adjustments[*res.winner] : 0.0;
  return finish(in, std::move(adjusted), res.winner, payment);
}

}  // namespace

AuctionOutcome run_spa_adjusted(const AuctionInput& in, const MdpSolution& sol, double eta, double reserve) {
  check_input(in);
  const auto n = in.profile.size();
  std::vector<double> adj(n, 0.0);
  if (eta != 0.0) {
    const std::size_t s = sol.grid.index_of(in.state);
    const double ctr = sol.grid[s];
    if (ctr == 0.0) throw ZeroStateUndefined("adjusted-bid second price is undefined at ctr = 0");
    for (std::size_t i = 0; i < n; ++i) adj[i] = eta / ctr * sol.value_gap(s, in.qualities[i]);
  }
  return spa_on_adjusted(in, adj, reserve);
}

AuctionOutcome run_spa_reserve(const AuctionInput& in, double reserve) {
  check_input(in);
  std::vector<double> adj(in.profile.size(), 0.0);
  return spa_on_adjusted(in, adj, reserve);
}

std::string mechanism_kind(const MechanismSpec& spec) {
  return std::visit(overloaded{[](const mechanism::StaticMultiplier&) { return "static_multiplier"; },
                               [](const mechanism::CtrScaled&) { return "ctr_scaled"; },
                               [](const mechanism::OptimalMdp&) { return "optimal_mdp"; },
                               [](const mechanism::SpaAdjusted&) { return "spa_adjusted"; },
                               [](const mechanism::Myerson&) { return "myerson"; },
                               [](const mechanism::SpaReserve&) { return "spa_reserve"; },
                               [](const mechanism::SimpleTwoStage&) { return "simple_two_stage"; }},
                    spec);
}

void validate(const MechanismSpec& spec) {
  auto nonneg = [](double x, const char* what) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(std::string(what) + " must be a finite value >= 0");
  };
  std::visit(overloaded{[&](const mechanism::StaticMultiplier& m) { nonneg(m.eta, "eta"); },
                        [&](const mechanism::CtrScaled& m) { nonneg(m.eta, "eta"); },
                        [&](const mechanism::OptimalMdp& m) {
                          if (!m.solution) throw ConfigError("optimal_mdp needs a solved MDP");
                        },
                        [&](const mechanism::SpaAdjusted& m) {
                          nonneg(m.eta, "eta");
                          nonneg(m.reserve, "reserve");
                          if (!m.solution) throw ConfigError("spa_adjusted needs a solved MDP");
                        },
                        [](const mechanism::Myerson&) {},
                        [&](const mechanism::SpaReserve& m) { nonneg(m.reserve, "reserve"); },
                        [&](const mechanism::SimpleTwoStage& m) {
                          if (!m.planner) throw ConfigError("simple_two_stage needs a solved MDP");
                        }},
             spec);
}

AuctionOutcome run_mechanism(const MechanismSpec& spec, const AuctionInput& in, Rng& rng, TwoStageTrace* trace) {
  return std::visit(overloaded{[&](const mechanism::StaticMultiplier& m) { return run_static_multiplier(in, m.eta); },
                               [&](const mechanism::CtrScaled& m) { return run_ctr_scaled(in, m.eta); },
                               [&](const mechanism::OptimalMdp& m) { return run_optimal_mdp(in, *m.solution); },
                               [&](const mechanism::SpaAdjusted& m) {
                                 return run_spa_adjusted(in, *m.solution, m.eta, m.reserve);
                               },
                               [&](const mechanism::Myerson&) { return run_static_multiplier(in, 0.0); },
                               [&](const mechanism::SpaReserve& m) { return run_spa_reserve(in, m.reserve); },
                               [&](const mechanism::SimpleTwoStage& m) {
                                 auto res = two_stage_spa(in, *m.planner, rng);
                                 if (trace) *trace = res.trace;
                                 return res.outcome;
                               }},
                    spec);
}

}  // namespace adauction
