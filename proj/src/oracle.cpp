#include "adauction/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include "adauction/error.hpp"
#include "adauction/simple_auction.hpp"

namespace adauction {
namespace {

void check_size(const DiscreteInstance& inst) {
  if (inst.states.empty() || inst.states.size() > kOracleMaxStates) throw TooLarge("oracle supports 1..16 states");
  if (inst.bidders.empty() || inst.bidders.size() > kOracleMaxBidders) throw TooLarge("oracle supports 1..4 bidders");
  if (inst.kernel.num_states() != inst.states.size()) throw ConfigError("kernel and state list differ in size");
  if (!(inst.gamma >= 0.0 && inst.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  inst.kernel.validate();
}

struct Prepared {
  Profiles profiles;
  std::vector<std::vector<double>> phi;  // [bidder][atom]
};

Prepared prepare(const DiscreteInstance& inst) {
  check_size(inst);
  Prepared p;
  std::vector<Atoms> atoms;
  for (const auto& b : inst.bidders) {
    atoms.push_back(atoms_of(b.value));
    p.phi.push_back(discrete_virtual_values(b.value));
  }
  p.profiles = enumerate_profiles(atoms);
  return p;
}

struct Continuations {
  double none;
  double good;
  double bad;
};

Continuations continuations(const DiscreteInstance& inst, std::size_t s, std::span<const double> v) {
  return {inst.kernel.expect(s, Outcome::None, v), inst.kernel.expect(s, Outcome::Good, v),
          inst.kernel.expect(s, Outcome::Bad, v)};
}

double action_value(const DiscreteInstance& inst, const Prepared& p, std::size_t s, std::size_t profile,
                    std::optional<std::size_t> w, const Continuations& c, bool with_future) {
  const double g = with_future ? inst.gamma : 0.0;
  if (!w) return g * c.none;
  const double reward = inst.states[s] * p.phi[*w][p.profiles.index[profile][*w]];
  return reward + g * (inst.bidders[*w].quality == Quality::Good ? c.good : c.bad);
}

std::optional<std::size_t> best_action(const DiscreteInstance& inst, const Prepared& p, std::size_t s,
                                       std::size_t profile, const Continuations& c, bool with_future,
                                       double* value) {
  std::optional<std::size_t> best;
  double best_v = action_value(inst, p, s, profile, std::nullopt, c, with_future);
  for (std::size_t i = 0; i < inst.bidders.size(); ++i) {
    double v = action_value(inst, p, s, profile, i, c, with_future);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  if (value) *value = best_v;
  return best;
}

std::vector<double> evaluate(const DiscreteInstance& inst, const Prepared& p, const WinnerMap& policy, double tol) {
  const std::size_t ns = inst.states.size();
  std::vector<double> v(ns, 0.0), next(ns, 0.0);
  for (int k = 0; k < 1000000; ++k) {
    double residual = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      auto c = continuations(inst, s, v);
      double acc = 0.0;
      for (std::size_t j = 0; j < p.profiles.prob.size(); ++j) {
        acc += p.profiles.prob[j] * action_value(inst, p, s, j, policy[s][j], c, true);
      }
      next[s] = acc;
      residual = std::max(residual, std::abs(next[s] - v[s]));
    }
    std::swap(v, next);
    if (residual <= tol) return v;
  }
  throw NotConverged(0.0, 1000000);
}

}  // namespace

Atoms atoms_of(const ValueDistribution& d) {
  if (const auto* pm = std::get_if<PointMass>(&d.kind())) return {{pm->v}, {1.0}};
  if (const auto* fd = std::get_if<FiniteDiscrete>(&d.kind())) {
    if (fd->support.size() > kOracleMaxSupport) throw TooLarge("oracle supports at most 8 atoms per bidder");
    return {fd->support, fd->probs};
  }
  throw ConfigError("oracle needs point-mass or finite discrete value laws");
}

std::vector<double> discrete_virtual_values(const ValueDistribution& d) {
  auto a = atoms_of(d);
  const std::size_t k = a.support.size();
  std::vector<double> phi(k);
  double above = 1.0;  // Pr[V >= v_j]
  for (std::size_t j = 0; j < k; ++j) {
    above -= a.probs[j];
    if (j + 1 == k) {
      phi[j] = a.support[j];
    } else {
      if (!(a.probs[j] > 0.0)) throw IrregularInstance("atom with zero probability");
      phi[j] = a.support[j] - (a.support[j + 1] - a.support[j]) * std::max(0.0, above) / a.probs[j];
    }
    if (j > 0 && phi[j] < phi[j - 1]) throw IrregularInstance("discrete virtual values are not monotone");
  }
  return phi;
}

double discrete_monopoly_point(const ValueDistribution& d) {
  auto a = atoms_of(d);
  auto phi = discrete_virtual_values(d);
  for (std::size_t j = 0; j < phi.size(); ++j) {
    if (phi[j] >= 0.0) return a.support[j];
  }
  return a.support.back();
}

Profiles enumerate_profiles(std::span<const Atoms> atoms) {
  Profiles out;
  std::vector<std::size_t> idx(atoms.size(), 0);
  while (true) {
    double p = 1.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) p *= atoms[i].probs[idx[i]];
    out.index.push_back(idx);
    out.prob.push_back(p);
    std::size_t i = 0;
    while (i < atoms.size() && ++idx[i] == atoms[i].support.size()) idx[i++] = 0;
    if (i == atoms.size()) break;
  }
  return out;
}

ExactPolicy exact_optimal_policy(const DiscreteInstance& inst, double tol) {
  auto p = prepare(inst);
  const std::size_t ns = inst.states.size();
  ExactPolicy out;
  std::vector<double> v(ns, 0.0), next(ns, 0.0);
  int k = 0;
  while (true) {
    ++k;
    double residual = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      auto c = continuations(inst, s, v);
      double acc = 0.0;
      for (std::size_t j = 0; j < p.profiles.prob.size(); ++j) {
        double best;
        best_action(inst, p, s, j, c, true, &best);
        acc += p.profiles.prob[j] * best;
      }
      next[s] = acc;
      residual = std::max(residual, std::abs(next[s] - v[s]));
    }
    std::swap(v, next);
    if (residual <= tol) break;
    if (k >= 1000000) throw NotConverged(residual, k);
  }
  out.iterations = k;
  out.winner.assign(ns, {});
  for (std::size_t s = 0; s < ns; ++s) {
    auto c = continuations(inst, s, v);
    for (std::size_t j = 0; j < p.profiles.prob.size(); ++j) {
      out.winner[s].push_back(best_action(inst, p, s, j, c, true, nullptr));
    }
  }
  out.value = std::move(v);
  out.profiles = std::move(p.profiles);
  return out;
}

std::vector<double> evaluate_policy(const DiscreteInstance& inst, const WinnerMap& policy, double tol) {
  auto p = prepare(inst);
  if (policy.size() != inst.states.size()) throw ConfigError("policy has the wrong number of states");
  for (const auto& row : policy) {
    if (row.size() != p.profiles.prob.size()) throw ConfigError("policy has the wrong number of profiles");
  }
  return evaluate(inst, p, policy, tol);
}

WinnerMap greedy_policy(const DiscreteInstance& inst) {
  auto p = prepare(inst);
  const std::size_t ns = inst.states.size();
  std::vector<double> zero(ns, 0.0);
  WinnerMap out(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    auto c = continuations(inst, s, zero);
    for (std::size_t j = 0; j < p.profiles.prob.size(); ++j) {
      out[s].push_back(best_action(inst, p, s, j, c, false, nullptr));
    }
  }
  return out;
}

std::vector<WinnerMap> static_policies(const DiscreteInstance& inst, std::size_t limit) {
  auto p = prepare(inst);
  const std::size_t np = p.profiles.prob.size();
  const std::size_t choices = inst.bidders.size() + 1;
  double count = std::pow(static_cast<double>(choices), static_cast<double>(np));
  if (count > static_cast<double>(limit)) throw TooLarge("too many static policies to enumerate");
  std::vector<WinnerMap> out;
  std::vector<std::size_t> pick(np, 0);  // 0 = none, i + 1 = bidder i
  while (true) {
    std::vector<std::optional<std::size_t>> row(np);
    for (std::size_t j = 0; j < np; ++j) {
      if (pick[j] > 0) row[j] = pick[j] - 1;
    }
    out.emplace_back(inst.states.size(), row);
    std::size_t j = 0;
    while (j < np && ++pick[j] == choices) pick[j++] = 0;
    if (j == np) break;
  }
  return out;
}

namespace {

struct Enumerated {
  std::vector<Atoms> atoms;
  std::vector<std::vector<double>> phi;
  Profiles profiles;
};

Enumerated enumerate(std::span<const ValueDistribution> bidders, std::span<const Reserve> reserves) {
  if (bidders.size() != reserves.size()) throw ConfigError("bidders and reserves differ in length");
  if (bidders.empty() || bidders.size() > kOracleMaxBidders) throw TooLarge("oracle supports 1..4 bidders");
  Enumerated e;
  for (const auto& b : bidders) {
    e.atoms.push_back(atoms_of(b));
    e.phi.push_back(discrete_virtual_values(b));
  }
  e.profiles = enumerate_profiles(e.atoms);
  return e;
}

}  // namespace

double optimal_reserved_auction(std::span<const ValueDistribution> bidders, std::span<const Reserve> reserves) {
  auto e = enumerate(bidders, reserves);
  double total = 0.0;
  for (std::size_t j = 0; j < e.profiles.prob.size(); ++j) {
    double best = 0.0;
    for (std::size_t i = 0; i < bidders.size(); ++i) {
      std::size_t a = e.profiles.index[j][i];
      if (reserves[i].met_by(e.atoms[i].support[a])) best = std::max(best, e.phi[i][a]);
    }
    total += e.profiles.prob[j] * best;
  }
  return total;
}

double exact_spa_revenue(std::span<const ValueDistribution> bidders, std::span<const Reserve> reserves) {
  auto e = enumerate(bidders, reserves);
  double total = 0.0;
  std::vector<double> bids(bidders.size());
  for (std::size_t j = 0; j < e.profiles.prob.size(); ++j) {
    for (std::size_t i = 0; i < bidders.size(); ++i) bids[i] = e.atoms[i].support[e.profiles.index[j][i]];
    auto res = spa_with_eager_reserves(bids, reserves);
    if (res.winner) total += e.profiles.prob[j] * res.payment;
  }
  return total;
}

ReservedInstance random_reserved_instance(Rng& rng, std::size_t max_bidders, std::size_t max_support) {
  if (max_bidders < 1 || max_bidders > kOracleMaxBidders || max_support < 1 || max_support > kOracleMaxSupport) {
    throw TooLarge("random instance bounds exceed the oracle limits");
  }
  auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)); };
  while (true) {
    ReservedInstance inst;
    const std::size_t n = 1 + below(max_bidders);
    bool regular = true;
    for (std::size_t i = 0; i < n && regular; ++i) {
      const std::size_t k = 1 + below(max_support);
      // Atoms on a 0.1 lattice in (0, 2], strictly increasing.
      std::vector<double> support;
      double at = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        at += 0.1 * static_cast<double>(1 + below(5));
        support.push_back(std::round(at * 10.0) / 10.0);
      }
      std::vector<double> w(k);
      double sum = 0.0;
      for (auto& x : w) sum += (x = 0.05 + rng.uniform());
      for (auto& x : w) x /= sum;
      // Fold rounding drift into the last atom.
      double head = 0.0;
      for (std::size_t j = 0; j + 1 < k; ++j) head += w[j];
      w.back() = 1.0 - head;
      auto d = ValueDistribution::discrete(support, w);
      try {
        discrete_virtual_values(d);
      } catch (const IrregularInstance&) {
        regular = false;
        break;
      }
      auto phi = discrete_virtual_values(d);
      std::vector<double> allowed;
      for (std::size_t j = 0; j < k; ++j) {
        if (phi[j] >= 0.0) allowed.push_back(support[j]);
      }
      inst.reserves.push_back(Reserve::at(allowed[below(allowed.size())]));
      inst.bidders.push_back(std::move(d));
    }
    if (regular) return inst;
  }
}

ValueDistribution discretize(const ValueDistribution& d, std::size_t k) {
  if (!d.is_continuous()) throw DiscreteUnsupported("discretize needs a continuous law");
  if (k < 1 || k > kOracleMaxSupport) throw TooLarge("discretization supports 1..8 atoms");
  std::vector<double> support(k), probs(k, 1.0 / static_cast<double>(k));
  for (std::size_t j = 0; j < k; ++j) support[j] = d.quantile(static_cast<double>(j) / static_cast<double>(k));
  double head = 0.0;
  for (std::size_t j = 0; j + 1 < k; ++j) head += probs[j];
  probs.back() = 1.0 - head;
  if (k == 1) return ValueDistribution::point_mass(support[0]);
  return ValueDistribution::discrete(support, probs);
}

}  // namespace adauction
