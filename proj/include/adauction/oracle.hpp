#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "adauction/distributions.hpp"
#include "adauction/mdp.hpp"

namespace adauction {

// Brute-force ground truth for small discrete instances.

inline constexpr std::size_t kOracleMaxSupport = 8;
inline constexpr std::size_t kOracleMaxBidders = 4;
inline constexpr std::size_t kOracleMaxStates = 16;

struct DiscreteBidder {
  ValueDistribution value;  // PointMass or FiniteDiscrete
  Quality quality = Quality::Good;
};

struct DiscreteInstance {
  std::vector<double> states;
  TransitionKernel kernel{1};
  std::vector<DiscreteBidder> bidders;
  double gamma = 0.0;
};

/// Support points and probabilities of a PointMass / FiniteDiscrete law.
struct Atoms {
  std::vector<double> support;
  std::vector<double> probs;
};
Atoms atoms_of(const ValueDistribution& d);

/// phi(v_k) = v_k - (v_{k+1} - v_k)(1 - F(v_k)) / p_k, and v_K at the top atom.
/// Throws IrregularInstance if not nondecreasing.
std::vector<double> discrete_virtual_values(const ValueDistribution& d);

/// First support point whose discrete virtual value is >= 0.
double discrete_monopoly_point(const ValueDistribution& d);

/// Every joint value profile with its probability, as atom indices.
struct Profiles {
  std::vector<std::vector<std::size_t>> index;  // [profile][bidder]
  std::vector<double> prob;
};
Profiles enumerate_profiles(std::span<const Atoms> atoms);

/// Per state, per value profile: the chosen winner (nullopt shows nothing).
using WinnerMap = std::vector<std::vector<std::optional<std::size_t>>>;

struct ExactPolicy {
  std::vector<double> value;
  WinnerMap winner;
  Profiles profiles;
  int iterations = 0;
};

/// Value iteration where each state's action is a profile -> winner map,
/// optimized profile by profile. Ties prefer showing nothing, then the lowest
/// index. Throws TooLarge, IrregularInstance, ConfigError.
ExactPolicy exact_optimal_policy(const DiscreteInstance& inst, double tol = 1e-13);

/// Discounted value of a fixed winner map (iterated to tol).
std::vector<double> evaluate_policy(const DiscreteInstance& inst, const WinnerMap& policy, double tol = 1e-13);

/// The map maximizing the current round only (ignores the future).
WinnerMap greedy_policy(const DiscreteInstance& inst);

/// All state-independent winner maps. Throws TooLarge above `limit` maps.
std::vector<WinnerMap> static_policies(const DiscreteInstance& inst, std::size_t limit = 4096);

/// E[max(0, max over bidders meeting their reserve of phi_i(v_i))] by
/// exhaustive enumeration.
double optimal_reserved_auction(std::span<const ValueDistribution> bidders, std::span<const Reserve> reserves);

/// E[payment of spa_with_eager_reserves] by exhaustive enumeration.
double exact_spa_revenue(std::span<const ValueDistribution> bidders, std::span<const Reserve> reserves);

struct ReservedInstance {
  std::vector<ValueDistribution> bidders;
  std::vector<Reserve> reserves;
};

/// Random regular discrete instance: 1..max_bidders bidders, 1..max_support
/// atoms each, reserves drawn from the atoms at or above the discrete monopoly
/// point. Irregular draws are regenerated.
ReservedInstance random_reserved_instance(Rng& rng, std::size_t max_bidders = 3, std::size_t max_support = 5);

/// k equal-mass atoms at the j/k quantiles, j = 0..k-1. Pr[V >= atom] matches
/// the continuous survival there, so the revenue curves agree on the atoms.
ValueDistribution discretize(const ValueDistribution& d, std::size_t k);

}  // namespace adauction
