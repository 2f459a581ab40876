#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "adauction/distributions.hpp"
#include "adauction/mdp.hpp"
#include "adauction/mechanisms.hpp"

namespace adauction {

struct SpaResult {
  std::optional<std::size_t> winner;
  double payment = 0.0;
};

/// Drop bidders below their personalized reserve, then second price among the
/// rest: the winner pays max(own reserve, second-highest surviving bid).
SpaResult spa_with_eager_reserves(std::span<const double> bids, std::span<const Reserve> reserves);

struct PartitionPlan {
  std::vector<std::size_t> s1;
  std::vector<std::size_t> s2;
  bool s1_is_good = true;
  double r1 = 0.0;  // sum over S1 of E[x_i* phi_i]
  double r2 = 0.0;
  double p1 = 0.0;  // Pr[x* shows an ad from S1]
  double p2 = 0.0;
};

/// S1 is the quality class with the larger virtual-revenue contribution under
/// x* (good on ties). A class with no bidders never becomes S1 while the other
/// class is nonempty.
PartitionPlan choose_partition(const AllocationStats& stats, std::span<const Quality> qualities);
PartitionPlan choose_partition(const MdpSolution& sol, const SampleSet& samples, std::size_t s,
                               std::span<const Quality> qualities);

/// How the first-stage removal probability p1' is computed.
///  - Marginal: averaged over the S2 competition level (one constant per state).
///  - Conditional: recomputed for each realized competition level, rho clamped to [0, 1].
enum class P1PrimeMode { Marginal, Conditional };

/// Precomputed, per (grid state, quality vector), inputs of the first stage.
struct TwoStagePlan {
  PartitionPlan partition;
  std::optional<std::size_t> i_star;
  double p1_prime_marginal = 0.0;
  /// E[x'_i phi_i] per bidder (zero outside S1).
  std::vector<double> x_prime_revenue;
};

/// Immutable after construction; safe to share across simulation workers.
class TwoStagePlanner {
 public:
  TwoStagePlanner(std::shared_ptr<const MdpSolution> sol, AdProfile profile, SampleSet samples,
                  P1PrimeMode mode = P1PrimeMode::Conditional);
  /// Regenerates the solver's frozen sample set from the solution's seed.
  static std::shared_ptr<const TwoStagePlanner> create(std::shared_ptr<const MdpSolution> sol,
                                                       const AdProfile& profile,
                                                       P1PrimeMode mode = P1PrimeMode::Conditional);

  /// Plan for Mechanism 1's partition choice (cached; built eagerly for small
  /// profiles, on first use otherwise).
  const TwoStagePlan& plan(std::size_t s, std::uint32_t mask) const;
  /// Plan for a caller-chosen partition (computed on demand).
  TwoStagePlan plan_for(std::size_t s, std::uint32_t mask, PartitionPlan partition) const;
  const MdpSolution& solution() const { return *sol_; }
  const AdProfile& profile() const { return profile_; }
  const SampleSet& samples() const { return samples_; }
  P1PrimeMode mode() const { return mode_; }

 private:
  std::shared_ptr<const MdpSolution> sol_;
  AdProfile profile_;
  SampleSet samples_;
  P1PrimeMode mode_;
  mutable std::mutex mu_;
  mutable std::map<std::pair<std::size_t, std::uint32_t>, TwoStagePlan> plans_;
};

/// Reserve phi^{-1}(y / ctr). At ctr = 0: the support floor when y <= 0, never
/// met otherwise.
Reserve scaled_reserve(const ValueDistribution& d, double y, double ctr);

struct ReserveTable {
  std::vector<Reserve> reserves;  // indexed by bidder; S2 entries unused
  std::optional<std::size_t> i_star;
  double rho1 = 0.0;
  double p1_prime = 0.0;
  double phi_tilde = 0.0;
  bool rho_clamped = false;
};

struct TwoStageTrace {
  ReserveTable table;
  bool s1_is_good = true;
  /// 0: nothing shown, 1: first-stage winner, 2: second-stage winner.
  int stage = 0;
  bool second_stage_entered = false;
};

struct TwoStageResult {
  AuctionOutcome outcome;
  TwoStageTrace trace;
};

/// One round of the two-stage second-price auction with personalized reserves,
/// for the partition in `plan`.
TwoStageResult two_stage_spa(const AuctionInput& in, const TwoStagePlanner& planner, const TwoStagePlan& plan,
                             Rng& rng);
/// Mechanism 1: the partition is chosen by choose_partition at the input's state.
TwoStageResult two_stage_spa(const AuctionInput& in, const TwoStagePlanner& planner, Rng& rng);

}  // namespace adauction
