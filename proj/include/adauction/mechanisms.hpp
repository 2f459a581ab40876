#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "adauction/mdp.hpp"

namespace adauction {

struct AuctionInput {
  double state;
  std::span<const double> bids;  // truthful values
  std::span<const Quality> qualities;
  const AdProfile& profile;
};

struct AuctionOutcome {
  std::optional<std::size_t> winner;
  double payment = 0.0;
  /// state * payment
  double expected_revenue = 0.0;
  /// Per-bidder ranking score used by the mechanism (diagnostic).
  std::vector<double> scores;

  Outcome shown(std::span<const Quality> qualities) const {
    return winner ? outcome_of(qualities[*winner]) : Outcome::None;
  }
};

/// Score phi_i(v_i) + eta * q_i, Myerson critical payment. eta = 0 is Myerson's auction.
AuctionOutcome run_static_multiplier(const AuctionInput& in, double eta);

/// Score phi_i(v_i) + eta * (1 - ctr) * q_i.
AuctionOutcome run_ctr_scaled(const AuctionInput& in, double eta);

/// Highest modified virtual value ctr * phi_i + Delta_i wins if positive.
/// At ctr = 0 the ranking ignores bids and the winner pays its support floor.
AuctionOutcome run_optimal_mdp(const AuctionInput& in, const MdpSolution& sol);

/// Second price on bids adjusted by (eta / ctr) * (E_{P_i}[V] - E_{P_0}[V]),
/// eager common reserve on the adjusted bid. Throws ZeroStateUndefined at
/// ctr = 0 with eta > 0.
AuctionOutcome run_spa_adjusted(const AuctionInput& in, const MdpSolution& sol, double eta, double reserve);

AuctionOutcome run_spa_reserve(const AuctionInput& in, double reserve);

class TwoStagePlanner;
struct TwoStageTrace;

namespace mechanism {
struct StaticMultiplier {
  double eta = 0.0;
};
struct CtrScaled {
  double eta = 0.0;
};
struct OptimalMdp {
  std::shared_ptr<const MdpSolution> solution;
};
struct SpaAdjusted {
  double eta = 0.0;
  double reserve = 0.0;
  std::shared_ptr<const MdpSolution> solution;
};
struct Myerson {};
struct SpaReserve {
  double reserve = 0.0;
};
/// Quality-partition wrapper around the two-stage second-price auction.
struct SimpleTwoStage {
  std::shared_ptr<const TwoStagePlanner> planner;
};
}  // namespace mechanism

using MechanismSpec =
    std::variant<mechanism::StaticMultiplier, mechanism::CtrScaled, mechanism::OptimalMdp, mechanism::SpaAdjusted,
                 mechanism::Myerson, mechanism::SpaReserve, mechanism::SimpleTwoStage>;

/// Config name of the mechanism kind (static_multiplier, optimal_mdp, ...).
std::string mechanism_kind(const MechanismSpec& spec);
/// Throws ConfigError on negative eta / reserve or a missing solution.
void validate(const MechanismSpec& spec);

/// Dispatch one round. Only SimpleTwoStage consumes `rng`; `trace` is filled
/// for SimpleTwoStage when given.
AuctionOutcome run_mechanism(const MechanismSpec& spec, const AuctionInput& in, Rng& rng,
                             TwoStageTrace* trace = nullptr);

}  // namespace adauction
