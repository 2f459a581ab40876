#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adauction/mdp.hpp"
#include "adauction/oracle.hpp"
#include "adauction/simple_auction.hpp"

namespace adauction {

enum class ClickMode { Expected, Bernoulli };

/// One [mechanism] section; list-valued fields are tuning grids.
struct MechanismConfig {
  std::string kind;
  std::vector<double> eta;
  std::vector<double> reserve;
  std::vector<double> gamma;
  std::string solution;  // optional path, resolved against the config directory
  P1PrimeMode p1_prime = P1PrimeMode::Conditional;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string source;  // path the config was read from, if any
  int rounds = 500;
  int repetitions = 100;
  double initial_state = 0.5;
  std::uint64_t seed = 1;
  ClickMode clicks = ClickMode::Expected;
  std::vector<double> discount_factors{0.95};
  StateGrid grid = StateGrid::unit(11);
  TransitionKernel kernel = TransitionKernel::step_kernel(StateGrid::unit(11));
  std::vector<BidderSpec> bidders;
  SolverOptions solver;
  std::vector<MechanismConfig> mechanisms;

  AdProfile profile() const { return AdProfile(bidders); }
};

/// Sectioned key = value text. Throws ConfigError with a line number.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "");
ExperimentConfig load_config(const std::string& path);

/// The point-mass / discrete instance described by a config (fixed qualities,
/// solver gamma). Throws ConfigError for random qualities.
DiscreteInstance discrete_instance(const ExperimentConfig& cfg);

const char* to_string(ClickMode m);

}  // namespace adauction
