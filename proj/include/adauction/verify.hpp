#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adauction/mechanisms.hpp"
#include "adauction/oracle.hpp"

namespace adauction {

/// Bid range swept for a bidder: the support, or its 0.001..0.999 quantiles
/// when unbounded.
std::pair<double, double> sweep_range(const ValueDistribution& d);

struct SweepResult {
  bool monotone = true;
  bool payment_ok = true;
  /// Largest |payment - critical bid| over the winning region.
  double worst_gap = 0.0;
  std::optional<double> critical_bid;
  bool ok() const { return monotone && payment_ok; }
};

/// Sweep `bidder`'s bid over `points` values with everything else fixed. The
/// mechanism's random stream is reseeded with `rng_seed` at every point.
/// Checks a single upward step in the win indicator and that every winning
/// payment equals the step location (found by bisection) within `tol`.
SweepResult truthfulness_sweep(const MechanismSpec& spec, const AdProfile& profile, double state,
                               std::span<const double> bids, std::span<const Quality> qualities, std::size_t bidder,
                               std::uint64_t rng_seed, int points = 200, double tol = 1e-6);

struct CheckResult {
  std::string check;
  long long instances = 0;
  long long passed = 0;
  double worst_ratio = 0.0;
  bool ok() const { return passed == instances; }
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  int reserve_instances = 100;
  int sweep_inputs = 100;  // per mechanism kind
  std::size_t solver_samples = 5000;
  /// Three-state instance; the built-in one with epsilon = 0.1 when empty.
  std::optional<DiscreteInstance> toy;
};

/// The three-state alternating example: states {0, 1/2, 1}, a good ad worth
/// epsilon and a bad ad worth 1, 0 absorbing, no ad keeps the state.
DiscreteInstance toy_instance(double epsilon = 0.1, double gamma = 0.95);

/// Bid sweeps for every mechanism kind over random inputs drawn from the
/// three experiment profiles; one result per kind.
std::vector<CheckResult> truthfulness_checks(std::uint64_t seed, int inputs, std::size_t samples);

std::vector<CheckResult> run_verify_suite(const VerifyOptions& opts);
void write_verify_report(std::ostream& out, std::span<const CheckResult> results);

}  // namespace adauction
