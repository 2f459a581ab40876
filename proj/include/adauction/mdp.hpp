#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adauction/distributions.hpp"

namespace adauction {

enum class Quality : int { Bad = -1, Good = 1 };

/// Which transition row applies after a round.
enum class Outcome : int { Good = 0, Bad = 1, None = 2 };
inline constexpr std::size_t kNumOutcomes = 3;

constexpr Outcome outcome_of(Quality q) { return q == Quality::Good ? Outcome::Good : Outcome::Bad; }
const char* to_string(Outcome o);

/// Ordered CTR levels in [0, 1].
class StateGrid {
 public:
  explicit StateGrid(std::vector<double> states);
  /// n equally spaced points 0, 1/(n-1), ..., 1.
  static StateGrid unit(std::size_t n = 11);

  std::size_t size() const { return states_.size(); }
  double operator[](std::size_t k) const { return states_[k]; }
  std::span<const double> states() const { return states_; }

  std::optional<std::size_t> find(double s) const;
  /// Index of s; throws StateOffGrid.
  std::size_t index_of(double s) const;
  std::size_t nearest(double s) const;

  friend bool operator==(const StateGrid&, const StateGrid&) = default;

 private:
  std::vector<double> states_;
};

/// The default user-response law: each outcome moves one step up or down
/// with a fixed probability, clamped at the ends of [0, 1].
struct StepKernelParams {
  double step = 0.1;
  double good_up = 0.2;
  double bad_down = 0.8;
  double none_up = 0.1;
};

class TransitionKernel {
 public:
  /// Every row starts self-absorbing.
  explicit TransitionKernel(std::size_t num_states);
  static TransitionKernel step_kernel(const StateGrid& grid, const StepKernelParams& params = {});

  std::size_t num_states() const { return n_; }
  void set_row(std::size_t s, Outcome o, std::vector<double> probs);
  std::span<const double> row(std::size_t s, Outcome o) const;
  double expect(std::size_t s, Outcome o, std::span<const double> values) const;
  /// Inverse-CDF draw of the next state index from a uniform u in (0, 1).
  std::size_t sample(std::size_t s, Outcome o, double u) const;
  /// Throws ConfigError unless every row is a probability vector (sum 1 +- 1e-12).
  void validate() const;

 private:
  std::size_t offset(std::size_t s, Outcome o) const {
    return (s * kNumOutcomes + static_cast<std::size_t>(o)) * n_;
  }
  std::size_t n_;
  std::vector<double> probs_;
};

enum class QualityLaw { Good, Bad, Random };

struct BidderSpec {
  ValueDistribution value;
  QualityLaw quality = QualityLaw::Random;
};

class AdProfile {
 public:
  /// Continuous laws must pass the regularity gate; discrete laws are kept
  /// for the oracle and rejected by the solver and mechanisms.
  explicit AdProfile(std::vector<BidderSpec> bidders);

  std::size_t size() const { return bidders_.size(); }
  const BidderSpec& operator[](std::size_t i) const { return bidders_[i]; }
  const ValueDistribution& value(std::size_t i) const { return bidders_[i].value; }

  bool all_continuous() const;
  bool has_random_quality() const;
  /// Throws DiscreteUnsupported if any law is discrete.
  void require_continuous() const;

  /// One draw per bidder from its law, in bidder order.
  std::vector<double> draw_values(Rng& rng) const;
  /// Fixed qualities are returned as is; random ones consume one uniform each.
  std::vector<Quality> draw_qualities(Rng& rng) const;

  /// Quality vectors consistent with the fixed/random laws, as bitmasks
  /// (bit i set means bidder i is good).
  std::vector<std::uint32_t> feasible_quality_masks() const;

  std::string describe() const;

 private:
  std::vector<BidderSpec> bidders_;
};

std::uint32_t quality_mask(std::span<const Quality> qualities);
Quality quality_in_mask(std::uint32_t mask, std::size_t i);

/// Frozen common-random-number matrix of value draws (and per-row qualities
/// for randomly typed bidders) shared by every value-iteration sweep.
class SampleSet {
 public:
  static SampleSet draw(const AdProfile& profile, std::size_t rows, std::uint64_t seed);

  std::size_t rows() const { return rows_; }
  std::size_t bidders() const { return bidders_; }
  std::uint64_t seed() const { return seed_; }

  double value(std::size_t r, std::size_t i) const { return values_[r * bidders_ + i]; }
  double phi(std::size_t r, std::size_t i) const { return phis_[r * bidders_ + i]; }
  Quality quality(std::size_t r, std::size_t i) const { return qualities_[r * bidders_ + i]; }
  std::span<const double> phis(std::size_t r) const { return {phis_.data() + r * bidders_, bidders_}; }

  /// Largest virtual value among the row's good (bad) bidders; -inf if none.
  double best_good_phi(std::size_t r) const { return best_good_[r]; }
  double best_bad_phi(std::size_t r) const { return best_bad_[r]; }

 private:
  std::size_t rows_ = 0;
  std::size_t bidders_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> values_;
  std::vector<double> phis_;
  std::vector<Quality> qualities_;
  std::vector<double> best_good_;
  std::vector<double> best_bad_;
};

struct SolverOptions {
  double gamma = 0.95;
  double tol = 1e-9;
  int max_iters = 10000;
  std::uint64_t seed = 1;
  std::size_t n_samples = 20000;
};

/// Converged discounted-optimal value table plus the per-state statistics of
/// the optimal (modified-virtual-value) auction.
struct MdpSolution {
  StateGrid grid{std::vector<double>{0.0}};
  double gamma = 0.0;
  double tol = 0.0;
  std::vector<double> value;
  /// gamma * (E_{P_q}[V] - E_{P_none}[V]) per state.
  std::vector<double> delta_good;
  std::vector<double> delta_bad;
  /// E_{P_q}[V] - E_{P_none}[V]; the undiscounted continuation gap.
  std::vector<double> gap_good;
  std::vector<double> gap_bad;
  std::vector<double> p_alloc_good;
  std::vector<double> p_alloc_bad;
  /// ctr * sum_i E[x_i phi_i]: expected one-round revenue of the optimal auction.
  std::vector<double> expected_reward;
  /// [state][bidder]
  std::vector<std::vector<double>> win_prob;
  std::vector<std::vector<double>> virtual_revenue;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;
  std::uint64_t sample_seed = 0;
  std::size_t n_samples = 0;
  std::string profile;

  std::size_t num_bidders() const { return win_prob.empty() ? 0 : win_prob.front().size(); }
  double delta(std::size_t s, Quality q) const { return q == Quality::Good ? delta_good[s] : delta_bad[s]; }
  double value_gap(std::size_t s, Quality q) const { return q == Quality::Good ? gap_good[s] : gap_bad[s]; }
};

/// Optimal per-row winner: argmax_i ctr*phi_i + delta(q_i) if positive, lowest
/// index on ties.
std::optional<std::size_t> optimal_winner(std::span<const double> phis, std::span<const Quality> qualities,
                                          double ctr, double delta_good, double delta_bad);

/// One Bellman update at grid index s on the sample-average MDP:
/// mean_r max(0, max_i ctr*phi_i + Delta_i) + gamma * E_{P_none}[V].
double bellman_backup(std::span<const double> values, std::size_t s, const StateGrid& grid,
                      const TransitionKernel& kernel, double gamma, const SampleSet& samples);

/// Value iteration from V = 0 until the sup-norm residual is <= tol.
/// Throws NotConverged, DiscreteUnsupported, ConfigError.
MdpSolution solve_value_iteration(const AdProfile& profile, const TransitionKernel& kernel,
                                  const StateGrid& grid, const SolverOptions& options);
MdpSolution solve_value_iteration(const AdProfile& profile, const TransitionKernel& kernel,
                                  const StateGrid& grid, const SolverOptions& options,
                                  const SampleSet& samples);

/// ctr * phi_i(v) + Delta_{q}(ctr). Throws OutOfSupport, StateOffGrid.
double modified_virtual_value(const MdpSolution& sol, const ValueDistribution& dist, Quality quality,
                              double v, double ctr);

struct AllocationStats {
  double p_good = 0.0;
  double p_bad = 0.0;
  double r_good = 0.0;  // sum over good bidders of E[x_i* phi_i]
  double r_bad = 0.0;
  std::vector<double> win_prob;
  std::vector<double> virtual_revenue;
};

/// Optimal-auction statistics at grid index s averaged over the sample rows.
/// With `qualities` the per-row qualities are replaced by that fixed vector.
AllocationStats allocation_stats(const MdpSolution& sol, const SampleSet& samples, std::size_t s,
                                 std::optional<std::span<const Quality>> qualities = std::nullopt);

}  // namespace adauction
