#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "adauction/config.hpp"
#include "adauction/mechanisms.hpp"
#include "adauction/simple_auction.hpp"

namespace adauction {

/// Next grid state drawn from the kernel row (s, outcome).
std::size_t apply_transition(const TransitionKernel& kernel, std::size_t s, Outcome outcome, Rng& rng);

struct EpisodeSettings {
  int rounds = 500;
  double initial_state = 0.5;
  ClickMode clicks = ClickMode::Expected;
};

struct RoundRecord {
  int round = 0;
  double state = 0.0;  // before the round
  Outcome shown = Outcome::None;
  std::optional<std::size_t> winner;
  double payment = 0.0;
  /// Revenue credited for the round (state * payment, or payment on a click).
  double revenue = 0.0;
  double next_state = 0.0;
  bool error = false;
  /// Filled for simple_two_stage only.
  std::optional<TwoStageTrace> two_stage;
};

struct EpisodeLog {
  std::uint64_t seed = 0;
  std::vector<RoundRecord> rounds;
  int errors = 0;
};

/// Per-repetition random streams. They depend only on (master seed,
/// repetition), so every mechanism sees the same values, qualities, and
/// transition uniforms.
struct EpisodeStreams {
  std::uint64_t values;
  std::uint64_t transitions;
  std::uint64_t mechanism;
  std::uint64_t clicks;
};
EpisodeStreams episode_streams(std::uint64_t master, std::uint64_t repetition);

/// Mechanism errors in a round are recorded as "show nothing" and counted.
EpisodeLog run_episode(const AdProfile& profile, const StateGrid& grid, const TransitionKernel& kernel,
                       const MechanismSpec& mechanism, const EpisodeSettings& settings, const EpisodeStreams& streams,
                       bool keep_traces = false);

/// One concrete setting of a configured mechanism.
struct TuningPoint {
  std::string mechanism;  // kind
  std::string tuning;     // e.g. "eta=0.4", "eta=0.2;reserve=0.5", "gamma=0.95", "-"
  MechanismSpec spec;
};

struct DiscountedEstimate {
  double gamma = 0.0;
  double mean = 0.0;
  double se = 0.0;
};

struct PointSummary {
  TuningPoint point;
  std::vector<double> revenue;             // mean per-round revenue
  std::vector<double> cumulative_revenue;  // mean cumulative revenue
  std::vector<double> state;               // mean state before each round
  std::vector<double> good_rate;
  std::vector<double> bad_rate;
  std::vector<double> none_rate;
  double final_cumulative = 0.0;
  double final_cumulative_se = 0.0;
  std::vector<DiscountedEstimate> discounted;
  long long errors = 0;
};

struct MechanismReport {
  std::string mechanism;
  std::vector<PointSummary> points;
  std::size_t best = 0;  // highest final cumulative revenue, first on ties
};

struct SimulationReport {
  std::string experiment;
  std::vector<MechanismReport> mechanisms;
};

/// Builds every tuning point of the config's mechanisms. Solutions are solved
/// per distinct gamma (or loaded from solution=path) and cached in `solutions`.
std::vector<TuningPoint> expand_tuning(const ExperimentConfig& cfg,
                                       std::map<double, std::shared_ptr<const MdpSolution>>& solutions);

struct RunOptions {
  unsigned jobs = 1;
  /// Progress callback, called once per finished tuning point.
  std::function<void(const TuningPoint&)> progress;
};

/// All repetitions of one tuning point, reduced in repetition order.
PointSummary run_point(const ExperimentConfig& cfg, const TuningPoint& point, const RunOptions& opts);

SimulationReport run_experiment(const ExperimentConfig& cfg, const std::vector<TuningPoint>& points,
                                const RunOptions& opts);

/// CSV writers. runs.csv and trace.csv re-run the best point of every
/// mechanism; the episodes are identical to the ones summarized.
void write_summary_csv(std::ostream& out, const SimulationReport& report, bool header = true);
void write_sweep_csv(std::ostream& out, const SimulationReport& report, bool header = true);
void write_runs_csv(std::ostream& out, const ExperimentConfig& cfg, const SimulationReport& report,
                    bool with_trace, std::ostream* trace, bool header = true);

}  // namespace adauction
