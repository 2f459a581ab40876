#include "adauction/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adauction/error.hpp"
#include "adauction/text.hpp"

namespace adauction {
namespace {

constexpr double kGridTol = 1e-9;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double row_reward(double best_good, double best_bad, double ctr, double delta_good, double delta_bad) {
  double best = 0.0;
  if (best_good != kNegInf) best = std::max(best, ctr * best_good + delta_good);
  if (best_bad != kNegInf) best = std::max(best, ctr * best_bad + delta_bad);
  return best;
}

}  // namespace

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Good:
      return "good";
    case Outcome::Bad:
      return "bad";
    case Outcome::None:
      return "none";
  }
  return "none";
}

StateGrid::StateGrid(std::vector<double> states) : states_(std::move(states)) {
  if (states_.empty()) throw ConfigError("state grid must not be empty");
  for (std::size_t k = 0; k < states_.size(); ++k) {
    if (!(states_[k] >= 0.0 && states_[k] <= 1.0)) throw ConfigError("state grid values must lie in [0, 1]");
    if (k > 0 && !(states_[k] > states_[k - 1])) throw ConfigError("state grid must be strictly increasing");
  }
}

StateGrid StateGrid::unit(std::size_t n) {
  if (n < 2) return StateGrid({0.0});
  std::vector<double> s(n);
  for (std::size_t k = 0; k < n; ++k) s[k] = static_cast<double>(k) / static_cast<double>(n - 1);
  return StateGrid(std::move(s));
}

std::optional<std::size_t> StateGrid::find(double s) const {
  std::size_t k = nearest(s);
  if (std::abs(states_[k] - s) <= kGridTol) return k;
  return std::nullopt;
}

std::size_t StateGrid::index_of(double s) const {
  if (auto k = find(s)) return *k;
  throw StateOffGrid("state " + format_double(s) + " is not on the grid");
}

std::size_t StateGrid::nearest(double s) const {
  auto it = std::lower_bound(states_.begin(), states_.end(), s);
  if (it == states_.begin()) return 0;
  if (it == states_.end()) return states_.size() - 1;
  auto k = static_cast<std::size_t>(it - states_.begin());
  return (s - states_[k - 1] <= states_[k] - s) ? k - 1 : k;
}

TransitionKernel::TransitionKernel(std::size_t num_states) : n_(num_states), probs_(n_ * kNumOutcomes * n_, 0.0) {
  if (n_ == 0) throw ConfigError("transition kernel needs at least one state");
  for (std::size_t s = 0; s < n_; ++s) {
    for (std::size_t o = 0; o < kNumOutcomes; ++o) probs_[offset(s, static_cast<Outcome>(o)) + s] = 1.0;
  }
}

TransitionKernel TransitionKernel::step_kernel(const StateGrid& grid, const StepKernelParams& p) {
  for (double q : {p.good_up, p.bad_down, p.none_up}) {
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("step kernel probabilities must lie in [0, 1]");
  }
  if (!(p.step > 0.0)) throw ConfigError("step kernel step must be positive");
  TransitionKernel k(grid.size());
  double top = grid[grid.size() - 1], bottom = grid[0];
  for (std::size_t s = 0; s < grid.size(); ++s) {
    std::size_t up = grid.nearest(std::min(grid[s] + p.step, top));
    std::size_t down = grid.nearest(std::max(grid[s] - p.step, bottom));
    auto two_point = [&](std::size_t target, double prob) {
      std::vector<double> row(grid.size(), 0.0);
      row[target] += prob;
      row[s] += 1.0 - prob;
      return row;
    };
    k.set_row(s, Outcome::Good, two_point(up, p.good_up));
    k.set_row(s, Outcome::Bad, two_point(down, p.bad_down));
    k.set_row(s, Outcome::None, two_point(up, p.none_up));
  }
  return k;
}

void TransitionKernel::set_row(std::size_t s, Outcome o, std::vector<double> probs) {
  if (s >= n_ || probs.size() != n_) throw ConfigError("transition row has the wrong size");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ConfigError("transition probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("transition row must sum to 1");
  std::copy(probs.begin(), probs.end(), probs_.begin() + static_cast<std::ptrdiff_t>(offset(s, o)));
}

std::span<const double> TransitionKernel::row(std::size_t s, Outcome o) const {
  return {probs_.data() + offset(s, o), n_};
}

double TransitionKernel::expect(std::size_t s, Outcome o, std::span<const double> values) const {
  auto r = row(s, o);
  double acc = 0.0;
  for (std::size_t k = 0; k < n_; ++k) {
    if (r[k] != 0.0) acc += r[k] * values[k];
  }
  return acc;
}

std::size_t TransitionKernel::sample(std::size_t s, Outcome o, double u) const {
  auto r = row(s, o);
  double acc = 0.0;
  std::size_t last = s;
  for (std::size_t k = 0; k < n_; ++k) {
    if (r[k] <= 0.0) continue;
    acc += r[k];
    last = k;
    if (u < acc) return k;
  }
  return last;
}

void TransitionKernel::validate() const {
  for (std::size_t s = 0; s < n_; ++s) {
    for (std::size_t o = 0; o < kNumOutcomes; ++o) {
      auto r = row(s, static_cast<Outcome>(o));
      double total = 0.0;
      for (double p : r) {
        if (!(p >= 0.0)) throw ConfigError("transition probabilities must be nonnegative");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-12) throw ConfigError("transition row must sum to 1");
    }
  }
}

AdProfile::AdProfile(std::vector<BidderSpec> bidders) : bidders_(std::move(bidders)) {
  if (bidders_.empty()) throw ConfigError("ad profile needs at least one bidder");
  if (bidders_.size() > 30) throw ConfigError("ad profile supports at most 30 bidders");
  for (const auto& b : bidders_) {
    if (b.value.is_continuous()) check_regular(b.value);
  }
}

bool AdProfile::all_continuous() const {
  return std::all_of(bidders_.begin(), bidders_.end(), [](const auto& b) { return b.value.is_continuous(); });
}

bool AdProfile::has_random_quality() const {
  return std::any_of(bidders_.begin(), bidders_.end(), [](const auto& b) { return b.quality == QualityLaw::Random; });
}

void AdProfile::require_continuous() const {
  for (const auto& b : bidders_) {
    if (!b.value.is_continuous()) {
      throw DiscreteUnsupported("discrete value law " + b.value.describe() + " needs the exact oracle");
    }
  }
}

std::vector<double> AdProfile::draw_values(Rng& rng) const {
  std::vector<double> v(bidders_.size());
  for (std::size_t i = 0; i < bidders_.size(); ++i) v[i] = bidders_[i].value.sample(rng);
  return v;
}

std::vector<Quality> AdProfile::draw_qualities(Rng& rng) const {
  std::vector<Quality> q(bidders_.size());
  for (std::size_t i = 0; i < bidders_.size(); ++i) {
    switch (bidders_[i].quality) {
      case QualityLaw::Good:
        q[i] = Quality::Good;
        break;
      case QualityLaw::Bad:
        q[i] = Quality::Bad;
        break;
      case QualityLaw::Random:
        q[i] = rng.uniform() < 0.5 ? Quality::Good : Quality::Bad;
        break;
    }
  }
  return q;
}

std::vector<std::uint32_t> AdProfile::feasible_quality_masks() const {
  std::vector<std::uint32_t> out;
  std::uint32_t fixed_good = 0, free_bits = 0;
  for (std::size_t i = 0; i < bidders_.size(); ++i) {
    if (bidders_[i].quality == QualityLaw::Good) fixed_good |= 1u << i;
    if (bidders_[i].quality == QualityLaw::Random) free_bits |= 1u << i;
  }
  // Enumerate subsets of the free bits.
  std::uint32_t sub = 0;
  do {
    out.push_back(fixed_good | sub);
    sub = (sub - free_bits) & free_bits;
  } while (sub != 0);
  std::sort(out.begin(), out.end());
  return out;
}

std::string AdProfile::describe() const {
  std::string s;
  for (std::size_t i = 0; i < bidders_.size(); ++i) {
    if (i) s += " | ";
    s += bidders_[i].value.describe();
    switch (bidders_[i].quality) {
      case QualityLaw::Good:
        s += " quality=good";
        break;
      case QualityLaw::Bad:
        s += " quality=bad";
        break;
      case QualityLaw::Random:
        s += " quality=random";
        break;
    }
  }
  return s;
}

std::uint32_t quality_mask(std::span<const Quality> qualities) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < qualities.size(); ++i) {
    if (qualities[i] == Quality::Good) m |= 1u << i;
  }
  return m;
}

Quality quality_in_mask(std::uint32_t mask, std::size_t i) {
  return (mask >> i) & 1u ? Quality::Good : Quality::Bad;
}

SampleSet SampleSet::draw(const AdProfile& profile, std::size_t rows, std::uint64_t seed) {
  profile.require_continuous();
  if (rows == 0) throw ConfigError("sample set needs at least one row");
  SampleSet s;
  s.rows_ = rows;
  s.bidders_ = profile.size();
  s.seed_ = seed;
  s.values_.resize(rows * s.bidders_);
  s.phis_.resize(rows * s.bidders_);
  s.qualities_.resize(rows * s.bidders_);
  s.best_good_.assign(rows, kNegInf);
  s.best_bad_.assign(rows, kNegInf);
  Rng rng(seed);
  for (std::size_t r = 0; r < rows; ++r) {
    auto v = profile.draw_values(rng);
    auto q = profile.draw_qualities(rng);
    for (std::size_t i = 0; i < s.bidders_; ++i) {
      std::size_t at = r * s.bidders_ + i;
      s.values_[at] = v[i];
      s.qualities_[at] = q[i];
      s.phis_[at] = virtual_value(profile.value(i), v[i]);
      auto& best = q[i] == Quality::Good ? s.best_good_[r] : s.best_bad_[r];
      best = std::max(best, s.phis_[at]);
    }
  }
  return s;
}

std::optional<std::size_t> optimal_winner(std::span<const double> phis, std::span<const Quality> qualities,
                                          double ctr, double delta_good, double delta_bad) {
  std::optional<std::size_t> winner;
  double best = 0.0;
  for (std::size_t i = 0; i < phis.size(); ++i) {
    double score = ctr * phis[i] + (qualities[i] == Quality::Good ? delta_good : delta_bad);
    if (score > best) {
      best = score;
      winner = i;
    }
  }
  return winner;
}

double bellman_backup(std::span<const double> values, std::size_t s, const StateGrid& grid,
                      const TransitionKernel& kernel, double gamma, const SampleSet& samples) {
  double ev_none = kernel.expect(s, Outcome::None, values);
  double dg = gamma * (kernel.expect(s, Outcome::Good, values) - ev_none);
  double db = gamma * (kernel.expect(s, Outcome::Bad, values) - ev_none);
  double ctr = grid[s];
  double acc = 0.0;
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    acc += row_reward(samples.best_good_phi(r), samples.best_bad_phi(r), ctr, dg, db);
  }
  return acc / static_cast<double>(samples.rows()) + gamma * ev_none;
}

MdpSolution solve_value_iteration(const AdProfile& profile, const TransitionKernel& kernel,
                                  const StateGrid& grid, const SolverOptions& options) {
  profile.require_continuous();
  if (options.n_samples < 1) throw ConfigError("n_samples must be at least 1");
  auto samples = SampleSet::draw(profile, options.n_samples, options.seed);
  return solve_value_iteration(profile, kernel, grid, options, samples);
}

MdpSolution solve_value_iteration(const AdProfile& profile, const TransitionKernel& kernel,
                                  const StateGrid& grid, const SolverOptions& options,
                                  const SampleSet& samples) {
  profile.require_continuous();
  if (!(options.gamma >= 0.0 && options.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(options.tol > 0.0)) throw ConfigError("tol must be positive");
  if (options.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (kernel.num_states() != grid.size()) throw ConfigError("kernel and grid sizes differ");
  if (samples.bidders() != profile.size()) throw ConfigError("sample set does not match the profile");
  kernel.validate();

  const std::size_t n_states = grid.size();
  const double gamma = options.gamma;
  MdpSolution sol;
  sol.grid = grid;
  sol.gamma = gamma;
  sol.tol = options.tol;
  sol.sample_seed = samples.seed();
  sol.n_samples = samples.rows();
  sol.profile = profile.describe();

  std::vector<double> v(n_states, 0.0), next(n_states, 0.0);
  bool converged = false;
  int k = 0;
  double residual = INFINITY;
  while (k < options.max_iters) {
    ++k;
    residual = 0.0;
    for (std::size_t s = 0; s < n_states; ++s) {
      next[s] = bellman_backup(v, s, grid, kernel, gamma, samples);
      residual = std::max(residual, std::abs(next[s] - v[s]));
    }
    std::swap(v, next);
    sol.residual_history.push_back(residual);
    if (residual <= options.tol) {
      converged = true;
      break;
    }
  }
  sol.iterations = k;
  sol.residual = residual;
  if (!converged) throw NotConverged(residual, k);

  sol.value = v;
  sol.delta_good.resize(n_states);
  sol.delta_bad.resize(n_states);
  sol.gap_good.resize(n_states);
  sol.gap_bad.resize(n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    double ev_none = kernel.expect(s, Outcome::None, v);
    sol.gap_good[s] = kernel.expect(s, Outcome::Good, v) - ev_none;
    sol.gap_bad[s] = kernel.expect(s, Outcome::Bad, v) - ev_none;
    sol.delta_good[s] = gamma * sol.gap_good[s];
    sol.delta_bad[s] = gamma * sol.gap_bad[s];
  }

  sol.p_alloc_good.resize(n_states);
  sol.p_alloc_bad.resize(n_states);
  sol.expected_reward.resize(n_states);
  sol.win_prob.resize(n_states);
  sol.virtual_revenue.resize(n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    auto st = allocation_stats(sol, samples, s);
    sol.p_alloc_good[s] = st.p_good;
    sol.p_alloc_bad[s] = st.p_bad;
    sol.win_prob[s] = st.win_prob;
    sol.virtual_revenue[s] = st.virtual_revenue;
    double total = 0.0;
    for (double r : st.virtual_revenue) total += r;
    sol.expected_reward[s] = grid[s] * total;
  }
  return sol;
}

double modified_virtual_value(const MdpSolution& sol, const ValueDistribution& dist, Quality quality, double v,
                              double ctr) {
  std::size_t s = sol.grid.index_of(ctr);
  return sol.grid[s] * virtual_value(dist, v) + sol.delta(s, quality);
}

AllocationStats allocation_stats(const MdpSolution& sol, const SampleSet& samples, std::size_t s,
                                 std::optional<std::span<const Quality>> qualities) {
  const std::size_t n = samples.bidders();
  if (qualities && qualities->size() != n) throw ConfigError("quality vector size does not match the profile");
  AllocationStats st;
  st.win_prob.assign(n, 0.0);
  st.virtual_revenue.assign(n, 0.0);
  const double ctr = sol.grid[s];
  const double dg = sol.delta_good[s], db = sol.delta_bad[s];
  std::vector<Quality> row_q(n);
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    for (std::size_t i = 0; i < n; ++i) row_q[i] = qualities ? (*qualities)[i] : samples.quality(r, i);
    auto w = optimal_winner(samples.phis(r), row_q, ctr, dg, db);
    if (!w) continue;
    st.win_prob[*w] += 1.0;
    st.virtual_revenue[*w] += samples.phi(r, *w);
    if (row_q[*w] == Quality::Good) {
      st.p_good += 1.0;
      st.r_good += samples.phi(r, *w);
    } else {
      st.p_bad += 1.0;
      st.r_bad += samples.phi(r, *w);
    }
  }
  const double inv = 1.0 / static_cast<double>(samples.rows());
  for (auto& x : st.win_prob) x *= inv;
  for (auto& x : st.virtual_revenue) x *= inv;
  st.p_good *= inv;
  st.p_bad *= inv;
  st.r_good *= inv;
  st.r_bad *= inv;
  return st;
}

}  // namespace adauction
