#include "adauction/simple_auction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "adauction/error.hpp"

namespace adauction {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Eager plan building is skipped above this many random-quality bidders.
constexpr std::size_t kEagerFreeBits = 6;

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

// Pr[v >= r] for a continuous law.
double pass_prob(const ValueDistribution& d, const Reserve& r) {
  if (!r.reachable()) return 0.0;
  return d.survival(r.value());
}

std::vector<Quality> mask_qualities(std::uint32_t mask, std::size_t n) {
  std::vector<Quality> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = quality_in_mask(mask, i);
  return q;
}

// max_{i in S2} ctr * phi_i + Delta_i over given phis; -inf when S2 is empty.
double competition_level(const MdpSolution& sol, std::size_t s, std::span<const std::size_t> s2,
                          std::span<const double> phis, std::span<const Quality> qualities) {
  double best = kNegInf;
  for (auto i : s2) best = std::max(best, sol.grid[s] * phis[i] + sol.delta(s, qualities[i]));
  return best;
}

double first_stage_target(const MdpSolution& sol, std::size_t s, Quality q, double phi_tilde, bool with_zero) {
  const double d = sol.delta(s, q);
  double y = std::max(-d, phi_tilde - d);
  if (with_zero) y = std::max(y, 0.0);
  return y;
}

// Reserves of S1 from line "r_i = phi_i^{-1}(max{...} / ctr)", before i* is redefined.
std::vector<Reserve> base_reserves(const MdpSolution& sol, const AdProfile& profile, std::size_t s,
                                   std::span<const std::size_t> s1, std::span<const Quality> qualities,
                                   double phi_tilde) {
  std::vector<Reserve> r(profile.size(), Reserve::above_support());
  const bool with_zero = s1.size() >= 2;
  for (auto i : s1) {
    r[i] = scaled_reserve(profile.value(i), first_stage_target(sol, s, qualities[i], phi_tilde, with_zero),
                          sol.grid[s]);
  }
  return r;
}

double p1_prime_at(const AdProfile& profile, std::span<const std::size_t> s1, std::size_t i_star,
                   std::span<const Reserve> reserves) {
  double none = 1.0;
  for (auto i : s1) {
    if (i != i_star) none *= 1.0 - pass_prob(profile.value(i), reserves[i]);
  }
  return 1.0 - none;
}

}  // namespace

SpaResult spa_with_eager_reserves(std::span<const double> bids, std::span<const Reserve> reserves) {
  if (bids.size() != reserves.size()) throw ConfigError("bids and reserves differ in length");
  SpaResult out;
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (!reserves[i].met_by(bids[i])) continue;
    if (!out.winner || bids[i] > bids[*out.winner]) out.winner = i;
  }
  if (!out.winner) return out;
  double price = reserves[*out.winner].value();
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (i != *out.winner && reserves[i].met_by(bids[i])) price = std::max(price, bids[i]);
  }
  out.payment = price;
  return out;
}

PartitionPlan choose_partition(const AllocationStats& stats, std::span<const Quality> qualities) {
  std::vector<std::size_t> good, bad;
  for (std::size_t i = 0; i < qualities.size(); ++i) (qualities[i] == Quality::Good ? good : bad).push_back(i);
  bool good_first;
  if (good.empty() || bad.empty()) {
    good_first = !good.empty();
  } else {
    good_first = stats.r_good >= stats.r_bad;
  }
  PartitionPlan p;
  p.s1_is_good = good_first;
  p.s1 = good_first ? good : bad;
  p.s2 = good_first ? bad : good;
  p.r1 = good_first ? stats.r_good : stats.r_bad;
  p.r2 = good_first ? stats.r_bad : stats.r_good;
  p.p1 = good_first ? stats.p_good : stats.p_bad;
  p.p2 = good_first ? stats.p_bad : stats.p_good;
  return p;
}

PartitionPlan choose_partition(const MdpSolution& sol, const SampleSet& samples, std::size_t s,
                               std::span<const Quality> qualities) {
  return choose_partition(allocation_stats(sol, samples, s, qualities), qualities);
}

Reserve scaled_reserve(const ValueDistribution& d, double y, double ctr) {
  if (ctr > 0.0) return inverse_virtual_value(d, y / ctr);
  return y <= 0.0 ? Reserve::at(d.lower()) : Reserve::above_support();
}

TwoStagePlanner::TwoStagePlanner(std::shared_ptr<const MdpSolution> sol, AdProfile profile, SampleSet samples,
                                 P1PrimeMode mode)
    : sol_(std::move(sol)), profile_(std::move(profile)), samples_(std::move(samples)), mode_(mode) {
  if (!sol_) throw ConfigError("two-stage planner needs a solution");
  profile_.require_continuous();
  if (samples_.bidders() != profile_.size() || sol_->num_bidders() != profile_.size()) {
    throw ConfigError("solution, samples and profile disagree on the number of bidders");
  }
  std::size_t free_bits = 0;
  for (std::size_t i = 0; i < profile_.size(); ++i) free_bits += profile_[i].quality == QualityLaw::Random;
  if (free_bits > kEagerFreeBits) return;
  for (std::size_t s = 0; s < sol_->grid.size(); ++s) {
    for (auto mask : profile_.feasible_quality_masks()) {
      auto q = mask_qualities(mask, profile_.size());
      plans_.emplace(std::pair{s, mask}, plan_for(s, mask, choose_partition(*sol_, samples_, s, q)));
    }
  }
}

std::shared_ptr<const TwoStagePlanner> TwoStagePlanner::create(std::shared_ptr<const MdpSolution> sol,
                                                               const AdProfile& profile, P1PrimeMode mode) {
  if (!sol) throw ConfigError("two-stage planner needs a solution");
  auto samples = SampleSet::draw(profile, sol->n_samples, sol->sample_seed);
  return std::make_shared<const TwoStagePlanner>(sol, profile, std::move(samples), mode);
}

const TwoStagePlan& TwoStagePlanner::plan(std::size_t s, std::uint32_t mask) const {
  std::lock_guard lock(mu_);
  auto key = std::pair{s, mask};
  auto it = plans_.find(key);
  if (it != plans_.end()) return it->second;
  auto q = mask_qualities(mask, profile_.size());
  auto built = plan_for(s, mask, choose_partition(*sol_, samples_, s, q));
  return plans_.emplace(key, std::move(built)).first->second;
}

TwoStagePlan TwoStagePlanner::plan_for(std::size_t s, std::uint32_t mask, PartitionPlan partition) const {
  const std::size_t n = profile_.size();
  const auto q = mask_qualities(mask, n);
  const MdpSolution& sol = *sol_;
  TwoStagePlan plan;
  plan.partition = std::move(partition);
  plan.x_prime_revenue.assign(n, 0.0);
  const auto& s1 = plan.partition.s1;
  const auto& s2 = plan.partition.s2;
  if (s1.size() < 2) return plan;

  std::vector<char> in_s1(n, 0);
  for (auto i : s1) in_s1[i] = 1;
  for (std::size_t r = 0; r < samples_.rows(); ++r) {
    auto w = optimal_winner(samples_.phis(r), q, sol.grid[s], sol.delta_good[s], sol.delta_bad[s]);
    if (w && in_s1[*w] && samples_.phi(r, *w) >= 0.0) plan.x_prime_revenue[*w] += samples_.phi(r, *w);
  }
  for (auto& x : plan.x_prime_revenue) x /= static_cast<double>(samples_.rows());

  std::size_t best = s1.front();
  for (auto i : s1) {
    if (plan.x_prime_revenue[i] < plan.x_prime_revenue[best]) best = i;
  }
  plan.i_star = best;

  if (mode_ != P1PrimeMode::Marginal) return plan;
  // p1' averaged over the sample rows' competition levels, using the exact
  // pass probabilities of S1 given each level.
  double acc = 0.0;
  for (std::size_t r = 0; r < samples_.rows(); ++r) {
    double phi_tilde = competition_level(sol, s, s2, samples_.phis(r), q);
    auto res = base_reserves(sol, profile_, s, s1, q, phi_tilde);
    acc += p1_prime_at(profile_, s1, best, res);
  }
  plan.p1_prime_marginal = acc / static_cast<double>(samples_.rows());
  return plan;
}

TwoStageResult two_stage_spa(const AuctionInput& in, const TwoStagePlanner& planner, const TwoStagePlan& plan,
                             Rng& rng) {
  const AdProfile& profile = in.profile;
  const MdpSolution& sol = planner.solution();
  const std::size_t n = profile.size();
  if (in.bids.size() != n || in.qualities.size() != n) throw ConfigError("auction input sizes do not match the profile");
  for (std::size_t i = 0; i < n; ++i) {
    if (!profile.value(i).in_support(in.bids[i])) throw OutOfSupport("bid outside support");
  }
  const std::size_t s = sol.grid.index_of(in.state);
  const auto& part = plan.partition;

  TwoStageResult res;
  auto& tr = res.trace;
  tr.s1_is_good = part.s1_is_good;

  // Shadow draws for S2 and the competition level they imply.
  std::vector<double> shadow_phi(n, 0.0);
  for (auto i : part.s2) shadow_phi[i] = virtual_value(profile.value(i), profile.value(i).sample(rng));
  const double coin = rng.uniform();
  tr.table.phi_tilde = competition_level(sol, s, part.s2, shadow_phi, in.qualities);
  tr.table.reserves = base_reserves(sol, profile, s, part.s1, in.qualities, tr.table.phi_tilde);

  if (part.s1.size() >= 2) {
    const std::size_t is = *plan.i_star;
    tr.table.i_star = is;
    tr.table.p1_prime = planner.mode() == P1PrimeMode::Marginal
                            ? plan.p1_prime_marginal
                            : p1_prime_at(profile, part.s1, is, tr.table.reserves);
    double rho;
    if (1.0 - tr.table.p1_prime <= 0.0) {
      rho = 1.0 - part.p1 <= 0.0 ? 1.0 : kNegInf;
    } else {
      rho = 1.0 - (1.0 - part.p1) / (1.0 - tr.table.p1_prime);
    }
    tr.table.rho_clamped = rho < 0.0 || rho > 1.0;
    rho = clamp01(rho);
    tr.table.rho1 = rho;
    const double top = profile.value(is).quantile(1.0 - rho);
    tr.table.reserves[is] = std::isfinite(top) ? Reserve::at(top) : Reserve::above_support();
  }

  std::vector<double> bids1(n, 0.0);
  std::vector<Reserve> res1(n, Reserve::above_support());
  for (auto i : part.s1) {
    bids1[i] = in.bids[i];
    res1[i] = tr.table.reserves[i];
  }
  auto first = spa_with_eager_reserves(bids1, res1);

  AuctionOutcome& out = res.outcome;
  out.scores.assign(in.bids.begin(), in.bids.end());
  if (first.winner) {
    out.winner = first.winner;
    out.payment = std::min(first.payment, in.bids[*first.winner]);
    tr.stage = 1;
  } else if (!part.s2.empty()) {
    const double enter = 1.0 - part.p1 <= 0.0 ? 0.0 : part.p2 / (1.0 - part.p1);
    if (coin < enter) {
      tr.second_stage_entered = true;
      std::size_t w = part.s2.front();
      for (auto i : part.s2) {
        if (in.bids[i] > in.bids[w]) w = i;
      }
      double second = 0.0;
      for (auto i : part.s2) {
        if (i != w) second = std::max(second, in.bids[i]);
      }
      out.winner = w;
      out.payment = second;
      tr.stage = 2;
    }
  }
  out.expected_revenue = in.state * out.payment;
  return res;
}

TwoStageResult two_stage_spa(const AuctionInput& in, const TwoStagePlanner& planner, Rng& rng) {
  const std::size_t s = planner.solution().grid.index_of(in.state);
  return two_stage_spa(in, planner, planner.plan(s, quality_mask(in.qualities)), rng);
}

}  // namespace adauction
