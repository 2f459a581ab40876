#pragma once

#include <cmath>
#include <vector>

#include "adauction/mdp.hpp"

namespace testing {

// Hand-built solution on a given grid: constant corrections, zero statistics.
inline adauction::MdpSolution flat_solution(std::vector<double> states, double delta_good, double delta_bad,
                                            double gamma = 0.9, std::size_t bidders = 0) {
  adauction::MdpSolution sol;
  sol.grid = adauction::StateGrid(states);
  sol.gamma = gamma;
  const auto n = states.size();
  sol.value.assign(n, 0.0);
  sol.delta_good.assign(n, delta_good);
  sol.delta_bad.assign(n, delta_bad);
  sol.gap_good.assign(n, delta_good / gamma);
  sol.gap_bad.assign(n, delta_bad / gamma);
  sol.p_alloc_good.assign(n, 0.0);
  sol.p_alloc_bad.assign(n, 0.0);
  sol.expected_reward.assign(n, 0.0);
  sol.win_prob.assign(n, std::vector<double>(bidders, 0.0));
  sol.virtual_revenue.assign(n, std::vector<double>(bidders, 0.0));
  return sol;
}

// Standard normal CDF via erfc; used to build an independent LogNormal CDF.
inline double lognormal_cdf(double v, double mu, double sigma) {
  if (v <= 0.0) return 0.0;
  return 0.5 * std::erfc(-(std::log(v) - mu) / (sigma * std::sqrt(2.0)));
}

inline double lognormal_pdf(double v, double mu, double sigma) {
  const double z = (std::log(v) - mu) / sigma;
  return std::exp(-0.5 * z * z) / (v * sigma * std::sqrt(2.0 * M_PI));
}

}  // namespace testing
