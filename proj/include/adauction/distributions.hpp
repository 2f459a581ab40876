#pragma once

#include <string>
#include <variant>
#include <vector>

#include "adauction/random.hpp"

namespace adauction {

struct Uniform {
  double lo;
  double hi;
};

/// Uniform law whose support does not start at zero; kept as its own tag so
/// configs and logs say what was declared.
struct ShiftedUniform {
  double lo;
  double hi;
};

struct LogNormal {
  double mu;
  double sigma;
};

struct PointMass {
  double v;
};

struct FiniteDiscrete {
  std::vector<double> support;  // strictly increasing
  std::vector<double> probs;
};

/// A reserve price, or the explicit "never met" marker for thresholds above
/// the top of a bidder's support.
class Reserve {
 public:
  static constexpr Reserve at(double v) { return Reserve(v, true); }
  static constexpr Reserve above_support() { return Reserve(0.0, false); }

  constexpr bool reachable() const { return reachable_; }
  constexpr double value() const { return value_; }
  constexpr bool met_by(double bid) const { return reachable_ && bid >= value_; }

  friend constexpr bool operator==(const Reserve&, const Reserve&) = default;

 private:
  constexpr Reserve(double v, bool r) : value_(v), reachable_(r) {}
  double value_;
  bool reachable_;
};

class ValueDistribution {
 public:
  using Kind = std::variant<Uniform, ShiftedUniform, LogNormal, PointMass, FiniteDiscrete>;

  static ValueDistribution uniform(double lo, double hi);
  static ValueDistribution shifted_uniform(double lo, double hi);
  static ValueDistribution lognormal(double mu, double sigma);
  static ValueDistribution point_mass(double v);
  static ValueDistribution discrete(std::vector<double> support, std::vector<double> probs);

  const Kind& kind() const { return kind_; }
  bool is_continuous() const;

  /// Support bounds; upper() is +inf for LogNormal.
  double lower() const;
  double upper() const;
  bool in_support(double v) const;

  double cdf(double v) const;
  /// 1 - cdf(v), computed without cancellation for LogNormal tails.
  double survival(double v) const;
  /// Density for continuous kinds; throws DiscreteUnsupported otherwise.
  double pdf(double v) const;
  /// Smallest v with cdf(v) >= u. quantile(1) is upper(), quantile(0) is lower().
  double quantile(double u) const;
  double sample(Rng& rng) const { return quantile(rng.uniform()); }

  double mean() const;
  std::string describe() const;

  friend bool operator==(const ValueDistribution& a, const ValueDistribution& b) {
    return a.describe() == b.describe();
  }

 private:
  explicit ValueDistribution(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

/// phi(v) = v - (1 - F(v)) / f(v).
double virtual_value(const ValueDistribution& d, double v);

/// Smallest v in the support with phi(v) >= y. Returns lower() when y is below
/// phi everywhere and Reserve::above_support() when y exceeds sup phi.
Reserve inverse_virtual_value(const ValueDistribution& d, double y);

/// Grid monotonicity check on phi; throws IrregularDistribution. Discrete kinds
/// throw DiscreteUnsupported.
void check_regular(const ValueDistribution& d);

/// Monopoly reserve phi^{-1}(0).
double monopoly_reserve(const ValueDistribution& d);

/// Points where tabulated checks are run: equally spaced for bounded supports,
/// equally spaced in probability for LogNormal.
std::vector<double> support_grid(const ValueDistribution& d, std::size_t n);

/// Parse a tagged record such as "kind=uniform lo=0 hi=1" or
/// "kind=discrete support=[1,2] probs=[0.5,0.5]". Throws ConfigError.
ValueDistribution parse_distribution(const std::string& record);

}  // namespace adauction
