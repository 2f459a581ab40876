#include "adauction/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>

#include "adauction/error.hpp"
#include "adauction/text.hpp"

namespace adauction {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kBisectionTol = 1e-10;

// Q(z) / pdf(z) for the standard normal (Mills ratio).
double mills_ratio(double z) {
  if (z > 30.0) {
    double z2 = z * z;
    return (1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)) / z;
  }
  double q = 0.5 * std::erfc(z / std::numbers::sqrt2);
  double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return q / pdf;
}

double lognormal_z(const LogNormal& d, double v) { return (std::log(v) - d.mu) / d.sigma; }

void require_bounds(double lo, double hi, const char* name) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw ConfigError(std::string(name) + " requires finite lo < hi");
  }
}

}  // namespace

ValueDistribution ValueDistribution::uniform(double lo, double hi) {
  require_bounds(lo, hi, "uniform");
  return ValueDistribution(Uniform{lo, hi});
}

ValueDistribution ValueDistribution::shifted_uniform(double lo, double hi) {
  require_bounds(lo, hi, "shifted_uniform");
  return ValueDistribution(ShiftedUniform{lo, hi});
}

ValueDistribution ValueDistribution::lognormal(double mu, double sigma) {
  if (!std::isfinite(mu) || !std::isfinite(sigma) || !(sigma > 0)) {
    throw ConfigError("lognormal requires finite mu and sigma > 0");
  }
  return ValueDistribution(LogNormal{mu, sigma});
}

ValueDistribution ValueDistribution::point_mass(double v) {
  if (!std::isfinite(v)) throw ConfigError("point_mass requires a finite value");
  return ValueDistribution(PointMass{v});
}

ValueDistribution ValueDistribution::discrete(std::vector<double> support, std::vector<double> probs) {
  if (support.empty() || support.size() != probs.size()) {
    throw ConfigError("discrete requires equally sized, nonempty support and probs");
  }
  for (std::size_t k = 1; k < support.size(); ++k) {
    if (!(support[k] > support[k - 1])) throw ConfigError("discrete support must be strictly increasing");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ConfigError("discrete probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("discrete probabilities must sum to 1");
  return ValueDistribution(FiniteDiscrete{std::move(support), std::move(probs)});
}

bool ValueDistribution::is_continuous() const {
  return std::holds_alternative<Uniform>(kind_) || std::holds_alternative<ShiftedUniform>(kind_) ||
         std::holds_alternative<LogNormal>(kind_);
}

double ValueDistribution::lower() const {
  return std::visit(overloaded{[](const Uniform& d) { return d.lo; },
                               [](const ShiftedUniform& d) { return d.lo; },
                               [](const LogNormal&) { return 0.0; },
                               [](const PointMass& d) { return d.v; },
                               [](const FiniteDiscrete& d) { return d.support.front(); }},
                    kind_);
}

double ValueDistribution::upper() const {
  return std::visit(overloaded{[](const Uniform& d) { return d.hi; },
                               [](const ShiftedUniform& d) { return d.hi; },
                               [](const LogNormal&) { return std::numeric_limits<double>::infinity(); },
                               [](const PointMass& d) { return d.v; },
                               [](const FiniteDiscrete& d) { return d.support.back(); }},
                    kind_);
}

bool ValueDistribution::in_support(double v) const {
  if (std::holds_alternative<LogNormal>(kind_)) return v > 0.0 && std::isfinite(v);
  if (const auto* d = std::get_if<FiniteDiscrete>(&kind_)) {
    return std::binary_search(d->support.begin(), d->support.end(), v);
  }
  return v >= lower() && v <= upper();
}

double ValueDistribution::cdf(double v) const {
  auto uniform_cdf = [v](double lo, double hi) { return std::clamp((v - lo) / (hi - lo), 0.0, 1.0); };
  return std::visit(
      overloaded{[&](const Uniform& d) { return uniform_cdf(d.lo, d.hi); },
                 [&](const ShiftedUniform& d) { return uniform_cdf(d.lo, d.hi); },
                 [&](const LogNormal& d) {
                   if (v <= 0.0) return 0.0;
                   return 0.5 * std::erfc(-lognormal_z(d, v) / std::numbers::sqrt2);
                 },
                 [&](const PointMass& d) { return v >= d.v ? 1.0 : 0.0; },
                 [&](const FiniteDiscrete& d) {
                   double acc = 0.0;
                   for (std::size_t k = 0; k < d.support.size() && d.support[k] <= v; ++k) acc += d.probs[k];
                   return std::min(acc, 1.0);
                 }},
      kind_);
}

double ValueDistribution::survival(double v) const {
  if (const auto* d = std::get_if<LogNormal>(&kind_)) {
    if (v <= 0.0) return 1.0;
    return 0.5 * std::erfc(lognormal_z(*d, v) / std::numbers::sqrt2);
  }
  return 1.0 - cdf(v);
}

double ValueDistribution::pdf(double v) const {
  auto uniform_pdf = [v](double lo, double hi) { return (v >= lo && v <= hi) ? 1.0 / (hi - lo) : 0.0; };
  return std::visit(
      overloaded{[&](const Uniform& d) { return uniform_pdf(d.lo, d.hi); },
                 [&](const ShiftedUniform& d) { return uniform_pdf(d.lo, d.hi); },
                 [&](const LogNormal& d) {
                   if (v <= 0.0) return 0.0;
                   double z = lognormal_z(d, v);
                   return std::exp(-0.5 * z * z) / (v * d.sigma * std::sqrt(2.0 * std::numbers::pi));
                 },
                 [](const PointMass&) -> double { throw DiscreteUnsupported("point_mass has no density"); },
                 [](const FiniteDiscrete&) -> double {
                   throw DiscreteUnsupported("discrete law has no density");
                 }},
      kind_);
}

double ValueDistribution::quantile(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  return std::visit(overloaded{[&](const Uniform& d) { return d.lo + u * (d.hi - d.lo); },
                               [&](const ShiftedUniform& d) { return d.lo + u * (d.hi - d.lo); },
                               [&](const LogNormal& d) {
                                 if (u <= 0.0) return 0.0;
                                 if (u >= 1.0) return static_cast<double>(INFINITY);
                                 double z = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
                                 return std::exp(d.mu + d.sigma * z);
                               },
                               [](const PointMass& d) { return d.v; },
                               [&](const FiniteDiscrete& d) {
                                 double acc = 0.0;
                                 for (std::size_t k = 0; k < d.support.size(); ++k) {
                                   acc += d.probs[k];
                                   if (acc >= u) return d.support[k];
                                 }
                                 return d.support.back();
                               }},
                    kind_);
}

double ValueDistribution::mean() const {
  return std::visit(overloaded{[](const Uniform& d) { return 0.5 * (d.lo + d.hi); },
                               [](const ShiftedUniform& d) { return 0.5 * (d.lo + d.hi); },
                               [](const LogNormal& d) { return std::exp(d.mu + 0.5 * d.sigma * d.sigma); },
                               [](const PointMass& d) { return d.v; },
                               [](const FiniteDiscrete& d) {
                                 return std::inner_product(d.support.begin(), d.support.end(),
                                                           d.probs.begin(), 0.0);
                               }},
                    kind_);
}

std::string ValueDistribution::describe() const {
  auto list = [](const std::vector<double>& xs) {
    std::string s = "[";
    for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? "," : "") + format_double(xs[k]);
    return s + "]";
  };
  return std::visit(
      overloaded{
          [](const Uniform& d) { return "kind=uniform lo=" + format_double(d.lo) + " hi=" + format_double(d.hi); },
          [](const ShiftedUniform& d) {
            return "kind=shifted_uniform lo=" + format_double(d.lo) + " hi=" + format_double(d.hi);
          },
          [](const LogNormal& d) {
            return "kind=lognormal mu=" + format_double(d.mu) + " sigma=" + format_double(d.sigma);
          },
          [](const PointMass& d) { return "kind=point_mass v=" + format_double(d.v); },
          [&](const FiniteDiscrete& d) { return "kind=discrete support=" + list(d.support) + " probs=" + list(d.probs); }},
      kind_);
}

double virtual_value(const ValueDistribution& d, double v) {
  if (!d.is_continuous()) throw DiscreteUnsupported("virtual value needs a continuous law: " + d.describe());
  if (!d.in_support(v)) throw OutOfSupport("value " + format_double(v) + " outside support of " + d.describe());
  return std::visit(overloaded{[&](const Uniform& u) { return 2.0 * v - u.hi; },
                               [&](const ShiftedUniform& u) { return 2.0 * v - u.hi; },
                               [&](const LogNormal& ln) {
                                 return v * (1.0 - ln.sigma * mills_ratio(lognormal_z(ln, v)));
                               },
                               [](const auto&) -> double { return 0.0; }},
                    d.kind());
}

Reserve inverse_virtual_value(const ValueDistribution& d, double y) {
  if (!d.is_continuous()) throw DiscreteUnsupported("inverse virtual value needs a continuous law: " + d.describe());
  if (std::isnan(y)) throw OutOfSupport("inverse virtual value of NaN");

  auto uniform_inverse = [y](double lo, double hi) {
    if (y <= 2.0 * lo - hi) return Reserve::at(lo);
    if (y > hi) return Reserve::above_support();
    return Reserve::at(std::clamp(0.5 * (y + hi), lo, hi));
  };
  if (const auto* u = std::get_if<Uniform>(&d.kind())) return uniform_inverse(u->lo, u->hi);
  if (const auto* u = std::get_if<ShiftedUniform>(&d.kind())) return uniform_inverse(u->lo, u->hi);

  // LogNormal: phi -> -inf as v -> 0 and phi -> +inf as v -> inf.
  if (y == -INFINITY) return Reserve::at(0.0);
  if (y == INFINITY) return Reserve::above_support();
  const auto& ln = std::get<LogNormal>(d.kind());
  auto phi = [&](double v) { return v * (1.0 - ln.sigma * mills_ratio(lognormal_z(ln, v))); };
  double lo = 0.0;
  double hi = std::max(1.0, std::exp(ln.mu));
  while (phi(hi) < y) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) return Reserve::above_support();
  }
  while (hi - lo > kBisectionTol) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (mid > 0.0 && phi(mid) >= y) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return Reserve::at(hi);
}

std::vector<double> support_grid(const ValueDistribution& d, std::size_t n) {
  std::vector<double> grid(n);
  if (std::holds_alternative<LogNormal>(d.kind())) {
    for (std::size_t k = 0; k < n; ++k) grid[k] = d.quantile((static_cast<double>(k) + 0.5) / static_cast<double>(n));
    return grid;
  }
  double lo = d.lower(), hi = d.upper();
  for (std::size_t k = 0; k < n; ++k) {
    grid[k] = lo + (hi - lo) * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
  }
  return grid;
}

void check_regular(const ValueDistribution& d) {
  if (!d.is_continuous()) throw DiscreteUnsupported("regularity gate applies to continuous laws only");
  auto grid = support_grid(d, 1000);
  double prev = -INFINITY;
  for (double v : grid) {
    double phi = virtual_value(d, v);
    if (phi < prev - 1e-12 * std::max(1.0, std::abs(prev))) {
      throw IrregularDistribution("virtual value decreases near v=" + format_double(v) + " for " + d.describe());
    }
    prev = phi;
  }
}

double monopoly_reserve(const ValueDistribution& d) {
  auto r = inverse_virtual_value(d, 0.0);
  return r.reachable() ? r.value() : d.upper();
}

ValueDistribution parse_distribution(const std::string& record) {
  // Collapse spaces inside brackets so "support=[1, 2]" tokenizes as one field.
  std::string flat;
  int depth = 0;
  for (char c : record) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (depth > 0 && (c == ' ' || c == '\t')) continue;
    flat.push_back(c);
  }
  std::istringstream in(flat);
  std::string token, kind;
  std::vector<std::pair<std::string, std::string>> fields;
  while (in >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos) throw ConfigError("distribution field without '=': " + token);
    auto key = token.substr(0, eq), value = token.substr(eq + 1);
    if (key == "kind") {
      kind = value;
    } else {
      fields.emplace_back(key, value);
    }
  }
  auto get = [&](const std::string& key) -> const std::string& {
    for (auto& [k, v] : fields) {
      if (k == key) return v;
    }
    throw ConfigError("distribution '" + kind + "' missing field " + key);
  };
  auto get_or = [&](const std::string& key, double fallback) {
    for (auto& [k, v] : fields) {
      if (k == key) return parse_double(v, key);
    }
    return fallback;
  };
  if (kind == "uniform") return ValueDistribution::uniform(parse_double(get("lo")), parse_double(get("hi")));
  if (kind == "shifted_uniform") {
    return ValueDistribution::shifted_uniform(parse_double(get("lo")), parse_double(get("hi")));
  }
  if (kind == "lognormal") {
    // Parameters the experiments leave open; mu=0, sigma=0.5 unless given.
    return ValueDistribution::lognormal(get_or("mu", 0.0), get_or("sigma", 0.5));
  }
  if (kind == "point_mass" || kind == "pointmass") return ValueDistribution::point_mass(parse_double(get("v")));
  if (kind == "discrete") {
    return ValueDistribution::discrete(parse_double_list(get("support")), parse_double_list(get("probs")));
  }
  throw ConfigError("unknown distribution kind '" + kind + "'");
}

}  // namespace adauction
