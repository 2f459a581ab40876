#include "adauction/config.hpp"

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>

#include "adauction/error.hpp"
#include "adauction/text.hpp"

namespace adauction {
namespace {

struct Entry {
  std::string key;
  std::string value;
  int line;
};

struct Section {
  std::string name;
  int line;
  std::vector<Entry> entries;
};

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

std::vector<Section> read_sections(std::istream& in) {
  std::vector<Section> out;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    auto text = std::string(trim(raw));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') fail(line, "unterminated section header");
      out.push_back({std::string(trim(std::string_view(text).substr(1, text.size() - 2))), line, {}});
      continue;
    }
    auto eq = text.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    if (out.empty()) fail(line, "entry before any [section]");
    out.back().entries.push_back(
        {std::string(trim(std::string_view(text).substr(0, eq))), std::string(trim(std::string_view(text).substr(eq + 1))), line});
  }
  return out;
}

// Wraps ConfigErrors from value parsers with the line number.
template <class F>
auto at_line(int line, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    fail(line, e.what());
  } catch (const Error& e) {
    fail(line, e.what());
  }
}

Outcome parse_outcome(const std::string& s, int line) {
  if (s == "good") return Outcome::Good;
  if (s == "bad") return Outcome::Bad;
  if (s == "none") return Outcome::None;
  fail(line, "unknown outcome '" + s + "' (good, bad, none)");
}

QualityLaw parse_quality(const std::string& s, int line) {
  if (s == "good" || s == "+1" || s == "1") return QualityLaw::Good;
  if (s == "bad" || s == "-1") return QualityLaw::Bad;
  if (s == "random") return QualityLaw::Random;
  fail(line, "unknown quality '" + s + "' (good, bad, random)");
}

const std::set<std::string> kKinds{"static_multiplier", "ctr_scaled", "optimal_mdp",     "spa_adjusted",
                                   "myerson",           "spa_reserve", "simple_two_stage"};

}  // namespace

const char* to_string(ClickMode m) { return m == ClickMode::Expected ? "expected" : "bernoulli"; }

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig cfg;
  cfg.source = source;
  auto sections = read_sections(in);
  const Section* kernel_section = nullptr;
  std::optional<std::vector<double>> grid;

  for (const auto& sec : sections) {
    if (sec.name == "experiment") {
      for (const auto& e : sec.entries) {
        at_line(e.line, [&] {
          if (e.key == "name") {
            cfg.name = e.value;
          } else if (e.key == "rounds") {
            cfg.rounds = static_cast<int>(parse_int(e.value, "rounds"));
          } else if (e.key == "repetitions") {
            cfg.repetitions = static_cast<int>(parse_int(e.value, "repetitions"));
          } else if (e.key == "initial_state") {
            cfg.initial_state = parse_double(e.value, "initial_state");
          } else if (e.key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(parse_int(e.value, "seed"));
          } else if (e.key == "clicks") {
            if (e.value == "expected") {
              cfg.clicks = ClickMode::Expected;
            } else if (e.value == "bernoulli") {
              cfg.clicks = ClickMode::Bernoulli;
            } else {
              throw ConfigError("clicks must be expected or bernoulli");
            }
          } else if (e.key == "grid") {
            grid = parse_double_list(e.value, "grid");
          } else if (e.key == "discount_factors") {
            cfg.discount_factors = parse_double_list(e.value, "discount_factors");
          } else {
            throw ConfigError("unknown key '" + e.key + "' in [experiment]");
          }
        });
      }
    } else if (sec.name == "solver") {
      for (const auto& e : sec.entries) {
        at_line(e.line, [&] {
          if (e.key == "gamma") {
            cfg.solver.gamma = parse_double(e.value, "gamma");
          } else if (e.key == "tol") {
            cfg.solver.tol = parse_double(e.value, "tol");
          } else if (e.key == "max_iters") {
            cfg.solver.max_iters = static_cast<int>(parse_int(e.value, "max_iters"));
          } else if (e.key == "samples") {
            cfg.solver.n_samples = static_cast<std::size_t>(parse_int(e.value, "samples"));
          } else if (e.key == "seed") {
            cfg.solver.seed = static_cast<std::uint64_t>(parse_int(e.value, "seed"));
          } else {
            throw ConfigError("unknown key '" + e.key + "' in [solver]");
          }
        });
      }
    } else if (sec.name == "kernel") {
      kernel_section = &sec;
    } else if (sec.name == "bidder") {
      std::optional<ValueDistribution> value;
      QualityLaw quality = QualityLaw::Random;
      long long count = 1;
      for (const auto& e : sec.entries) {
        at_line(e.line, [&] {
          if (e.key == "value") {
            value = parse_distribution(e.value);
          } else if (e.key == "quality") {
            quality = parse_quality(e.value, e.line);
          } else if (e.key == "count") {
            count = parse_int(e.value, "count");
            if (count < 1) throw ConfigError("count must be at least 1");
          } else {
            throw ConfigError("unknown key '" + e.key + "' in [bidder]");
          }
        });
      }
      if (!value) fail(sec.line, "[bidder] needs value = <distribution record>");
      for (long long k = 0; k < count; ++k) cfg.bidders.push_back({*value, quality});
    } else if (sec.name == "mechanism") {
      MechanismConfig m;
      std::optional<std::vector<double>> eta, reserve, gamma;
      for (const auto& e : sec.entries) {
        at_line(e.line, [&] {
          if (e.key == "kind" || e.key == "mechanism") {
            if (!kKinds.count(e.value)) throw ConfigError("unknown mechanism kind '" + e.value + "'");
            m.kind = e.value;
          } else if (e.key == "eta") {
            eta = parse_double_list(e.value, "eta");
          } else if (e.key == "reserve") {
            reserve = parse_double_list(e.value, "reserve");
          } else if (e.key == "gamma") {
            gamma = parse_double_list(e.value, "gamma");
          } else if (e.key == "solution") {
            m.solution = e.value;
          } else if (e.key == "p1_prime") {
            if (e.value == "conditional") {
              m.p1_prime = P1PrimeMode::Conditional;
            } else if (e.value == "marginal") {
              m.p1_prime = P1PrimeMode::Marginal;
            } else {
              throw ConfigError("p1_prime must be conditional or marginal");
            }
          } else {
            throw ConfigError("unknown key '" + e.key + "' in [mechanism]");
          }
        });
      }
      if (m.kind.empty()) fail(sec.line, "[mechanism] needs kind = ...");
      const bool uses_eta = m.kind == "static_multiplier" || m.kind == "ctr_scaled" || m.kind == "spa_adjusted";
      const bool uses_reserve = m.kind == "spa_adjusted" || m.kind == "spa_reserve";
      const bool uses_gamma = m.kind == "optimal_mdp" || m.kind == "simple_two_stage";
      if (eta && !uses_eta) fail(sec.line, m.kind + " takes no eta");
      if (reserve && !uses_reserve) fail(sec.line, m.kind + " takes no reserve");
      if (gamma && !uses_gamma) fail(sec.line, m.kind + " takes no gamma");
      if (uses_eta) m.eta = eta.value_or(parse_double_list("0:0.1:1"));
      if (uses_reserve) m.reserve = reserve.value_or(parse_double_list("0:0.1:1"));
      if (uses_gamma) m.gamma = gamma.value_or(std::vector<double>{0.8, 0.9, 0.95});
      for (double x : m.eta) {
        if (!(x >= 0.0)) fail(sec.line, "eta must be >= 0");
      }
      for (double x : m.reserve) {
        if (!(x >= 0.0)) fail(sec.line, "reserve must be >= 0");
      }
      for (double x : m.gamma) {
        if (!(x >= 0.0 && x < 1.0)) fail(sec.line, "gamma must lie in [0, 1)");
      }
      if (!m.solution.empty() && !source.empty()) {
        std::filesystem::path p(m.solution);
        if (p.is_relative()) m.solution = (std::filesystem::path(source).parent_path() / p).string();
      }
      cfg.mechanisms.push_back(std::move(m));
    } else {
      fail(sec.line, "unknown section [" + sec.name + "]");
    }
  }

  if (grid) cfg.grid = at_line(0, [&] { return StateGrid(*grid); });
  if (kernel_section) {
    std::string kind = "step";
    StepKernelParams params;
    std::vector<const Entry*> rows;
    for (const auto& e : kernel_section->entries) {
      at_line(e.line, [&] {
        if (e.key == "kind") {
          if (e.value != "step" && e.value != "explicit") throw ConfigError("kernel kind must be step or explicit");
          kind = e.value;
        } else if (e.key == "step") {
          params.step = parse_double(e.value, "step");
        } else if (e.key == "good_up") {
          params.good_up = parse_double(e.value, "good_up");
        } else if (e.key == "bad_down") {
          params.bad_down = parse_double(e.value, "bad_down");
        } else if (e.key == "none_up") {
          params.none_up = parse_double(e.value, "none_up");
        } else if (e.key.find('.') != std::string::npos) {
          rows.push_back(&e);
        } else {
          throw ConfigError("unknown key '" + e.key + "' in [kernel]");
        }
      });
    }
    if (kind == "step") {
      if (!rows.empty()) fail(rows.front()->line, "explicit rows need kind = explicit");
      cfg.kernel = at_line(kernel_section->line, [&] { return TransitionKernel::step_kernel(cfg.grid, params); });
    } else {
      TransitionKernel k(cfg.grid.size());
      for (const Entry* e : rows) {
        auto dot = e->key.find('.');
        Outcome o = parse_outcome(e->key.substr(0, dot), e->line);
        at_line(e->line, [&] {
          std::size_t s = cfg.grid.index_of(parse_double(e->key.substr(dot + 1), "state"));
          std::vector<double> probs(cfg.grid.size(), 0.0);
          for (const auto& item : split(e->value, ',')) {
            auto parts = split(item, ':');
            if (parts.size() != 2) throw ConfigError("kernel entries look like target:probability");
            probs[cfg.grid.index_of(parse_double(parts[0], "target state"))] += parse_double(parts[1], "probability");
          }
          k.set_row(s, o, std::move(probs));
        });
      }
      at_line(kernel_section->line, [&] { k.validate(); });
      cfg.kernel = std::move(k);
    }
  } else {
    cfg.kernel = TransitionKernel::step_kernel(cfg.grid);
  }

  if (cfg.rounds < 1) throw ConfigError("rounds must be at least 1");
  if (cfg.repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (!cfg.grid.find(cfg.initial_state)) throw ConfigError("initial_state must be on the grid");
  if (!(cfg.solver.gamma >= 0.0 && cfg.solver.gamma < 1.0)) throw ConfigError("solver gamma must lie in [0, 1)");
  if (!(cfg.solver.tol > 0.0)) throw ConfigError("solver tol must be positive");
  if (cfg.solver.n_samples < 1) throw ConfigError("solver samples must be at least 1");
  if (cfg.solver.max_iters < 1) throw ConfigError("solver max_iters must be at least 1");
  for (double g : cfg.discount_factors) {
    if (!(g >= 0.0 && g < 1.0)) throw ConfigError("discount factors must lie in [0, 1)");
  }
  if (cfg.bidders.empty()) throw ConfigError("config declares no [bidder]");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  return parse_config(in, path);
}

DiscreteInstance discrete_instance(const ExperimentConfig& cfg) {
  DiscreteInstance inst;
  inst.states.assign(cfg.grid.states().begin(), cfg.grid.states().end());
  inst.kernel = cfg.kernel;
  inst.gamma = cfg.solver.gamma;
  for (const auto& b : cfg.bidders) {
    if (b.quality == QualityLaw::Random) throw ConfigError("the exact oracle needs fixed qualities");
    inst.bidders.push_back({b.value, b.quality == QualityLaw::Good ? Quality::Good : Quality::Bad});
  }
  return inst;
}

}  // namespace adauction
