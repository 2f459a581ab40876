#include "adauction/simulator.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

#include "adauction/error.hpp"
#include "adauction/solution_io.hpp"
#include "adauction/text.hpp"

namespace adauction {

std::size_t apply_transition(const TransitionKernel& kernel, std::size_t s, Outcome outcome, Rng& rng) {
  return kernel.sample(s, outcome, rng.uniform());
}

EpisodeStreams episode_streams(std::uint64_t master, std::uint64_t repetition) {
  return {derive_seed(master, {repetition, 0}), derive_seed(master, {repetition, 1}),
          derive_seed(master, {repetition, 2}), derive_seed(master, {repetition, 3})};
}

EpisodeLog run_episode(const AdProfile& profile, const StateGrid& grid, const TransitionKernel& kernel,
                       const MechanismSpec& mechanism, const EpisodeSettings& settings, const EpisodeStreams& streams,
                       bool keep_traces) {
  if (settings.rounds < 1) throw ConfigError("rounds must be at least 1");
  Rng values(streams.values), moves(streams.transitions), mech(streams.mechanism), clicks(streams.clicks);
  EpisodeLog log;
  log.seed = streams.values;
  log.rounds.reserve(static_cast<std::size_t>(settings.rounds));
  const bool two_stage = std::holds_alternative<mechanism::SimpleTwoStage>(mechanism);
  std::size_t s = grid.index_of(settings.initial_state);
  for (int t = 0; t < settings.rounds; ++t) {
    RoundRecord rec;
    rec.round = t + 1;
    rec.state = grid[s];
    auto v = profile.draw_values(values);
    auto q = profile.draw_qualities(values);
    AuctionInput in{grid[s], v, q, profile};
    TwoStageTrace trace;
    try {
      auto out = run_mechanism(mechanism, in, mech, two_stage ? &trace : nullptr);
      rec.winner = out.winner;
      rec.payment = out.payment;
      rec.shown = out.shown(q);
      if (two_stage && keep_traces) rec.two_stage = trace;
    } catch (const Error&) {
      rec.error = true;
      ++log.errors;
    }
    const double u = clicks.uniform();
    if (settings.clicks == ClickMode::Expected) {
      rec.revenue = rec.state * rec.payment;
    } else {
      rec.revenue = u < rec.state ? rec.payment : 0.0;
    }
    s = apply_transition(kernel, s, rec.shown, moves);
    rec.next_state = grid[s];
    log.rounds.push_back(std::move(rec));
  }
  return log;
}

namespace {

std::string fmt(double x) { return format_double(x); }

std::shared_ptr<const MdpSolution> load_checked(const std::string& path, const ExperimentConfig& cfg,
                                                const AdProfile& profile) {
  auto sol = std::make_shared<const MdpSolution>(load_solution(path));
  if (sol->profile != profile.describe()) {
    throw ConfigError("solution " + path + " was solved for a different bidder profile");
  }
  if (!(sol->grid == cfg.grid)) throw ConfigError("solution " + path + " uses a different state grid");
  return sol;
}

struct RepResult {
  std::vector<double> revenue;
  std::vector<double> state;
  std::vector<Outcome> shown;
  std::vector<double> discounted;
  double total = 0.0;
  int errors = 0;
};

double mean_of(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double se_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean_of(xs), acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

EpisodeSettings settings_of(const ExperimentConfig& cfg) {
  return {cfg.rounds, cfg.initial_state, cfg.clicks};
}

}  // namespace

std::vector<TuningPoint> expand_tuning(const ExperimentConfig& cfg,
                                       std::map<double, std::shared_ptr<const MdpSolution>>& solutions) {
  const AdProfile profile = cfg.profile();
  auto solved = [&](double gamma) {
    auto it = solutions.find(gamma);
    if (it != solutions.end()) return it->second;
    SolverOptions opt = cfg.solver;
    opt.gamma = gamma;
    auto sol = std::make_shared<const MdpSolution>(solve_value_iteration(profile, cfg.kernel, cfg.grid, opt));
    solutions.emplace(gamma, sol);
    return sol;
  };
  std::vector<TuningPoint> out;
  std::map<std::string, int> seen;
  for (const auto& m : cfg.mechanisms) {
    const int dup = seen[m.kind]++;
    const std::string name = dup == 0 ? m.kind : m.kind + "_" + std::to_string(dup + 1);
    auto add = [&](std::string tuning, MechanismSpec spec) {
      validate(spec);
      out.push_back({name, std::move(tuning), std::move(spec)});
    };
    if (m.kind == "static_multiplier") {
      for (double eta : m.eta) add("eta=" + fmt(eta), mechanism::StaticMultiplier{eta});
    } else if (m.kind == "ctr_scaled") {
      for (double eta : m.eta) add("eta=" + fmt(eta), mechanism::CtrScaled{eta});
    } else if (m.kind == "myerson") {
      add("-", mechanism::Myerson{});
    } else if (m.kind == "spa_reserve") {
      for (double r : m.reserve) add("reserve=" + fmt(r), mechanism::SpaReserve{r});
    } else if (m.kind == "spa_adjusted") {
      auto sol = m.solution.empty() ? solved(cfg.solver.gamma) : load_checked(m.solution, cfg, profile);
      for (double eta : m.eta) {
        for (double r : m.reserve) add("eta=" + fmt(eta) + ";reserve=" + fmt(r), mechanism::SpaAdjusted{eta, r, sol});
      }
    } else if (m.kind == "optimal_mdp" || m.kind == "simple_two_stage") {
      std::vector<std::shared_ptr<const MdpSolution>> sols;
      if (!m.solution.empty()) {
        sols.push_back(load_checked(m.solution, cfg, profile));
      } else {
        for (double g : m.gamma) sols.push_back(solved(g));
      }
      for (const auto& sol : sols) {
        std::string tuning = "gamma=" + fmt(sol->gamma);
        if (m.kind == "optimal_mdp") {
          add(tuning, mechanism::OptimalMdp{sol});
        } else {
          if (m.p1_prime == P1PrimeMode::Marginal) tuning += ";p1_prime=marginal";
          add(tuning, mechanism::SimpleTwoStage{TwoStagePlanner::create(sol, profile, m.p1_prime)});
        }
      }
    } else {
      throw ConfigError("unknown mechanism kind '" + m.kind + "'");
    }
  }
  return out;
}

PointSummary run_point(const ExperimentConfig& cfg, const TuningPoint& point, const RunOptions& opts) {
  const AdProfile profile = cfg.profile();
  const auto settings = settings_of(cfg);
  const auto reps = static_cast<std::size_t>(cfg.repetitions);
  const auto rounds = static_cast<std::size_t>(cfg.rounds);
  std::vector<RepResult> results(reps);
  parallel_for(reps, opts.jobs, [&](std::size_t rep) {
    auto log = run_episode(profile, cfg.grid, cfg.kernel, point.spec, settings, episode_streams(cfg.seed, rep));
    RepResult& r = results[rep];
    r.errors = log.errors;
    r.discounted.assign(cfg.discount_factors.size(), 0.0);
    std::vector<double> weight(cfg.discount_factors.size(), 1.0);
    for (const auto& rec : log.rounds) {
      r.revenue.push_back(rec.revenue);
      r.state.push_back(rec.state);
      r.shown.push_back(rec.shown);
      r.total += rec.revenue;
      for (std::size_t g = 0; g < weight.size(); ++g) {
        r.discounted[g] += weight[g] * rec.revenue;
        weight[g] *= cfg.discount_factors[g];
      }
    }
  });

  PointSummary ps;
  ps.point = point;
  ps.revenue.assign(rounds, 0.0);
  ps.cumulative_revenue.assign(rounds, 0.0);
  ps.state.assign(rounds, 0.0);
  ps.good_rate.assign(rounds, 0.0);
  ps.bad_rate.assign(rounds, 0.0);
  ps.none_rate.assign(rounds, 0.0);
  const double inv = 1.0 / static_cast<double>(reps);
  std::vector<double> totals;
  for (const auto& r : results) {
    for (std::size_t t = 0; t < rounds; ++t) {
      ps.revenue[t] += r.revenue[t];
      ps.state[t] += r.state[t];
      ps.good_rate[t] += r.shown[t] == Outcome::Good;
      ps.bad_rate[t] += r.shown[t] == Outcome::Bad;
      ps.none_rate[t] += r.shown[t] == Outcome::None;
    }
    totals.push_back(r.total);
    ps.errors += r.errors;
  }
  double running = 0.0;
  for (std::size_t t = 0; t < rounds; ++t) {
    ps.revenue[t] *= inv;
    ps.state[t] *= inv;
    ps.good_rate[t] *= inv;
    ps.bad_rate[t] *= inv;
    ps.none_rate[t] *= inv;
    running += ps.revenue[t];
    ps.cumulative_revenue[t] = running;
  }
  ps.final_cumulative = mean_of(totals);
  ps.final_cumulative_se = se_of(totals);
  for (std::size_t g = 0; g < cfg.discount_factors.size(); ++g) {
    std::vector<double> xs;
    for (const auto& r : results) xs.push_back(r.discounted[g]);
    ps.discounted.push_back({cfg.discount_factors[g], mean_of(xs), se_of(xs)});
  }
  if (opts.progress) opts.progress(point);
  return ps;
}

SimulationReport run_experiment(const ExperimentConfig& cfg, const std::vector<TuningPoint>& points,
                                const RunOptions& opts) {
  SimulationReport report;
  report.experiment = cfg.name;
  for (const auto& p : points) {
    if (report.mechanisms.empty() || report.mechanisms.back().mechanism != p.mechanism) {
      report.mechanisms.push_back({p.mechanism, {}, 0});
    }
    auto& m = report.mechanisms.back();
    m.points.push_back(run_point(cfg, p, opts));
    if (m.points.back().final_cumulative > m.points[m.best].final_cumulative) m.best = m.points.size() - 1;
  }
  return report;
}

void write_summary_csv(std::ostream& out, const SimulationReport& report, bool header) {
  if (header) {
    out << "experiment,mechanism,tuning,round,revenue,cumulative_revenue,average_revenue_so_far,state,good_rate,"
           "bad_rate,none_rate\n";
  }
  for (const auto& m : report.mechanisms) {
    const auto& p = m.points[m.best];
    for (std::size_t t = 0; t < p.revenue.size(); ++t) {
      out << report.experiment << ',' << m.mechanism << ',' << p.point.tuning << ',' << t + 1 << ','
          << fmt(p.revenue[t]) << ',' << fmt(p.cumulative_revenue[t]) << ','
          << fmt(p.cumulative_revenue[t] / static_cast<double>(t + 1)) << ',' << fmt(p.state[t]) << ','
          << fmt(p.good_rate[t]) << ',' << fmt(p.bad_rate[t]) << ',' << fmt(p.none_rate[t]) << '\n';
    }
  }
}

void write_sweep_csv(std::ostream& out, const SimulationReport& report, bool header) {
  if (header) {
    out << "experiment,mechanism,tuning,best,final_cumulative_revenue,final_cumulative_se,final_state,errors,"
           "discount_factor,discounted_revenue,discounted_se\n";
  }
  for (const auto& m : report.mechanisms) {
    for (std::size_t k = 0; k < m.points.size(); ++k) {
      const auto& p = m.points[k];
      for (const auto& d : p.discounted) {
        out << report.experiment << ',' << m.mechanism << ',' << p.point.tuning << ',' << (k == m.best ? 1 : 0)
            << ',' << fmt(p.final_cumulative) << ',' << fmt(p.final_cumulative_se) << ',' << fmt(p.state.back())
            << ',' << p.errors << ',' << fmt(d.gamma) << ',' << fmt(d.mean) << ',' << fmt(d.se) << '\n';
      }
    }
  }
}

void write_runs_csv(std::ostream& out, const ExperimentConfig& cfg, const SimulationReport& report,
                    bool with_trace, std::ostream* trace, bool header) {
  if (header) {
    out << "experiment,mechanism,tuning,repetition,round,state,winner_quality,payment,expected_revenue\n";
    if (with_trace && trace) {
      *trace << "experiment,mechanism,tuning,repetition,round,state,phi_tilde,i_star,rho1,p1_prime,rho_clamped,"
                "stage,s1_quality,reserves\n";
    }
  }
  const AdProfile profile = cfg.profile();
  const auto settings = settings_of(cfg);
  for (const auto& m : report.mechanisms) {
    const auto& p = m.points[m.best].point;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      auto log = run_episode(profile, cfg.grid, cfg.kernel, p.spec, settings,
                             episode_streams(cfg.seed, static_cast<std::uint64_t>(rep)), with_trace);
      for (const auto& r : log.rounds) {
        out << report.experiment << ',' << m.mechanism << ',' << p.tuning << ',' << rep << ',' << r.round << ','
            << fmt(r.state) << ',' << to_string(r.shown) << ',' << fmt(r.payment) << ','
            << fmt(r.state * r.payment) << '\n';
        if (with_trace && trace && r.two_stage) {
          const auto& tr = *r.two_stage;
          std::string reserves;
          for (std::size_t i = 0; i < tr.table.reserves.size(); ++i) {
            if (i) reserves += ';';
            const auto& res = tr.table.reserves[i];
            reserves += res.reachable() ? fmt(res.value()) : "above_support";
          }
          *trace << report.experiment << ',' << m.mechanism << ',' << p.tuning << ',' << rep << ',' << r.round
                 << ',' << fmt(r.state) << ',' << fmt(tr.table.phi_tilde) << ','
                 << (tr.table.i_star ? std::to_string(*tr.table.i_star) : "") << ',' << fmt(tr.table.rho1) << ','
                 << fmt(tr.table.p1_prime) << ',' << (tr.table.rho_clamped ? 1 : 0) << ',' << tr.stage << ','
                 << (tr.s1_is_good ? "good" : "bad") << ',' << reserves << '\n';
        }
      }
    }
  }
}

}  // namespace adauction
