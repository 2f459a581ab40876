// Command-line entry point: solve, simulate, sweep, verify.
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "adauction/config.hpp"
#include "adauction/error.hpp"
#include "adauction/simulator.hpp"
#include "adauction/solution_io.hpp"
#include "adauction/text.hpp"
#include "adauction/verify.hpp"

namespace fs = std::filesystem;
using namespace adauction;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kSolve = 3, kIo = 4, kVerifyFailed = 5 };

constexpr const char* kExitHelp =
    "Exit status: 0 success, 1 unexpected error, 2 config error, 3 solver did not converge, "
    "4 I/O error, 5 verify found a failing check.";

struct Common {
  std::vector<std::string> configs;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  bool trace = false;
};

std::string timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

void write_manifest(const Common& c, const std::string& command, const std::string& seeds, const std::string& started) {
  auto f = open_out(fs::path(c.out) / "manifest.csv");
  std::string cfgs;
  for (const auto& p : c.configs) cfgs += (cfgs.empty() ? "" : ";") + p;
  f << "key,value\n";
  f << "subcommand," << command << '\n';
  f << "config," << cfgs << '\n';
  f << "seed," << seeds << '\n';
  f << "out," << c.out << '\n';
  f << "version," << "0.1.0" << '\n';
  f << "started," << started << '\n';
  f << "finished," << timestamp() << '\n';
}

std::vector<ExperimentConfig> load_all(const Common& c) {
  if (c.configs.empty()) throw ConfigError("--config is required");
  std::vector<ExperimentConfig> out;
  for (const auto& p : c.configs) {
    auto cfg = load_config(p);
    if (c.seed) cfg.seed = *c.seed;
    out.push_back(std::move(cfg));
  }
  return out;
}

std::string seed_list(const std::vector<ExperimentConfig>& cfgs) {
  std::string s;
  for (const auto& c : cfgs) s += (s.empty() ? "" : ";") + std::to_string(c.seed);
  return s;
}

int cmd_solve(const Common& c) {
  const auto started = timestamp();
  fs::create_directories(c.out);
  std::string seeds;
  for (const auto& path : c.configs) {
    auto cfg = load_config(path);
    if (c.seed) cfg.solver.seed = *c.seed;
    auto sol = solve_value_iteration(cfg.profile(), cfg.kernel, cfg.grid, cfg.solver);
    auto file = fs::path(c.out) / (cfg.name + ".sol");
    save_solution(file.string(), sol);
    std::cerr << cfg.name << ": V(" << format_double(cfg.initial_state)
              << ") = " << format_double(sol.value[cfg.grid.index_of(cfg.initial_state)]) << " after "
              << sol.iterations << " sweeps, written to " << file.string() << '\n';
    seeds += (seeds.empty() ? "" : ";") + std::to_string(cfg.solver.seed);
  }
  write_manifest(c, "solve", seeds, started);
  return kOk;
}

int cmd_simulate(const Common& c, bool full) {
  const auto started = timestamp();
  auto cfgs = load_all(c);
  fs::create_directories(c.out);
  auto summary = open_out(fs::path(c.out) / "summary.csv");
  auto sweep = open_out(fs::path(c.out) / "sweep.csv");
  std::ofstream runs, trace;
  if (full) runs = open_out(fs::path(c.out) / "runs.csv");
  if (full && c.trace) trace = open_out(fs::path(c.out) / "trace.csv");
  bool first = true;
  for (const auto& cfg : cfgs) {
    std::map<double, std::shared_ptr<const MdpSolution>> solutions;
    auto points = expand_tuning(cfg, solutions);
    RunOptions opts;
    opts.jobs = c.jobs;
    std::size_t done = 0;
    opts.progress = [&](const TuningPoint& p) {
      std::cerr << "\r" << cfg.name << ": " << ++done << "/" << points.size() << " " << p.mechanism << " "
                << p.tuning << "        " << std::flush;
    };
    auto report = run_experiment(cfg, points, opts);
    std::cerr << '\n';
    write_summary_csv(summary, report, first);
    write_sweep_csv(sweep, report, first);
    if (full) write_runs_csv(runs, cfg, report, c.trace, c.trace ? &trace : nullptr, first);
    for (const auto& m : report.mechanisms) {
      const auto& b = m.points[m.best];
      std::cerr << "  " << m.mechanism << " [" << b.point.tuning << "] revenue " << format_double(b.final_cumulative)
                << " final ctr " << format_double(b.state.back()) << '\n';
    }
    first = false;
  }
  if (!summary || !sweep || (full && !runs)) throw IoError("write failed under " + c.out);
  write_manifest(c, full ? "simulate" : "sweep", seed_list(cfgs), started);
  return kOk;
}

int cmd_verify(const Common& c) {
  const auto started = timestamp();
  VerifyOptions opts;
  std::string seeds;
  if (c.seed) opts.seed = *c.seed;
  for (const auto& path : c.configs) {
    auto cfg = load_config(path);
    // A fixed-quality point-mass config on three states is taken as the
    // alternating example; other configs only contribute their seed.
    bool toy = cfg.grid.size() == 3 && !cfg.profile().all_continuous();
    if (toy) opts.toy = discrete_instance(cfg);
    if (!c.seed) opts.seed = cfg.seed;
  }
  fs::create_directories(c.out);
  auto results = run_verify_suite(opts);
  auto f = open_out(fs::path(c.out) / "verify_report.csv");
  write_verify_report(f, results);
  bool ok = true;
  for (const auto& r : results) {
    std::cerr << (r.ok() ? "pass " : "FAIL ") << r.check << " " << r.passed << "/" << r.instances
              << " worst_ratio=" << format_double(r.worst_ratio) << '\n';
    ok = ok && r.ok();
  }
  write_manifest(c, "verify", std::to_string(opts.seed), started);
  return ok ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repeated ad auctions with a Markov user state: solver, simulator and exact checks."};
  app.footer(kExitHelp);
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", c.configs, "Experiment config file (repeatable)");
    if (config_required) opt->required();
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "Override the master seed");
    sub->add_option("--jobs", c.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  };
  auto* solve = app.add_subcommand("solve", "Solve the MDP and write <name>.sol");
  add_common(solve, true);
  auto* simulate = app.add_subcommand("simulate", "Run every tuning point; write runs, summary and sweep CSVs");
  add_common(simulate, true);
  simulate->add_flag("--trace", c.trace, "Also write per-round two-stage diagnostics to trace.csv");
  auto* sweep = app.add_subcommand("sweep", "Tuning sweep only; write sweep.csv and summary.csv");
  add_common(sweep, true);
  auto* verify = app.add_subcommand("verify", "Run the exact and Monte Carlo checks; write verify_report.csv");
  add_common(verify, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*solve) return cmd_solve(c);
    if (*simulate) return cmd_simulate(c, true);
    if (*sweep) return cmd_simulate(c, false);
    if (*verify) return cmd_verify(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DiscreteUnsupported& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IrregularDistribution& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const StateOffGrid& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NotConverged& e) {
    std::cerr << "solve error: " << e.what() << '\n';
    return kSolve;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOther;
}
