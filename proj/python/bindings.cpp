#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <sstream>
#include <thread>

#include "adauction/config.hpp"
#include "adauction/error.hpp"
#include "adauction/oracle.hpp"
#include "adauction/simple_auction.hpp"
#include "adauction/simulator.hpp"
#include "adauction/solution_io.hpp"
#include "adauction/verify.hpp"

namespace py = pybind11;
using namespace adauction;

namespace {

Quality parse_quality(const std::string& q) {
  if (q == "good") return Quality::Good;
  if (q == "bad") return Quality::Bad;
  throw ConfigError("quality must be 'good' or 'bad', got '" + q + "'");
}

py::dict point_dict(const PointSummary& p) {
  py::dict d;
  d["tuning"] = p.point.tuning;
  d["final_cumulative"] = p.final_cumulative;
  d["final_cumulative_se"] = p.final_cumulative_se;
  d["revenue"] = p.revenue;
  d["cumulative_revenue"] = p.cumulative_revenue;
  d["state"] = p.state;
  d["good_rate"] = p.good_rate;
  d["bad_rate"] = p.bad_rate;
  d["none_rate"] = p.none_rate;
  d["errors"] = p.errors;
  py::list disc;
  for (const auto& e : p.discounted) disc.append(py::dict(py::arg("gamma") = e.gamma, py::arg("mean") = e.mean, py::arg("se") = e.se));
  d["discounted"] = disc;
  return d;
}

MechanismSpec make_spec(const std::string& kind, double eta, double reserve,
                        const std::shared_ptr<const MdpSolution>& sol, const AdProfile& profile) {
  auto need = [&] {
    if (!sol) throw ConfigError(kind + " needs a solution");
    return sol;
  };
  if (kind == "static_multiplier") return mechanism::StaticMultiplier{eta};
  if (kind == "ctr_scaled") return mechanism::CtrScaled{eta};
  if (kind == "optimal_mdp") return mechanism::OptimalMdp{need()};
  if (kind == "spa_adjusted") return mechanism::SpaAdjusted{eta, reserve, need()};
  if (kind == "myerson") return mechanism::Myerson{};
  if (kind == "spa_reserve") return mechanism::SpaReserve{reserve};
  if (kind == "simple_two_stage") return mechanism::SimpleTwoStage{TwoStagePlanner::create(need(), profile)};
  throw ConfigError("unknown mechanism kind '" + kind + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Ad auctions with a click-through-rate state: solver, mechanisms, simulator";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<NotConverged>(m, "NotConverged", base.ptr());
  py::register_exception<DiscreteUnsupported>(m, "DiscreteUnsupported", base.ptr());
  py::register_exception<IrregularDistribution>(m, "IrregularDistribution", base.ptr());
  py::register_exception<StateOffGrid>(m, "StateOffGrid", base.ptr());
  py::register_exception<OutOfSupport>(m, "OutOfSupport", base.ptr());
  py::register_exception<TooLarge>(m, "TooLarge", base.ptr());

  py::class_<ValueDistribution>(m, "Distribution")
      .def_static("uniform", &ValueDistribution::uniform, py::arg("lo"), py::arg("hi"))
      .def_static("shifted_uniform", &ValueDistribution::shifted_uniform, py::arg("lo"), py::arg("hi"))
      .def_static("lognormal", &ValueDistribution::lognormal, py::arg("mu") = 0.0, py::arg("sigma") = 0.5)
      .def_static("point_mass", &ValueDistribution::point_mass, py::arg("v"))
      .def_static("discrete", &ValueDistribution::discrete, py::arg("support"), py::arg("probs"))
      .def_static("parse", &parse_distribution, py::arg("record"))
      .def_property_readonly("lower", &ValueDistribution::lower)
      .def_property_readonly("upper", &ValueDistribution::upper)
      .def("cdf", &ValueDistribution::cdf)
      .def("survival", &ValueDistribution::survival)
      .def("pdf", &ValueDistribution::pdf)
      .def("quantile", &ValueDistribution::quantile)
      .def("mean", &ValueDistribution::mean)
      .def("virtual_value", [](const ValueDistribution& d, double v) { return virtual_value(d, v); })
      .def("monopoly_reserve", [](const ValueDistribution& d) { return monopoly_reserve(d); })
      .def("__repr__", &ValueDistribution::describe);

  py::class_<ExperimentConfig>(m, "Config")
      .def_readwrite("name", &ExperimentConfig::name)
      .def_readwrite("rounds", &ExperimentConfig::rounds)
      .def_readwrite("repetitions", &ExperimentConfig::repetitions)
      .def_readwrite("initial_state", &ExperimentConfig::initial_state)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("discount_factors", &ExperimentConfig::discount_factors)
      .def_property_readonly("grid", [](const ExperimentConfig& c) {
        auto s = c.grid.states();
        return std::vector<double>(s.begin(), s.end());
      })
      .def_property_readonly("bidders", [](const ExperimentConfig& c) {
        py::list out;
        for (const auto& b : c.bidders) {
          const char* q = b.quality == QualityLaw::Good ? "good" : b.quality == QualityLaw::Bad ? "bad" : "random";
          out.append(py::make_tuple(b.value, q));
        }
        return out;
      })
      .def_property_readonly("mechanisms", [](const ExperimentConfig& c) {
        std::vector<std::string> kinds;
        for (const auto& mc : c.mechanisms) kinds.push_back(mc.kind);
        return kinds;
      })
      .def_property(
          "solver_gamma", [](const ExperimentConfig& c) { return c.solver.gamma; },
          [](ExperimentConfig& c, double g) { c.solver.gamma = g; })
      .def_property(
          "solver_samples", [](const ExperimentConfig& c) { return c.solver.n_samples; },
          [](ExperimentConfig& c, std::size_t n) { c.solver.n_samples = n; });

  m.def("load_config", &load_config, py::arg("path"));
  m.def(
      "parse_config",
      [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in);
      },
      py::arg("text"));

  py::class_<MdpSolution, std::shared_ptr<MdpSolution>>(m, "Solution")
      .def_property_readonly("grid", [](const MdpSolution& s) {
        auto g = s.grid.states();
        return std::vector<double>(g.begin(), g.end());
      })
      .def_readonly("gamma", &MdpSolution::gamma)
      .def_readonly("value", &MdpSolution::value)
      .def_readonly("delta_good", &MdpSolution::delta_good)
      .def_readonly("delta_bad", &MdpSolution::delta_bad)
      .def_readonly("gap_good", &MdpSolution::gap_good)
      .def_readonly("gap_bad", &MdpSolution::gap_bad)
      .def_readonly("p_alloc_good", &MdpSolution::p_alloc_good)
      .def_readonly("p_alloc_bad", &MdpSolution::p_alloc_bad)
      .def_readonly("expected_reward", &MdpSolution::expected_reward)
      .def_readonly("win_prob", &MdpSolution::win_prob)
      .def_readonly("residual", &MdpSolution::residual)
      .def_readonly("iterations", &MdpSolution::iterations)
      .def_readonly("residual_history", &MdpSolution::residual_history)
      .def_readonly("n_samples", &MdpSolution::n_samples)
      .def("save", [](const MdpSolution& s, const std::string& path) { save_solution(path, s); });

  m.def(
      "solve",
      [](const ExperimentConfig& cfg, std::optional<double> gamma, std::optional<std::size_t> n_samples) {
        SolverOptions opt = cfg.solver;
        if (gamma) opt.gamma = *gamma;
        if (n_samples) opt.n_samples = *n_samples;
        py::gil_scoped_release release;
        return std::make_shared<MdpSolution>(solve_value_iteration(cfg.profile(), cfg.kernel, cfg.grid, opt));
      },
      py::arg("config"), py::arg("gamma") = py::none(), py::arg("n_samples") = py::none(),
      "Value iteration for the config's profile, kernel and grid.");
  m.def(
      "load_solution", [](const std::string& path) { return std::make_shared<MdpSolution>(load_solution(path)); },
      py::arg("path"));

  m.def(
      "run_auction",
      [](const ExperimentConfig& cfg, const std::string& kind, double state, std::vector<double> bids,
         std::vector<std::string> qualities, double eta, double reserve, std::shared_ptr<MdpSolution> solution,
         std::uint64_t seed) {
        AdProfile profile = cfg.profile();
        if (bids.size() != profile.size() || qualities.size() != profile.size())
          throw ConfigError("need one bid and one quality per bidder");
        std::vector<Quality> q;
        for (const auto& s : qualities) q.push_back(parse_quality(s));
        auto spec = make_spec(kind, eta, reserve, solution, profile);
        Rng rng(seed);
        auto out = run_mechanism(spec, {state, bids, q, profile}, rng);
        py::dict d;
        d["winner"] = out.winner ? py::cast(*out.winner) : py::none();
        d["payment"] = out.payment;
        d["expected_revenue"] = out.expected_revenue;
        d["scores"] = out.scores;
        return d;
      },
      py::arg("config"), py::arg("kind"), py::arg("state"), py::arg("bids"), py::arg("qualities"),
      py::arg("eta") = 0.0, py::arg("reserve") = 0.0, py::arg("solution") = nullptr, py::arg("seed") = 1,
      "One round of a mechanism on the config's bidders.");

  m.def(
      "simulate",
      [](const ExperimentConfig& cfg, unsigned jobs) {
        SimulationReport report;
        {
          py::gil_scoped_release release;
          std::map<double, std::shared_ptr<const MdpSolution>> sols;
          auto points = expand_tuning(cfg, sols);
          RunOptions ro;
          ro.jobs = jobs ? jobs : std::max(1u, std::thread::hardware_concurrency());
          report = run_experiment(cfg, points, ro);
        }
        std::ostringstream csv;
        write_summary_csv(csv, report);
        py::dict out;
        out["experiment"] = report.experiment;
        py::list mechs;
        for (const auto& mr : report.mechanisms) {
          py::dict md;
          md["mechanism"] = mr.mechanism;
          md["best"] = mr.best;
          py::list pts;
          for (const auto& p : mr.points) pts.append(point_dict(p));
          md["points"] = pts;
          mechs.append(md);
        }
        out["mechanisms"] = mechs;
        out["summary_csv"] = csv.str();
        return out;
      },
      py::arg("config"), py::arg("jobs") = 0,
      "Every tuning point of every mechanism; jobs = 0 uses all cores.");

  m.def(
      "exact_policy",
      [](const ExperimentConfig& cfg) {
        auto exact = exact_optimal_policy(discrete_instance(cfg));
        py::dict d;
        d["value"] = exact.value;
        d["iterations"] = exact.iterations;
        return d;
      },
      py::arg("config"), "Exact optimal values for a config with point-mass or discrete laws and fixed qualities.");

  m.def(
      "verify",
      [](std::uint64_t seed, int sweep_inputs, int reserve_instances) {
        VerifyOptions opt;
        opt.seed = seed;
        opt.sweep_inputs = sweep_inputs;
        opt.reserve_instances = reserve_instances;
        std::vector<CheckResult> results;
        {
          py::gil_scoped_release release;
          results = run_verify_suite(opt);
        }
        py::list out;
        for (const auto& r : results) {
          out.append(py::dict(py::arg("check") = r.check, py::arg("instances") = r.instances,
                              py::arg("passed") = r.passed, py::arg("worst_ratio") = r.worst_ratio,
                              py::arg("ok") = r.ok()));
        }
        return out;
      },
      py::arg("seed") = 1, py::arg("sweep_inputs") = 100, py::arg("reserve_instances") = 100);
}
