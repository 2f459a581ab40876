#include "adauction/solution_io.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "adauction/error.hpp"
#include "adauction/text.hpp"

namespace adauction {
namespace {

constexpr const char* kMagic = "# adauction-solution v1";

std::string join(std::span<const double> xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += format_double(xs[i]);
  }
  return out;
}

}  // namespace

void write_solution(std::ostream& out, const MdpSolution& sol) {
  const std::size_t n = sol.num_bidders();
  out << kMagic << '\n';
  out << "gamma=" << format_double(sol.gamma) << '\n';
  out << "tol=" << format_double(sol.tol) << '\n';
  out << "seed=" << sol.sample_seed << '\n';
  out << "n_samples=" << sol.n_samples << '\n';
  out << "residual=" << format_double(sol.residual) << '\n';
  out << "iterations=" << sol.iterations << '\n';
  out << "n_bidders=" << n << '\n';
  out << "profile=" << sol.profile << '\n';
  out << "grid=" << join(sol.grid.states()) << '\n';
  out << "state,V,delta_good,delta_bad,gap_good,gap_bad,p_good,p_bad,expected_reward";
  for (std::size_t i = 0; i < n; ++i) out << ",win_prob_" << i;
  for (std::size_t i = 0; i < n; ++i) out << ",virtual_revenue_" << i;
  out << '\n';
  for (std::size_t s = 0; s < sol.grid.size(); ++s) {
    std::vector<double> row{sol.grid[s],       sol.value[s],        sol.delta_good[s],
                            sol.delta_bad[s],  sol.gap_good[s],     sol.gap_bad[s],
                            sol.p_alloc_good[s], sol.p_alloc_bad[s], sol.expected_reward[s]};
    row.insert(row.end(), sol.win_prob[s].begin(), sol.win_prob[s].end());
    row.insert(row.end(), sol.virtual_revenue[s].begin(), sol.virtual_revenue[s].end());
    out << join(row) << '\n';
  }
}

MdpSolution read_solution(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kMagic) throw IoError("not an adauction solution file");
  std::map<std::string, std::string> header;
  while (std::getline(in, line)) {
    if (line.rfind("state,", 0) == 0) break;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed solution header line: " + line);
    header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto field = [&](const std::string& key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) throw IoError("solution file lacks '" + key + "'");
    return it->second;
  };

  MdpSolution sol;
  try {
    sol.gamma = parse_double(field("gamma"), "gamma");
    sol.tol = parse_double(field("tol"), "tol");
    sol.sample_seed = static_cast<std::uint64_t>(std::stoull(field("seed")));
    sol.n_samples = static_cast<std::size_t>(parse_int(field("n_samples"), "n_samples"));
    sol.residual = parse_double(field("residual"), "residual");
    sol.iterations = static_cast<int>(parse_int(field("iterations"), "iterations"));
    sol.profile = field("profile");
    sol.grid = StateGrid(parse_double_list(field("grid"), "grid"));
    const auto n = static_cast<std::size_t>(parse_int(field("n_bidders"), "n_bidders"));
    const std::size_t width = 9 + 2 * n;
    for (std::size_t s = 0; s < sol.grid.size(); ++s) {
      if (!std::getline(in, line)) throw IoError("solution file is truncated");
      auto row = parse_double_list(line, "solution row");
      if (row.size() != width) throw IoError("solution row has the wrong number of fields");
      if (row[0] != sol.grid[s]) throw IoError("solution rows do not follow the grid");
      sol.value.push_back(row[1]);
      sol.delta_good.push_back(row[2]);
      sol.delta_bad.push_back(row[3]);
      sol.gap_good.push_back(row[4]);
      sol.gap_bad.push_back(row[5]);
      sol.p_alloc_good.push_back(row[6]);
      sol.p_alloc_bad.push_back(row[7]);
      sol.expected_reward.push_back(row[8]);
      sol.win_prob.emplace_back(row.begin() + 9, row.begin() + 9 + n);
      sol.virtual_revenue.emplace_back(row.begin() + 9 + n, row.end());
    }
  } catch (const ConfigError& e) {
    throw IoError(std::string("bad solution file: ") + e.what());
  } catch (const std::logic_error& e) {
    throw IoError(std::string("bad solution file: ") + e.what());
  }
  return sol;
}

void save_solution(const std::string& path, const MdpSolution& sol) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_solution(out, sol);
  if (!out) throw IoError("write failed for " + path);
}

MdpSolution load_solution(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return read_solution(in);
}

}  // namespace adauction
