#pragma once

#include <iosfwd>
#include <string>

#include "adauction/mdp.hpp"

namespace adauction {

/// Versioned flat file: "# adauction-solution v1", key=value header lines,
/// then one CSV row per grid state. Numbers round-trip exactly.
void write_solution(std::ostream& out, const MdpSolution& sol);
MdpSolution read_solution(std::istream& in);

/// Throw IoError when the file cannot be opened or is malformed.
void save_solution(const std::string& path, const MdpSolution& sol);
MdpSolution load_solution(const std::string& path);

}  // namespace adauction
