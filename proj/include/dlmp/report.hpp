#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "dlmp/coordination.hpp"
#include "dlmp/mechanism.hpp"
#include "dlmp/opf/checks.hpp"

namespace dlmp::report {

// FNV-1a over the file bytes, hex encoded. Identifies inputs in reports.
std::string file_digest(const std::string& path);
std::string text_digest(const std::string& text);

// One block per period: bus, prices, net active and reactive load, line
// quantities and squared voltage. The root shows its net injection.
std::string opf_table(const Scenario& s, const opf::OpfSolution& sol);

nlohmann::json solver_stats(const conic::ConicSolution& raw);
nlohmann::json opf_to_json(const Scenario& s, const opf::OpfSolution& sol);
nlohmann::json exactness_to_json(const opf::ExactnessReport& r);
// Per-period substation cost alpha x + beta x^2 at supply x = -p0.
nlohmann::json period_costs(const Scenario& s, const opf::OpfVariables& x);
nlohmann::json coordination_to_json(const coord::CoordinationResult& r, double central_objective);
nlohmann::json settlement_to_json(const mech::Settlement& st);
nlohmann::json vcg_to_json(const mech::VcgReport& v);
nlohmann::json example1_to_json(const mech::Example1Result& r);

}  // namespace dlmp::report
