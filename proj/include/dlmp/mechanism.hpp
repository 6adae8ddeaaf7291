#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlmp/opf/model.hpp"

namespace dlmp::mech {

using opf::DlmpSet;
using opf::OpfSolution;

struct AggregatorSettlement {
    int id = 0;
    std::vector<int> buses;
    double payment_p = 0.0;  // active price times active net load, summed over owned buses and periods
    double payment_q = 0.0;
    double payment = 0.0;    // payment_p + payment_q
    bool deviated = false;
    double penalty = 0.0;
};

struct Settlement {
    std::vector<AggregatorSettlement> rows;
    DlmpSet lambda;            // prices the payments were computed with
    bool recomputed = false;   // realized profile differed, prices re-solved
    bool truncated = false;    // the re-solve fell back to penalized slacks
    double tau_pen = 0.0;

    double total_payment() const;
    double total_penalty() const;
};

struct SettleOptions {
    std::optional<double> tau_pen;  // default 10 |Phi*| from a central solve
    double deviation_tol = 1e-6;
    double K = 4.0;  // truncation bound for an infeasible realized profile
    conic::SolveOptions solver = conic::options_from_env();
};

// Payments at the agreed prices when every aggregator realizes its agreed
// profile; otherwise prices are re-solved at the realized profile and every
// deviating aggregator is charged tau_pen.
Settlement settle(const Scenario& s, const Profile& agreed, const DlmpSet& agreed_lambda, const Profile& realized,
                  const SettleOptions& opt = {});

// Price times quantity for one aggregator's buses.
AggregatorSettlement dlmp_payment(const Scenario& s, int aggregator, const DlmpSet& lambda, const Profile& x);

struct VcgRow {
    int id = 0;
    std::vector<int> buses;
    double others_cost_full = 0.0;  // phi_0 + sum of the other aggregators' costs at the full optimum
    double clarke_tax = 0.0;        // optimal cost of everyone else with this aggregator removed
    double vcg_payment = 0.0;       // others_cost_full - clarke_tax
    bool counterfactual_feasible = true;
};

struct VcgReport {
    double full_objective = 0.0;
    double dso_cost_full = 0.0;
    std::vector<double> la_cost_full;  // per aggregator
    std::vector<VcgRow> rows;
    int solve_count = 0;
};

// Declared values the payments are computed from. A decentralized run can fill
// these from reports instead of central solves.
struct VcgDeclarations {
    double dso_cost_full = 0.0;
    std::vector<double> la_cost_full;
    std::vector<std::optional<double>> counterfactual;  // empty when infeasible
};
VcgReport vcg_from_declarations(const Scenario& s, const VcgDeclarations& d);

// |A| + 1 central solves: the full problem and one per removed aggregator,
// whose buses keep their network data but carry no load.
VcgReport vcg_payments(const Scenario& s, const conic::SolveOptions& opt = conic::options_from_env());
// Same payments with every aggregator's profile fixed: the network problem at
// the given loads, and again with each aggregator's rows zeroed.
VcgReport vcg_payments_fixed(const Scenario& s, const Profile& loads,
                             const conic::SolveOptions& opt = conic::options_from_env());

struct ComparisonRow {
    int id = 0;
    std::vector<int> buses;
    double dlmp_payment = 0.0;
    double vcg_payment = 0.0;
};
std::vector<ComparisonRow> compare(const Settlement& st, const VcgReport& vcg);
nlohmann::json comparison_to_json(const std::vector<ComparisonRow>& rows);
std::string comparison_table(const std::vector<ComparisonRow>& rows);

// Incentive counterexample on the two-bus toy: the aggregator announces its
// true period-1 upper bound, then a lower one, and keeps what it announced.
struct Example1Side {
    std::vector<double> p_max;  // announced
    Profile x;
    DlmpSet lambda;
    double phi_raw = 0.0;     // weight * |p - preferred|^2
    double phi_signed = 0.0;  // phi_raw - weight * |preferred|^2, reported as utility
    double payment = 0.0;
    double total = 0.0;       // phi_signed + payment
    double dso_cost = 0.0;
};
struct Example1Result {
    Example1Side truthful;
    Example1Side cheated;
    bool cheating_pays() const { return cheated.total < truthful.total; }
};
Example1Result reproduce_example1(bool literal_cost = false,
                                  const conic::SolveOptions& opt = conic::options_from_env());

}  // namespace dlmp::mech
