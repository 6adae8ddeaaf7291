#pragma once

#include <vector>

#include "dlmp/opf/model.hpp"

namespace dlmp::opf {

struct BusPeriod {
    int bus;
    int period;
};

struct ExactnessReport {
    Matrix gap;                   // v l - (f^2 + g^2), root row zero
    std::vector<BusPeriod> slack;  // entries with gap above tol
    double max_gap = 0.0;
    bool is_exact = false;
};

ExactnessReport check_exactness(const Scenario& s, const OpfVariables& x, double tol = 1e-6);

struct AncestorIdentityReport {
    Matrix residual_p, residual_q;
    double max_residual = 0.0;
};

// Compares each bus's prices with the ancestor's prices corrected by the line
// multipliers.
AncestorIdentityReport check_dlmp_ancestor_identity(const Scenario& s, const OpfSolution& sol);

struct SubgradientEntry {
    int bus = 0;
    int period = 0;
    BalanceKind kind = BalanceKind::active;
    double lambda = 0.0;
    double forward = 0.0;   // (F(x + eps e) - F(x)) / eps
    double backward = 0.0;  // (F(x) - F(x - eps e)) / eps
    double central = 0.0;
    double rel_error = 0.0;  // |central - lambda| / max(|lambda|, floor)
    bool smooth = false;     // one-sided differences agree
    bool bracketed = false;  // lambda between the one-sided differences
    bool skipped = false;    // a perturbed problem was infeasible
};

struct SubgradientReport {
    double base_value = 0.0;
    std::vector<SubgradientEntry> entries;
    double max_rel_error_smooth = 0.0;
    bool all_bracketed = true;
};

struct SubgradientOptions {
    double eps = 1e-4;
    double rel_floor = 1.0;     // denominator floor for the relative error
    double smooth_tol = 1e-3;   // one-sided agreement that counts as smooth
    double bracket_tol = 1e-4;
    bool reactive = true;
    conic::SolveOptions solver = conic::options_from_env();
};

// Finite differences of the network cost F(loads) against the given prices.
SubgradientReport check_subgradient(const Scenario& s, const Profile& loads, const DlmpSet& dlmps,
                                    const SubgradientOptions& opt = {});

struct SufficientConditionsReport {
    // Exactness through increasing losses
    bool convex_objective = true;
    bool increasing_in_losses = false;  // alpha_loss > 0 and every R > 0
    bool independent_of_flows = true;
    bool consumption_side = false;  // LA costs constant and no binding upper bounds
    bool generation_side = false;   // LA costs constant and DER lower bounds slack
    bool loss_conditions_hold = false;

    // Exactness through increasing supply cost and voltage headroom
    bool increasing_in_supply = false;
    bool no_shunts = false;
    bool voltage_upper_slack = false;
    bool path_products_positive = false;
    bool supply_conditions_hold = false;

    // Linearized quantities at the solution and the path matrices.
    Matrix f_hat, g_hat, v_hat;
    std::vector<Eigen::Matrix2d> a_lower;  // per (bus, period), index bus*T + t
    std::vector<Eigen::Vector2d> u;        // per bus
    int horizon = 0;

    bool conditions_met() const { return loss_conditions_hold || supply_conditions_hold; }
};

// Evaluates the sufficient conditions for exactness. Solution-dependent
// bullets use the given optimum.
SufficientConditionsReport check_sufficient_conditions(const Scenario& s, const OpfSolution& sol);

}  // namespace dlmp::opf
