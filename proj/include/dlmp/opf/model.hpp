#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dlmp/conic/program.hpp"
#include "dlmp/conic/solution.hpp"
#include "dlmp/scenario.hpp"

namespace dlmp::opf {

using Matrix = Eigen::MatrixXd;

// All matrices are buses x periods. Root row: p, q hold the substation's net
// consumption (p <= 0 means supply), v is fixed to V0, line quantities are 0.
struct OpfVariables {
    Matrix v, ell, f, g;
    Matrix pc, pg, qg;
    Matrix p, q;

    static OpfVariables zeros(int buses, int horizon);
    Profile net_profile() const { return Profile{p, q}; }
};

struct DlmpSet {
    Matrix lp, lq;
};

struct LaDuals {
    Eigen::VectorXd energy;  // per bus, multiplier of the energy floor
    Matrix nu_lo, nu_hi;     // consumption bounds
};

struct DualSet {
    Matrix beta;        // voltage drop equality
    Matrix gamma;       // f^2 + g^2 <= v l
    Matrix eta_plus;    // sending-end capacity
    Matrix eta_minus;   // receiving-end capacity
    Matrix sigma_lo, sigma_hi;
    std::optional<LaDuals> la;
};

enum class BalanceKind { active, reactive };

struct BalanceTag {
    int bus;
    int period;
    BalanceKind kind;
};

// Where each quantity lives in the program; -1 marks an absent entry.
struct IndexMap {
    int buses = 0;
    int horizon = 0;
    std::vector<conic::VarId> v, ell, f, g, pc, pg, qg, p, q;
    std::vector<conic::RowId> bal_p, bal_q, drop;
    std::vector<conic::ConeId> cone_rel, cone_send, cone_recv;
    std::vector<conic::RowId> energy;  // per bus
    std::vector<conic::VarId> u_plus_p, u_minus_p, u_plus_q, u_minus_q;
    std::vector<conic::VarId> resid_p, resid_q;

    int at(int n, int t) const { return n * horizon + t; }
    conic::RowId balance_row(int n, int t, BalanceKind k) const {
        return (k == BalanceKind::active ? bal_p : bal_q)[static_cast<std::size_t>(at(n, t))];
    }
    std::optional<BalanceTag> tag_of(conic::RowId row) const;
};

struct BuiltProgram {
    conic::ConicProgram program;
    IndexMap index;
};

struct OpfSolution {
    conic::Status status = conic::Status::numerical_failure;
    OpfVariables vars;
    DlmpSet dlmps;
    DualSet duals;
    double objective = 0.0;
    conic::ConicSolution raw;
    bool ok() const { return status == conic::Status::optimal; }
};

// Proximal term rho/2 |(p, q) - (p_ref, q_ref)|^2 over the aggregator's buses.
struct Proximal {
    Profile reference;
    double rho = 0.0;
};

// Global problem over the DSO and all aggregators. An excluded aggregator's
// buses are held at zero net load.
BuiltProgram build_central(const Scenario& s, int excluded_aggregator = -1);
// Network problem with net loads fixed.
BuiltProgram build_dso(const Scenario& s, const Profile& loads);
// Same, with penalized slacks on every non-root balance row; always feasible.
BuiltProgram build_dso_truncated(const Scenario& s, const Profile& loads, double K);
// Network problem with non-root balance rows moved into the objective at
// the given prices.
BuiltProgram build_dso_priced(const Scenario& s, const DlmpSet& prices);
// Augmented-Lagrangian network step: balance residuals against the given
// aggregator profile are priced and penalized by rho/2 |r|^2.
BuiltProgram build_dso_augmented(const Scenario& s, const DlmpSet& prices, const Profile& loads, double rho);
// Aggregator subproblem at the given prices.
BuiltProgram build_la(const Scenario& s, int aggregator, const DlmpSet& prices,
                      const std::optional<Proximal>& prox = std::nullopt);

// Reads variables, DLMPs and labeled multipliers from a solved program.
OpfSolution extract(const Scenario& s, const BuiltProgram& bp, const conic::ConicSolution& sol,
                    const Profile* fixed_loads = nullptr);
void extract_dlmps(const BuiltProgram& bp, const conic::ConicSolution& sol, DlmpSet& dlmps, DualSet& duals);

OpfSolution solve_central(const Scenario& s, const conic::SolveOptions& opt = conic::options_from_env(),
                          int excluded_aggregator = -1);
OpfSolution solve_dso(const Scenario& s, const Profile& loads,
                      const conic::SolveOptions& opt = conic::options_from_env());
OpfSolution solve_dso_truncated(const Scenario& s, const Profile& loads, double K,
                                const conic::SolveOptions& opt = conic::options_from_env());

// Substation cost sum_t c_t(-p0_t) + alpha_loss * sum R l.
double dso_cost(const Scenario& s, const OpfVariables& x);
// Aggregator cost of a net load profile.
double la_cost(const Scenario& s, int aggregator, const Profile& loads);
double total_la_cost(const Scenario& s, const Profile& loads);

// l2 norm of all nodal balance violations of network state x against loads.
double primal_residual(const Scenario& s, const OpfVariables& x, const Profile& loads);
// Balance row value without the load term, per bus and period.
void balance_expressions(const Scenario& s, const OpfVariables& x, Matrix& row_p, Matrix& row_q);

}  // namespace dlmp::opf
