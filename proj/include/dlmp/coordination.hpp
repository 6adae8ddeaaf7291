#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dlmp/opf/model.hpp"

namespace dlmp::coord {

using opf::DlmpSet;
using opf::Matrix;
using opf::OpfSolution;
using opf::OpfVariables;

// Agent id 0 is the DSO; aggregators use their own ids.
constexpr int kDso = 0;

struct Message {
    enum class Kind { price_signal, base_profile, profile_report };
    struct Entry {
        int bus;
        int period;
        double p;  // price or quantity, active
        double q;  // reactive
    };
    Kind kind = Kind::price_signal;
    int round = 0;
    int sender = kDso;
    int receiver = kDso;
    std::vector<Entry> entries;
};

const char* to_string(Message::Kind kind);

// Append-only, ordered by (round, agent) because agents post in a fixed order.
class MessageBus {
public:
    void post(Message m) { log_.push_back(std::move(m)); }
    const std::vector<Message>& transcript() const { return log_; }

private:
    std::vector<Message> log_;
};

// True when every message to or from an aggregator only carries its own buses.
bool transcript_is_local(const Scenario& s, const std::vector<Message>& transcript);

enum class Algo { dual_ascent, admm, pdgs };
const char* to_string(Algo a);
Algo algo_from_string(const std::string& name);

struct AlgoConfig {
    Algo algo = Algo::admm;
    double rho = 5.0;      // ADMM penalty
    double alpha0 = 20.0;  // dual ascent step alpha_k = alpha0 / (k + 1)
    double K = 4.0;        // PDGS truncation bound
    int max_iter = 2000;
    double tol_primal = 1e-4;
    double tol_obj = 1e-6;
    int stable_rounds = 5;
    bool stop_early = true;  // false runs all max_iter rounds
    std::optional<DlmpSet> initial_prices;
    bool keep_transcript = true;
    conic::SolveOptions solver = conic::options_from_env();
};

struct IterationLog {
    int round = 0;
    DlmpSet lambda;  // prices after the round's update
    Profile x_a;     // aggregator profile at the end of the round
    double primal_residual = 0.0;
    double objective = 0.0;
    bool dso_feasible = true;
    double step = 0.0;  // dual ascent step actually used
    double la_ms = 0.0;
    double dso_ms = 0.0;
};

enum class RunStatus { converged, max_iter, diverged, failed };
const char* to_string(RunStatus s);

struct CoordinationResult {
    Algo algo = Algo::admm;
    std::vector<IterationLog> logs;
    DlmpSet lambda;
    Profile x_a;
    OpfVariables x0;
    OpfSolution last_dso;  // last network-side solve, for settlement
    RunStatus status = RunStatus::max_iter;
    std::vector<Message> transcript;

    bool converged() const { return status == RunStatus::converged; }
    double final_objective() const { return logs.empty() ? 0.0 : logs.back().objective; }
    double final_residual() const { return logs.empty() ? 0.0 : logs.back().primal_residual; }
};

// Aggregator's response to prices: argmin phi_a(x_a) + lambda . x_a over its
// own set, with an optional proximal pull. Returns the full-size profile with
// only the aggregator's rows filled. Throws Error(infeasible) for an empty set.
Profile la_best_response(const Scenario& s, int aggregator, const DlmpSet& prices,
                         const std::optional<opf::Proximal>& prox = std::nullopt,
                         const conic::SolveOptions& opt = conic::options_from_env());

// l2 norm of the non-root balance residuals row(x0) + x_a.
double coupling_residual(const Scenario& s, const OpfVariables& x0, const Profile& x_a);
// phi_0(x0) + sum_a phi_a(x_a)
double total_cost(const Scenario& s, const OpfVariables& x0, const Profile& x_a);

CoordinationResult run_dual_ascent(const Scenario& s, const AlgoConfig& cfg);
CoordinationResult run_admm(const Scenario& s, const AlgoConfig& cfg);
CoordinationResult run_pdgs(const Scenario& s, const AlgoConfig& cfg);
CoordinationResult run(const Scenario& s, const AlgoConfig& cfg);

// Saddle-point certificate for the global problem at (x0, x_a, lambda): each
// agent's shortfall against its best response to lambda, plus the coupling
// residual. All three vanish exactly at a KKT point.
struct FixedPointReport {
    std::vector<double> la_gap;  // per aggregator
    double dso_gap = 0.0;
    double primal_residual = 0.0;
    double max() const;
};
FixedPointReport check_fixed_point(const Scenario& s, const OpfVariables& x0, const Profile& x_a,
                                   const DlmpSet& lambda,
                                   const conic::SolveOptions& opt = conic::options_from_env());

// Convergence curves (one row per round) and the message log as CSV.
void write_curves_csv(const CoordinationResult& r, const std::string& path);
void write_transcript_csv(const CoordinationResult& r, const std::string& path);

}  // namespace dlmp::coord
