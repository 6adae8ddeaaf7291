// Runs the ten acceptance criteria and prints one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "dlmp/conic/kkt.hpp"
#include "dlmp/conic/solver.hpp"
#include "dlmp/coordination.hpp"
#include "dlmp/error.hpp"
#include "dlmp/fixtures.hpp"
#include "dlmp/mechanism.hpp"
#include "dlmp/opf/checks.hpp"

using namespace dlmp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Reference 15-bus solution at the fixed two-period profile. Columns:
// lambda_p, lambda_q, f, g, ell, v. Root line entries are unused.
const double kRef[2][15][6] = {
    {
        {2.12, 0.0, 0, 0, 0, 1},
        {2.122, 0.008, -0.427, -0.188, 0.229, 0.951},
        {2.049, 0.029, 0.199, -0.038, 0.042, 0.975},
        {1.937, 0.055, 0.205, -0.032, 0.042, 1.017},
        {1.939, 0.055, -0.019, -0.003, 0.0, 1.016},
        {1.94, 0.055, -0.014, -0.002, 0.0, 1.016},
        {1.942, 0.055, -0.013, -0.003, 0.0, 1.014},
        {0.0, 0.177, 0.131, 0.001, 0.016, 1.049},
        {0.003, 0.177, 0.256, -0.016, 0.063, 1.036},
        {0.003, 0.177, 0.148, -0.011, 0.021, 1.038},
        {0.001, 0.177, 0.151, -0.009, 0.022, 1.045},
        {0.0, 0.177, 0.165, -0.005, 0.026, 1.048},
        {2.12, 0.0, -0.132, -0.032, 0.019, 0.992},
        {2.137, 0.007, -0.025, -0.009, 0.001, 0.982},
        {2.146, 0.01, -0.022, -0.008, 0.001, 0.977},
    },
    {
        {1.0, 0.0, 0, 0, 0, 1},
        {1.002, 0.004, -0.924, -0.321, 1.057, 0.906},
        {0.979, 0.021, 0.127, -0.074, 0.024, 0.909},
        {0.942, 0.046, 0.131, -0.072, 0.024, 0.916},
        {0.945, 0.047, -0.083, -0.019, 0.008, 0.911},
        {0.947, 0.048, -0.057, -0.013, 0.004, 0.909},
        {0.95, 0.048, -0.026, -0.006, 0.001, 0.905},
        {-0.001, 0.176, 0.143, 0.001, 0.022, 0.947},
        {0.004, 0.176, 0.254, -0.035, 0.07, 0.932},
        {0.003, 0.176, 0.118, -0.033, 0.016, 0.933},
        {0.001, 0.176, 0.154, -0.011, 0.025, 0.94},
        {0.0, 0.176, 0.169, -0.006, 0.03, 0.943},
        {2.008, 0.272, -0.374, -0.083, 0.15, 0.977},
        {2.031, 0.281, -0.032, -0.012, 0.001, 0.965},
        {2.044, 0.286, -0.03, -0.011, 0.001, 0.957},
    },
};
const double kRefDlmpPayment[5] = {2.464, 0.693, 0.077, 0.006, 0.002};
const double kRefCost[2] = {0.873, 1.299};

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    auto t0 = Clock::now();
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, fmt::format("exception: {}", e.what())};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %2d %-34s %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
}

// Largest per-aggregator difference between two price sets, measured as
// payment at profile x.
double payment_diff(const Scenario& s, const opf::DlmpSet& a, const opf::DlmpSet& b, const Profile& x) {
    double worst = 0.0;
    for (std::size_t k = 0; k < s.aggregators.size(); ++k) {
        double pa = mech::dlmp_payment(s, static_cast<int>(k), a, x).payment;
        double pb = mech::dlmp_payment(s, static_cast<int>(k), b, x).payment;
        worst = std::max(worst, std::abs(pa - pb));
    }
    return worst;
}

double price_diff(const Scenario& s, const opf::DlmpSet& a, const opf::DlmpSet& b) {
    double worst = 0.0;
    for (int n = 0; n < s.network.size(); ++n) {
        if (n == s.network.root()) continue;
        for (int t = 0; t < s.horizon; ++t)
            worst = std::max({worst, std::abs(a.lp(n, t) - b.lp(n, t)), std::abs(a.lq(n, t) - b.lq(n, t))});
    }
    return worst;
}

Outcome reference_resolve() {
    auto t0 = Clock::now();
    Scenario s = fixture_15bus(0);
    Profile x = fixture_15bus_table2_profiles();
    opf::OpfSolution sol = opf::solve_dso(s, x);
    double elapsed = seconds_since(t0);
    if (!sol.ok()) return {false, fmt::format("solve {}", conic::to_string(sol.status))};
    double state_err = 0.0, price_err = 0.0;
    for (int t = 0; t < 2; ++t)
        for (int n = 1; n < 15; ++n) {
            const double* r = kRef[t][n];
            state_err = std::max({state_err, std::abs(sol.vars.f(n, t) - r[2]), std::abs(sol.vars.g(n, t) - r[3]),
                                  std::abs(sol.vars.ell(n, t) - r[4]), std::abs(sol.vars.v(n, t) - r[5])});
            price_err = std::max({price_err, std::abs(sol.dlmps.lp(n, t) - r[0]), std::abs(sol.dlmps.lq(n, t) - r[1])});
        }
    double pay_err = 0.0;
    for (int a = 0; a < 5; ++a)
        pay_err = std::max(pay_err, std::abs(mech::dlmp_payment(s, a, sol.dlmps, x).payment - kRefDlmpPayment[a]));
    bool states = state_err <= 2e-2;
    bool prices = price_err <= 3e-2 || pay_err <= 2e-2;
    return {states && prices && elapsed <= 10.0,
            fmt::format("state err {:.2e} (<=2e-2), price err {:.3f} (<=3e-2), payment err {:.3f} (<=2e-2), {:.2f}s",
                        state_err, price_err, pay_err, elapsed)};
}

Outcome period_costs() {
    Scenario s = fixture_15bus(0);
    opf::OpfSolution sol = opf::solve_dso(s, fixture_15bus_table2_profiles());
    if (!sol.ok()) return {false, "solve failed"};
    double c[2];
    for (int t = 0; t < 2; ++t) {
        double supply = -sol.vars.p(s.network.root(), t);
        c[t] = s.cost.alpha[t] * supply + s.cost.beta[t] * supply * supply;
    }
    bool ok = std::abs(c[0] - kRefCost[0]) <= 5e-3 && std::abs(c[1] - kRefCost[1]) <= 5e-3;
    return {ok, fmt::format("c0 {:.4f} (0.873), c1 {:.4f} (1.299), tol 5e-3", c[0], c[1])};
}

Outcome exactness() {
    double worst = 0.0;
    for (Scenario s : {fixture_toy(), fixture_15bus(7)}) {
        opf::OpfSolution sol = opf::solve_central(s);
        if (!sol.ok()) return {false, fmt::format("{} solve {}", s.name, conic::to_string(sol.status))};
        worst = std::max(worst, opf::check_exactness(s, sol.vars).max_gap);
    }
    return {worst <= 1e-6, fmt::format("max cone gap {:.2e} (<=1e-6)", worst)};
}

Outcome structural_prices() {
    Scenario s = fixture_15bus(0);
    opf::OpfSolution sol = opf::solve_dso(s, fixture_15bus_table2_profiles());
    if (!sol.ok()) return {false, "solve failed"};
    double behind = 0.0;
    for (int n : {7, 8, 9, 10, 11})
        for (int t = 0; t < 2; ++t) behind = std::max(behind, std::abs(sol.dlmps.lp(n, t)));
    double branch = INFINITY;
    for (int n : {12, 13, 14}) branch = std::min(branch, sol.dlmps.lp(n, 1));
    double l71 = sol.dlmps.lp(7, 1);
    bool ok = behind <= 5e-3 && branch >= 1.9 && l71 < 0.0;
    return {ok, fmt::format("max |lam_p| on 7..11 {:.3f} (<=5e-3), min lam_p 12..14 t1 {:.3f} (>=1.9), lam_p[7,1] "
                            "{:.3f} (<0)",
                            behind, branch, l71)};
}

Outcome example1() {
    auto t0 = Clock::now();
    mech::Example1Result r = mech::reproduce_example1();
    double elapsed = seconds_since(t0);
    bool ok = std::abs(r.truthful.total - (-15.13)) <= 0.05 && std::abs(r.cheated.total - (-15.47)) <= 0.05 &&
              std::abs(r.truthful.phi_signed - (-33.57)) <= 0.05 && std::abs(r.cheated.phi_signed - (-32.49)) <= 0.05 &&
              r.cheating_pays() && elapsed <= 5.0;
    return {ok, fmt::format("truthful {:.4f}/{:.4f}, cheated {:.4f}/{:.4f}, {:.2f}s", r.truthful.phi_signed,
                            r.truthful.total, r.cheated.phi_signed, r.cheated.total, elapsed)};
}

Outcome admm_equivalence() {
    std::string detail;
    bool ok = true;
    for (Scenario s : {fixture_toy(), fixture_15bus(7)}) {
        opf::OpfSolution central = opf::solve_central(s);
        if (!central.ok()) return {false, "central solve failed"};
        coord::AlgoConfig cfg;
        cfg.algo = coord::Algo::admm;
        cfg.rho = 5.0;
        cfg.max_iter = 200;
        cfg.keep_transcript = false;
        coord::CoordinationResult r = coord::run(s, cfg);
        double gap = std::abs(r.final_objective() - central.objective);
        double dl = price_diff(s, r.lambda, central.dlmps);
        double dp = payment_diff(s, r.lambda, central.dlmps, central.vars.net_profile());
        bool here = r.final_residual() <= 1e-4 && gap <= 1e-4 && (dl <= 2e-2 || dp <= 2e-2);
        ok = ok && here;
        detail += fmt::format("{}: {} rounds, res {:.1e}, gap {:.1e}, dlam {:.1e}; ", s.name, r.logs.size(),
                              r.final_residual(), gap, dl);
    }
    return {ok, detail};
}

// One long PDGS run feeds both PDGS criteria.
struct PdgsRun {
    coord::CoordinationResult r;
    double central = 0.0;
};

const PdgsRun& pdgs_run() {
    static PdgsRun run = [] {
        PdgsRun p;
        Scenario s = fixture_15bus(7);
        p.central = opf::solve_central(s).objective;
        coord::AlgoConfig cfg;
        cfg.algo = coord::Algo::pdgs;
        cfg.K = 4.0;
        cfg.max_iter = 1000;
        cfg.stop_early = false;
        cfg.keep_transcript = false;
        p.r = coord::run(s, cfg);
        return p;
    }();
    return run;
}

Outcome pdgs_feasibility() {
    const auto& logs = pdgs_run().r.logs;
    double worst = 0.0;
    int first_feasible = -1, infeasible = 0, late_infeasible = 0;
    for (const auto& l : logs) {
        if (!l.dso_feasible) {
            ++infeasible;
            if (l.round >= static_cast<int>(logs.size()) / 2) ++late_infeasible;
            continue;
        }
        if (first_feasible < 0) first_feasible = l.round;
        worst = std::max(worst, l.primal_residual);
    }
    bool ok = first_feasible >= 0 && first_feasible <= 50 && worst <= 1e-6 && late_infeasible == 0;
    return {ok, fmt::format("max feasible-round residual {:.1e} (<=1e-6), first feasible round {}, infeasible rounds "
                            "{} ({} in final half)",
                            worst, first_feasible, infeasible, late_infeasible)};
}

Outcome pdgs_slow() {
    const PdgsRun& p = pdgs_run();
    const auto& logs = p.r.logs;
    if (logs.size() != 1000) return {false, fmt::format("{} rounds logged", logs.size())};
    double gap = std::abs(p.r.final_objective() - p.central);
    // Stabilized duals: the averaged prices move little over the last 100 rounds.
    const auto& a = logs[899].lambda;
    const auto& b = logs.back().lambda;
    double drift = std::max((a.lp - b.lp).cwiseAbs().maxCoeff(), (a.lq - b.lq).cwiseAbs().maxCoeff());
    bool ok = gap > 1e-4 && gap <= 1e-1 && drift <= 1e-2;
    return {ok, fmt::format("gap {:.2e} in (1e-4, 1e-1], price drift over last 100 rounds {:.1e} (<=1e-2)", gap, drift)};
}

Outcome properties() {
    auto t0 = Clock::now();
    double ident = 0, zero_imp = 0, subgrad = 0, kkt = 0, fixed = 0;
    int solves = 0;
    for (int i = 0; i < 20; ++i) {
        const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(i);
        const int buses = 4 + i % 5;
        const int T = 1 + i % 3;
        Scenario s = random_scenario(buses, T, seed);

        opf::BuiltProgram bp = opf::build_central(s);
        conic::ConicSolution raw = conic::solve(bp.program, conic::options_from_env());
        if (!raw.ok()) return {false, fmt::format("seed {} central {}", seed, conic::to_string(raw.status))};
        opf::OpfSolution sol = opf::extract(s, bp, raw);
        kkt = std::max(kkt, conic::kkt_residuals(bp.program, raw).max());
        ident = std::max(ident, opf::check_dlmp_ancestor_identity(s, sol).max_residual);
        ++solves;

        Profile x = sol.vars.net_profile();
        opf::BuiltProgram dp = opf::build_dso(s, x);
        conic::ConicSolution draw = conic::solve(dp.program, conic::options_from_env());
        if (!draw.ok()) return {false, fmt::format("seed {} network {}", seed, conic::to_string(draw.status))};
        kkt = std::max(kkt, conic::kkt_residuals(dp.program, draw).max());
        opf::OpfSolution dso = opf::extract(s, dp, draw, &x);
        subgrad = std::max(subgrad, opf::check_subgradient(s, x, dso.dlmps).max_rel_error_smooth);

        RandomNetworkOptions zo;
        zo.zero_impedance = true;
        Scenario z = random_scenario(buses, T, seed, zo);
        opf::OpfSolution zs = opf::solve_central(z);
        if (!zs.ok()) return {false, fmt::format("seed {} zero-impedance {}", seed, conic::to_string(zs.status))};
        const int root = z.network.root();
        for (int n = 0; n < z.network.size(); ++n)
            for (int t = 0; t < T; ++t)
                zero_imp = std::max({zero_imp, std::abs(zs.dlmps.lp(n, t) - zs.dlmps.lp(root, t)),
                                     std::abs(zs.dlmps.lq(n, t) - zs.dlmps.lq(root, t))});

        coord::AlgoConfig cfg;
        cfg.algo = coord::Algo::admm;
        cfg.max_iter = 2000;
        cfg.tol_primal = 1e-6;
        cfg.tol_obj = 1e-8;
        cfg.keep_transcript = false;
        coord::CoordinationResult r = coord::run(s, cfg);
        fixed = std::max(fixed, coord::check_fixed_point(s, r.x0, r.x_a, r.lambda).max());
    }
    double elapsed = seconds_since(t0);
    bool ok = ident <= 1e-5 && zero_imp <= 1e-6 && subgrad <= 1e-2 && kkt <= 1e-6 && fixed <= 1e-4 && elapsed <= 300;
    return {ok, fmt::format("identity {:.1e}, zero-impedance {:.1e}, subgradient {:.1e}, KKT {:.1e}, fixed point {:.1e} "
                            "over 20 seeds, {:.0f}s",
                            ident, zero_imp, subgrad, kkt, fixed, elapsed)};
}

Outcome mechanisms() {
    Scenario s = fixture_15bus(7);
    mech::VcgReport v = mech::vcg_payments(s);
    bool count = v.solve_count == static_cast<int>(s.aggregators.size()) + 1;

    opf::OpfSolution c = opf::solve_central(s);
    if (!c.ok()) return {false, "central solve failed"};
    Profile x = c.vars.net_profile();
    mech::Settlement st = mech::settle(s, x, c.dlmps, x);
    double direct = 0.0;
    for (int n = 0; n < s.network.size(); ++n) {
        if (n == s.network.root()) continue;
        for (int t = 0; t < s.horizon; ++t) direct += c.dlmps.lp(n, t) * x.p(n, t) + c.dlmps.lq(n, t) * x.q(n, t);
    }
    double budget_err = std::abs(st.total_payment() - direct);
    bool budget = budget_err <= 1e-12 * std::max(1.0, std::abs(direct));
    bool no_penalty = st.total_penalty() == 0.0;

    Scenario f = fixture_15bus(0);
    Profile loads = fixture_15bus_table2_profiles();
    opf::OpfSolution dso = opf::solve_dso(f, loads);
    if (!dso.ok()) return {false, "reference-profile network solve failed"};
    mech::SettleOptions so;
    so.tau_pen = 10.0 * std::abs(dso.objective);
    mech::Settlement fst = mech::settle(f, loads, dso.dlmps, loads, so);
    auto rows = mech::compare(fst, mech::vcg_payments_fixed(f, loads));
    double col_err = 0.0;
    std::string dl, vc;
    for (std::size_t a = 0; a < rows.size() && a < 5; ++a) {
        col_err = std::max(col_err, std::abs(rows[a].dlmp_payment - kRefDlmpPayment[a]));
        dl += fmt::format("{}{:.3f}", a ? "," : "", rows[a].dlmp_payment);
        vc += fmt::format("{}{:.3f}", a ? "," : "", rows[a].vcg_payment);
    }
    bool five = rows.size() == 5;
    bool ok = count && budget && no_penalty && five && col_err <= 2e-2;
    return {ok, fmt::format("solves {} ({}), penalties {}, budget err {:.1e}, rows {}, DLMP column ({}) err {:.3f} "
                            "(<=2e-2), VCG column ({}) reported",
                            v.solve_count, s.aggregators.size() + 1, st.total_penalty(), budget_err, rows.size(), dl,
                            col_err, vc)};
}

}  // namespace

int main() {
    report(1, "reference-profile re-solve", reference_resolve);
    report(2, "period costs", period_costs);
    report(3, "relaxation exactness", exactness);
    report(4, "structural price facts", structural_prices);
    report(5, "under-reporting counterexample", example1);
    report(6, "ADMM matches central optimum", admm_equivalence);
    report(7, "PDGS per-round feasibility", pdgs_feasibility);
    report(8, "PDGS slow convergence", pdgs_slow);
    report(9, "property suites", properties);
    report(10, "mechanism suite", mechanisms);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
