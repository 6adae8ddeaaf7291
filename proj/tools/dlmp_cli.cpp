#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dlmp/coordination.hpp"
#include "dlmp/error.hpp"
#include "dlmp/fixtures.hpp"
#include "dlmp/mechanism.hpp"
#include "dlmp/opf/checks.hpp"
#include "dlmp/report.hpp"

using namespace dlmp;

namespace {

// Exit codes. Stable; documented in the README.
enum Exit : int {
    kOk = 0,
    kGeneric = 1,
    kSchema = 2,
    kInfeasible = 3,
    kInexact = 4,
    kNumerical = 5,
    kMaxIter = 6,
    kDiverged = 7,
};

int exit_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::io: return kGeneric;
        case ErrorKind::infeasible: return kInfeasible;
        case ErrorKind::solver_failure: return kNumerical;
        default: return kSchema;
    }
}

int exit_for(conic::Status s) {
    switch (s) {
        case conic::Status::optimal: return kOk;
        case conic::Status::infeasible:
        case conic::Status::unbounded: return kInfeasible;
        default: return kNumerical;
    }
}

struct Input {
    std::string scenario_path;
    std::string fixture = "15bus";
    std::uint64_t seed = 7;
    bool literal_cost = false;
    std::string profiles;  // "table2" or a profile file
    std::string out_dir;
};

void add_input_options(CLI::App* cmd, Input& in, bool with_profiles) {
    cmd->add_option("--scenario", in.scenario_path, "scenario JSON file");
    cmd->add_option("--fixture", in.fixture, "built-in scenario when no file is given")
        ->check(CLI::IsMember({"toy", "15bus"}));
    cmd->add_option("--seed", in.seed, "seed for the 15-bus load bounds");
    cmd->add_flag("--literal-cost", in.literal_cost, "toy: square the first period's supply in the second period");
    if (with_profiles)
        cmd->add_option("--profiles", in.profiles, "fix net loads: 'table2' or a profile JSON file");
    cmd->add_option("--out-dir", in.out_dir, "directory for the report and data files");
}

struct Loaded {
    Scenario s;
    nlohmann::json digest;
};

Loaded load_input(const Input& in) {
    Loaded l;
    if (!in.scenario_path.empty()) {
        l.s = load_scenario(in.scenario_path);
        l.digest = {{"source", "file"}, {"path", in.scenario_path}, {"file_digest", report::file_digest(in.scenario_path)}};
    } else if (in.fixture == "toy") {
        l.s = fixture_toy(in.literal_cost);
        l.digest = {{"source", "fixture"}, {"fixture", "toy"}, {"literal_cost", in.literal_cost}};
    } else {
        l.s = fixture_15bus(in.seed);
        l.digest = {{"source", "fixture"}, {"fixture", "15bus"}};
    }
    if (l.s.seed) l.digest["seed"] = *l.s.seed;
    l.digest["scenario_digest"] = report::text_digest(scenario_to_json(l.s).dump());
    return l;
}

std::optional<Profile> load_profiles(const Input& in, const Scenario& s, nlohmann::json& digest) {
    if (in.profiles.empty()) return std::nullopt;
    Profile p;
    if (in.profiles == "table2") {
        p = fixture_15bus_table2_profiles();
        digest["profiles"] = "table2";
    } else {
        p = profile_from_json(read_json_file(in.profiles));
        digest["profiles"] = {{"path", in.profiles}, {"file_digest", report::file_digest(in.profiles)}};
    }
    if (p.p.rows() != s.network.size() || p.p.cols() != s.horizon)
        throw Error(ErrorKind::schema, fmt::format("profile is {}x{}, scenario needs {}x{}", p.p.rows(), p.p.cols(),
                                                   s.network.size(), s.horizon));
    return p;
}

void write_text(const std::string& text, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", path));
    out << text;
}

std::string out_path(const Input& in, const std::string& name) {
    return (std::filesystem::path(in.out_dir) / name).string();
}

void prepare_out_dir(const Input& in) {
    if (in.out_dir.empty()) return;
    std::error_code ec;
    std::filesystem::create_directories(in.out_dir, ec);
    if (ec) throw Error(ErrorKind::io, fmt::format("cannot create {}: {}", in.out_dir, ec.message()));
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_solve_central(const Input& in) {
    auto t0 = std::chrono::steady_clock::now();
    Loaded l = load_input(in);
    prepare_out_dir(in);
    std::optional<Profile> fixed = load_profiles(in, l.s, l.digest);
    const conic::SolveOptions opt = conic::options_from_env();
    opf::OpfSolution sol = fixed ? opf::solve_dso(l.s, *fixed, opt) : opf::solve_central(l.s, opt);

    nlohmann::json rep = {{"command", "solve-central"},
                          {"scenario", l.digest},
                          {"config", {{"solver_tol", opt.tol}, {"fixed_profiles", fixed.has_value()}}},
                          {"solver", report::solver_stats(sol.raw)}};
    int code = exit_for(sol.status);
    if (sol.ok()) {
        opf::ExactnessReport ex = opf::check_exactness(l.s, sol.vars);
        rep["opf"] = report::opf_to_json(l.s, sol);
        rep["exactness"] = report::exactness_to_json(ex);
        std::string table = report::opf_table(l.s, sol);
        std::cout << table;
        std::cout << fmt::format("objective {:.6f}\n", sol.objective);
        for (int t = 0; t < l.s.horizon; ++t)
            std::cout << fmt::format("period {} cost {:.4f}\n", t, rep["opf"]["period_costs"][t].get<double>());
        std::cout << fmt::format("max cone gap {:.3e} ({})\n", ex.max_gap, ex.is_exact ? "exact" : "inexact");
        if (!in.out_dir.empty()) write_text(table, out_path(in, "opf_table.txt"));
        if (!ex.is_exact) code = kInexact;
    } else {
        std::cerr << fmt::format("solve failed: {}\n", conic::to_string(sol.status));
    }
    rep["timing"] = {{"wall_ms", ms_since(t0)}, {"solve_ms", sol.raw.info.solve_ms}};
    if (!in.out_dir.empty()) write_json_file(rep, out_path(in, "report.json"));
    return code;
}

struct CoordArgs {
    std::string algo = "admm";
    coord::AlgoConfig cfg;
    bool no_early_stop = false;
    bool no_transcript = false;
};

int cmd_coordinate(const Input& in, CoordArgs a) {
    auto t0 = std::chrono::steady_clock::now();
    Loaded l = load_input(in);
    prepare_out_dir(in);
    a.cfg.algo = coord::algo_from_string(a.algo);
    a.cfg.stop_early = !a.no_early_stop;
    a.cfg.keep_transcript = !a.no_transcript && !in.out_dir.empty();
    a.cfg.solver = conic::options_from_env();

    opf::OpfSolution central = opf::solve_central(l.s, a.cfg.solver);
    if (!central.ok()) {
        std::cerr << fmt::format("central reference solve failed: {}\n", conic::to_string(central.status));
        return exit_for(central.status);
    }
    coord::CoordinationResult r = coord::run(l.s, a.cfg);

    nlohmann::json rep = {{"command", "coordinate"},
                          {"scenario", l.digest},
                          {"config",
                           {{"algo", a.algo},
                            {"rho", a.cfg.rho},
                            {"alpha0", a.cfg.alpha0},
                            {"K", a.cfg.K},
                            {"max_iter", a.cfg.max_iter},
                            {"tol_primal", a.cfg.tol_primal},
                            {"tol_obj", a.cfg.tol_obj},
                            {"stop_early", a.cfg.stop_early},
                            {"solver_tol", a.cfg.solver.tol}}},
                          {"coordination", report::coordination_to_json(r, central.objective)}};
    double lam_diff = (r.lambda.lp - central.dlmps.lp).cwiseAbs().maxCoeff();
    rep["coordination"]["max_price_diff_to_central"] = lam_diff;
    double la_ms = 0, dso_ms = 0;
    for (const auto& lg : r.logs) la_ms += lg.la_ms, dso_ms += lg.dso_ms;
    rep["timing"] = {{"wall_ms", ms_since(t0)}, {"la_ms", la_ms}, {"dso_ms", dso_ms}};

    std::cout << fmt::format("{} {} after {} rounds\n", a.algo, coord::to_string(r.status), r.logs.size());
    std::cout << fmt::format("primal residual {:.3e}\n", r.final_residual());
    std::cout << fmt::format("objective {:.6f} (central {:.6f}, gap {:.3e})\n", r.final_objective(), central.objective,
                             std::abs(r.final_objective() - central.objective));
    std::cout << fmt::format("max active price difference to central {:.3e}\n", lam_diff);

    if (!in.out_dir.empty()) {
        coord::write_curves_csv(r, out_path(in, "curves.csv"));
        if (a.cfg.keep_transcript) coord::write_transcript_csv(r, out_path(in, "transcript.csv"));
        write_json_file(rep, out_path(in, "report.json"));
    }
    switch (r.status) {
        case coord::RunStatus::converged: return kOk;
        case coord::RunStatus::max_iter: return kMaxIter;
        case coord::RunStatus::diverged: return kDiverged;
        default: return kNumerical;
    }
}

int cmd_compare(const Input& in, bool example1) {
    auto t0 = std::chrono::steady_clock::now();
    prepare_out_dir(in);
    const conic::SolveOptions opt = conic::options_from_env();
    if (example1) {
        mech::Example1Result r = mech::reproduce_example1(in.literal_cost, opt);
        nlohmann::json rep = {{"command", "compare-mechanisms"},
                              {"config", {{"example1", true}, {"literal_cost", in.literal_cost}, {"solver_tol", opt.tol}}},
                              {"example1", report::example1_to_json(r)},
                              {"timing", {{"wall_ms", ms_since(t0)}}}};
        for (const auto* side : {&r.truthful, &r.cheated})
            std::cout << fmt::format("announced p_max ({:.2f}, {:.2f}): utility {:.4f} payment {:.4f} total {:.4f}\n",
                                     side->p_max[0], side->p_max[1], side->phi_signed, side->payment, side->total);
        std::cout << (r.cheating_pays() ? "under-reporting lowers the total cost\n"
                                        : "under-reporting does not lower the total cost\n");
        if (!in.out_dir.empty()) write_json_file(rep, out_path(in, "report.json"));
        return kOk;
    }

    Loaded l = load_input(in);
    std::optional<Profile> fixed = load_profiles(in, l.s, l.digest);
    mech::SettleOptions so;
    so.solver = opt;
    mech::Settlement st;
    mech::VcgReport vcg;
    if (fixed) {
        opf::OpfSolution dso = opf::solve_dso(l.s, *fixed, opt);
        if (!dso.ok()) throw Error(ErrorKind::infeasible, "network problem at the given profiles has no optimum");
        so.tau_pen = 10.0 * std::abs(dso.objective + opf::total_la_cost(l.s, *fixed));
        st = mech::settle(l.s, *fixed, dso.dlmps, *fixed, so);
        vcg = mech::vcg_payments_fixed(l.s, *fixed, opt);
    } else {
        opf::OpfSolution c = opf::solve_central(l.s, opt);
        if (!c.ok()) throw Error(ErrorKind::infeasible, "central problem has no optimum");
        so.tau_pen = 10.0 * std::abs(c.objective);
        Profile x = c.vars.net_profile();
        st = mech::settle(l.s, x, c.dlmps, x, so);
        vcg = mech::vcg_payments(l.s, opt);
    }
    auto rows = mech::compare(st, vcg);
    std::string table = mech::comparison_table(rows);
    std::cout << table;
    for (const auto& r : vcg.rows)
        if (!r.counterfactual_feasible) std::cout << fmt::format("aggregator {}: counterfactual-infeasible\n", r.id);
    nlohmann::json rep = {{"command", "compare-mechanisms"},
                          {"scenario", l.digest},
                          {"config", {{"fixed_profiles", fixed.has_value()}, {"solver_tol", opt.tol}}},
                          {"comparison", mech::comparison_to_json(rows)},
                          {"settlement", report::settlement_to_json(st)},
                          {"vcg", report::vcg_to_json(vcg)},
                          {"timing", {{"wall_ms", ms_since(t0)}}}};
    if (!in.out_dir.empty()) {
        write_text(table, out_path(in, "comparison.txt"));
        write_json_file(rep, out_path(in, "report.json"));
    }
    return kOk;
}

struct GenArgs {
    std::string fixture = "15bus";
    std::uint64_t seed = 7;
    int random_buses = 0;
    int horizon = 2;
    std::string out;
};

int cmd_gen(const GenArgs& g) {
    Scenario s;
    if (g.random_buses > 0)
        s = random_scenario(g.random_buses, g.horizon, g.seed);
    else if (g.fixture == "toy")
        s = fixture_toy();
    else
        s = fixture_15bus(g.seed);
    nlohmann::json j = scenario_to_json(s);
    if (g.out.empty())
        std::cout << j.dump(2) << '\n';
    else
        write_json_file(j, g.out);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branch-flow OPF with distribution locational marginal prices"};
    app.require_subcommand(1);

    Input in;
    auto* solve = app.add_subcommand("solve-central", "solve the global relaxation, or the network problem at fixed loads");
    add_input_options(solve, in, true);

    CoordArgs ca;
    auto* co = app.add_subcommand("coordinate", "run a decentralized coordination algorithm");
    add_input_options(co, in, false);
    co->add_option("--algo", ca.algo, "dual-ascent, admm or pdgs")->check(CLI::IsMember({"dual-ascent", "admm", "pdgs"}));
    co->add_option("--rho", ca.cfg.rho, "ADMM penalty");
    co->add_option("--alpha0", ca.cfg.alpha0, "dual ascent initial step");
    co->add_option("--K", ca.cfg.K, "PDGS truncation bound");
    co->add_option("--max-iter", ca.cfg.max_iter);
    co->add_option("--tol-primal", ca.cfg.tol_primal);
    co->add_option("--tol-obj", ca.cfg.tol_obj);
    co->add_flag("--no-early-stop", ca.no_early_stop, "run all iterations");
    co->add_flag("--no-transcript", ca.no_transcript, "skip the message log");

    bool example1 = false;
    auto* cmp = app.add_subcommand("compare-mechanisms", "DLMP settlement against VCG payments");
    add_input_options(cmp, in, true);
    cmp->add_flag("--example1", example1, "the two-bus under-reporting counterexample");

    GenArgs ga;
    auto* gen = app.add_subcommand("gen-scenario", "write a scenario file");
    gen->add_option("--fixture", ga.fixture)->check(CLI::IsMember({"toy", "15bus"}));
    gen->add_option("--seed", ga.seed);
    gen->add_option("--random", ga.random_buses, "random feeder with this many buses");
    gen->add_option("--horizon", ga.horizon, "periods for --random");
    gen->add_option("--out", ga.out, "output path, stdout when absent");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kGeneric;
    }

    try {
        if (solve->parsed()) return cmd_solve_central(in);
        if (co->parsed()) return cmd_coordinate(in, ca);
        if (cmp->parsed()) return cmd_compare(in, example1);
        if (gen->parsed()) return cmd_gen(ga);
    } catch (const Error& e) {
        std::cerr << fmt::format("error ({}): {}\n", to_string(e.kind()), e.what());
        return exit_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kGeneric;
    }
    return kGeneric;
}
