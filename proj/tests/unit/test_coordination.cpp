#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "dlmp/coordination.hpp"
#include "dlmp/error.hpp"
#include "dlmp/fixtures.hpp"

using namespace dlmp;
using namespace dlmp::coord;

namespace {

DlmpSet flat_prices(const Scenario& s, double p, double q) {
    return {Matrix::Constant(s.network.size(), s.horizon, p), Matrix::Constant(s.network.size(), s.horizon, q)};
}

}  // namespace

TEST_CASE("best response shifts energy to the cheap period") {
    Scenario s = fixture_15bus(3);
    const int agg = 3;  // buses 9 and 10, no DER
    DlmpSet prices = flat_prices(s, 0.0, 0.0);
    prices.lp.col(0).setConstant(10.0);
    prices.lp.col(1).setConstant(1.0);
    Profile x = la_best_response(s, agg, prices);
    for (int n : s.aggregators[agg].buses) {
        const LoadSpec* l = s.load_at(n);
        // Brute-force optimum of 10 x0 + x1 over the box with x0 + x1 >= E.
        double best = INFINITY, bx0 = 0, bx1 = 0;
        const int grid = 2000;
        for (int i = 0; i <= grid; ++i) {
            double x0 = l->p_min[0] + (l->p_max[0] - l->p_min[0]) * i / grid;
            double x1 = std::max(l->p_min[1], l->energy - x0);
            if (x1 > l->p_max[1] + 1e-12) continue;
            double c = 10 * x0 + x1;
            if (c < best) best = c, bx0 = x0, bx1 = x1;
        }
        CHECK(x.p(n, 0) == doctest::Approx(bx0).epsilon(1e-3));
        CHECK(x.p(n, 1) == doctest::Approx(bx1).epsilon(1e-3));
        CHECK(x.q(n, 0) == doctest::Approx(l->tau * x.p(n, 0)).epsilon(1e-6));
    }
    // Other aggregators' rows stay empty.
    CHECK(x.p.row(1).norm() == 0.0);
}

TEST_CASE("best response reports an empty feasible set") {
    Scenario s = fixture_toy();
    s.loads[0].energy = 10.0;  // beyond the sum of upper bounds
    DlmpSet prices = flat_prices(s, 1.0, 0.0);
    try {
        la_best_response(s, 0, prices);
        FAIL("expected infeasible");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::infeasible);
    }
}

TEST_CASE("coupling residual of an empty network state is the load norm") {
    Scenario s = fixture_toy();
    Profile x = Profile::zeros(2, 2);
    x.p(1, 0) = 3.0;
    x.q(1, 1) = 4.0;
    OpfVariables x0 = OpfVariables::zeros(2, 2);
    CHECK(coupling_residual(s, x0, x) == doctest::Approx(5.0));
}

TEST_CASE("ADMM on the toy reaches the central optimum and prices") {
    Scenario s = fixture_toy();
    OpfSolution central = opf::solve_central(s);
    REQUIRE(central.ok());
    AlgoConfig cfg;
    cfg.algo = Algo::admm;
    cfg.rho = 5.0;
    cfg.max_iter = 200;
    CoordinationResult r = run(s, cfg);
    CHECK(r.converged());
    CHECK(r.final_residual() <= 1e-4);
    CHECK(std::abs(r.final_objective() - central.objective) <= 1e-4);
    CHECK((r.lambda.lp.row(1) - central.dlmps.lp.row(1)).cwiseAbs().maxCoeff() < 2e-2);
    CHECK(check_fixed_point(s, r.x0, r.x_a, r.lambda).max() < 1e-4);
    CHECK(transcript_is_local(s, r.transcript));
    for (const IterationLog& l : r.logs) CHECK(l.primal_residual >= 0.0);
}

TEST_CASE("ADMM transcript carries base profiles and is deterministic") {
    Scenario s = fixture_15bus(5);
    AlgoConfig cfg;
    cfg.max_iter = 5;
    CoordinationResult a = run_admm(s, cfg);
    CoordinationResult b = run_admm(s, cfg);
    REQUIRE(a.transcript.size() == b.transcript.size());
    // Per round and aggregator: price signal, base profile, profile report.
    CHECK(a.transcript.size() == 5 * 3 * s.aggregators.size());
    for (std::size_t i = 0; i < a.transcript.size(); ++i) {
        CHECK(a.transcript[i].kind == b.transcript[i].kind);
        CHECK(a.transcript[i].receiver == b.transcript[i].receiver);
        for (std::size_t j = 0; j < a.transcript[i].entries.size(); ++j)
            CHECK(a.transcript[i].entries[j].p == b.transcript[i].entries[j].p);
    }
    CHECK(transcript_is_local(s, a.transcript));
    Message leak = a.transcript.front();
    leak.entries.push_back({0, 0, 1.0, 0.0});
    std::vector<Message> bad = {leak};
    CHECK_FALSE(transcript_is_local(s, bad));
}

TEST_CASE("dual ascent on the toy approaches the central cost") {
    Scenario s = fixture_toy();
    OpfSolution central = opf::solve_central(s);
    AlgoConfig cfg;
    cfg.algo = Algo::dual_ascent;
    cfg.max_iter = 2000;
    CoordinationResult r = run(s, cfg);
    CHECK(std::abs(r.final_objective() - central.objective) <= 1e-2);
    CHECK(r.status != RunStatus::diverged);
}

TEST_CASE("dual ascent with zero step keeps prices fixed") {
    Scenario s = fixture_toy();
    AlgoConfig cfg;
    cfg.algo = Algo::dual_ascent;
    cfg.alpha0 = 0.0;
    cfg.max_iter = 10;
    cfg.initial_prices = flat_prices(s, 3.0, 0.0);
    CoordinationResult r = run(s, cfg);
    for (const IterationLog& l : r.logs) CHECK(l.lambda.lp(1, 0) == 3.0);
    CHECK(r.logs.back().primal_residual == doctest::Approx(r.logs.front().primal_residual));
}

TEST_CASE("PDGS rounds are primal feasible whenever the network step is") {
    Scenario s = fixture_toy();
    AlgoConfig cfg;
    cfg.algo = Algo::pdgs;
    cfg.max_iter = 60;
    cfg.stop_early = false;
    CoordinationResult r = run(s, cfg);
    REQUIRE(r.logs.size() == 60);
    // Round 0 takes the first best response as the average.
    Profile first = la_best_response(s, 0, flat_prices(s, 0.0, 0.0));
    CHECK(r.logs[0].x_a.p(1, 0) == doctest::Approx(first.p(1, 0)).epsilon(1e-9));
    for (const IterationLog& l : r.logs)
        if (l.dso_feasible) CHECK(l.primal_residual <= 1e-6);
}

TEST_CASE("PDGS falls back to the truncated network problem") {
    Scenario s = fixture_toy();
    s.network = Network([] {
        auto b = fixture_toy().network.buses();
        b[1].s_max = 0.6;  // the LA's first response overloads the line
        return b;
    }(), fixture_toy().network.v0());
    AlgoConfig cfg;
    cfg.algo = Algo::pdgs;
    cfg.max_iter = 3;
    cfg.stop_early = false;
    cfg.initial_prices = flat_prices(s, -50.0, 0.0);
    CoordinationResult r = run(s, cfg);
    REQUIRE_FALSE(r.logs.empty());
    CHECK_FALSE(r.logs[0].dso_feasible);
    CHECK(r.logs[0].primal_residual > 1e-3);
}

TEST_CASE("curves and transcript serialize") {
    Scenario s = fixture_toy();
    AlgoConfig cfg;
    cfg.max_iter = 3;
    CoordinationResult r = run_admm(s, cfg);
    const std::string curves = "/tmp/dlmp_test_curves.csv", log = "/tmp/dlmp_test_transcript.csv";
    write_curves_csv(r, curves);
    write_transcript_csv(r, log);
    std::ifstream in(curves);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("round,primal_residual,objective", 0) == 0);
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 3);
    std::remove(curves.c_str());
    std::remove(log.c_str());
}

TEST_CASE("algorithm names round-trip") {
    for (Algo a : {Algo::dual_ascent, Algo::admm, Algo::pdgs}) CHECK(algo_from_string(to_string(a)) == a);
    CHECK_THROWS_AS(algo_from_string("gauss"), Error);
}
