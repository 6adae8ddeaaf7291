#include <doctest.h>

#include <cmath>

#include "dlmp/conic/kkt.hpp"
#include "dlmp/error.hpp"
#include "dlmp/fixtures.hpp"
#include "dlmp/opf/checks.hpp"

using namespace dlmp;
using namespace dlmp::opf;

namespace {

void check_root_price(const Scenario& s, const OpfSolution& sol, double tol) {
    const int root = s.network.root();
    for (int t = 0; t < s.horizon; ++t) {
        double supply = -sol.vars.p(root, t);
        double marginal = s.cost.alpha[t] + 2 * s.cost.beta[t] * supply;
        if (supply > 1e-6)
            CHECK(sol.dlmps.lp(root, t) == doctest::Approx(marginal).epsilon(tol));
        else  // no supply: the sign bound on the root injection absorbs the difference
            CHECK(sol.dlmps.lp(root, t) <= marginal + tol);
        CHECK(std::abs(sol.dlmps.lq(root, t)) < tol);
    }
}

}  // namespace

TEST_CASE("toy central problem is exact and prices follow the ancestor identity") {
    Scenario s = fixture_toy();
    OpfSolution sol = solve_central(s);
    REQUIRE(sol.ok());
    CHECK(check_exactness(s, sol.vars).is_exact);
    CHECK(check_dlmp_ancestor_identity(s, sol).max_residual < 1e-5);
    CHECK(conic::kkt_residuals(build_central(s).program, sol.raw).max() < 1e-6);
    check_root_price(s, sol, 1e-5);
    CHECK(sol.vars.pc.row(1).sum() >= 1.0 - 1e-7);
}

TEST_CASE("15-bus network problem at the reference profiles") {
    Scenario s = fixture_15bus(0);
    Profile loads = fixture_15bus_table2_profiles();
    OpfSolution sol = solve_dso(s, loads);
    REQUIRE(sol.ok());
    CHECK(sol.objective == doctest::Approx(2.17547).epsilon(1e-4));
    CHECK(check_exactness(s, sol.vars).is_exact);
    CHECK(check_dlmp_ancestor_identity(s, sol).max_residual < 1e-5);
    check_root_price(s, sol, 1e-5);
    CHECK(primal_residual(s, sol.vars, loads) < 1e-6);
}

TEST_CASE("prices are subgradients of the network cost") {
    Scenario s = fixture_toy();
    OpfSolution central = solve_central(s);
    REQUIRE(central.ok());
    Profile loads = central.vars.net_profile();
    OpfSolution sol = solve_dso(s, loads);
    REQUIRE(sol.ok());
    SubgradientReport rep = check_subgradient(s, loads, sol.dlmps);
    CHECK(rep.max_rel_error_smooth < 1e-3);
    CHECK(rep.all_bracketed);
    for (const auto& e : rep.entries) CHECK_FALSE(e.skipped);
}

TEST_CASE("zero impedance gives one price per period") {
    RandomNetworkOptions opt;
    opt.zero_impedance = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Scenario s = random_scenario(6, 2, seed, opt);
        OpfSolution sol = solve_central(s);
        REQUIRE(sol.ok());
        for (int t = 0; t < s.horizon; ++t)
            for (int n = 0; n < s.network.size(); ++n) {
                CHECK(sol.dlmps.lp(n, t) == doctest::Approx(sol.dlmps.lp(s.network.root(), t)).epsilon(1e-5));
                CHECK(sol.dlmps.lq(n, t) == doctest::Approx(sol.dlmps.lq(s.network.root(), t)).epsilon(1e-5));
            }
    }
}

TEST_CASE("random feeders satisfy exactness and the ancestor identity") {
    for (std::uint64_t seed = 11; seed <= 20; ++seed) {
        Scenario s = random_scenario(4 + static_cast<int>(seed % 5), 2, seed);
        OpfSolution sol = solve_central(s);
        REQUIRE(sol.ok());
        CHECK(check_dlmp_ancestor_identity(s, sol).max_residual < 1e-5);
        check_root_price(s, sol, 1e-5);
    }
}

TEST_CASE("truncated problem matches the plain one when loads are feasible") {
    Scenario s = fixture_15bus(0);
    Profile loads = fixture_15bus_table2_profiles();
    OpfSolution plain = solve_dso(s, loads);
    OpfSolution trunc = solve_dso_truncated(s, loads, 4.0);
    REQUIRE(plain.ok());
    REQUIRE(trunc.ok());
    CHECK(trunc.objective == doctest::Approx(plain.objective).epsilon(1e-6));
    CHECK((trunc.dlmps.lp - plain.dlmps.lp).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("overloaded line makes the network problem infeasible") {
    Scenario s = fixture_toy();
    Profile loads = Profile::zeros(2, 2);
    loads.p(1, 0) = 50.0;  // beyond the 5.0 line rating
    loads.p(1, 1) = 1.0;
    OpfSolution sol = solve_dso(s, loads);
    CHECK(sol.status == conic::Status::infeasible);
    OpfSolution trunc = solve_dso_truncated(s, loads, 4.0);
    CHECK(trunc.ok());
}

TEST_CASE("sufficient conditions on the toy and the 15-bus feeder") {
    Scenario toy = fixture_toy();
    OpfSolution sol = solve_central(toy);
    REQUIRE(sol.ok());
    SufficientConditionsReport rep = check_sufficient_conditions(toy, sol);
    CHECK(rep.increasing_in_supply);
    CHECK_FALSE(rep.no_shunts);  // the toy line carries shunt susceptance
    CHECK_FALSE(rep.supply_conditions_hold);

    Scenario s = fixture_15bus(0);
    OpfSolution dso = solve_dso(s, fixture_15bus_table2_profiles());
    REQUIRE(dso.ok());
    SufficientConditionsReport r15 = check_sufficient_conditions(s, dso);
    CHECK(r15.increasing_in_supply);
    CHECK(r15.voltage_upper_slack);
    // v_hat follows the linearized drop from the root.
    const Network& net = s.network;
    for (int n = 0; n < net.size(); ++n) {
        if (n == net.root()) continue;
        const Bus& b = net.bus(n);
        double expect = r15.v_hat(b.ancestor, 0) + 2 * (b.r * r15.f_hat(n, 0) + b.x * r15.g_hat(n, 0));
        CHECK(r15.v_hat(n, 0) == doctest::Approx(expect));
    }
}
