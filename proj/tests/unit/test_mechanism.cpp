#include <doctest.h>

#include <cmath>

#include "dlmp/coordination.hpp"
#include "dlmp/error.hpp"
#include "dlmp/fixtures.hpp"
#include "dlmp/mechanism.hpp"

using namespace dlmp;
using namespace dlmp::mech;

namespace {

double budget(const Scenario& s, const DlmpSet& l, const Profile& x) {
    double sum = 0.0;
    for (int n = 0; n < s.network.size(); ++n) {
        if (n == s.network.root()) continue;
        for (int t = 0; t < s.horizon; ++t) sum += l.lp(n, t) * x.p(n, t) + l.lq(n, t) * x.q(n, t);
    }
    return sum;
}

}  // namespace

TEST_CASE("truthful settlement pays agreed prices without penalties") {
    Scenario s = fixture_15bus(2);
    OpfSolution c = opf::solve_central(s);
    REQUIRE(c.ok());
    Profile x = c.vars.net_profile();
    Settlement st = settle(s, x, c.dlmps, x);
    CHECK_FALSE(st.recomputed);
    CHECK(st.total_penalty() == 0.0);
    CHECK(st.tau_pen == doctest::Approx(10 * std::abs(c.objective)));
    CHECK(st.total_payment() == doctest::Approx(budget(s, c.dlmps, x)).epsilon(1e-12));
    CHECK(st.rows.size() == s.aggregators.size());
}

TEST_CASE("a deviating aggregator is flagged and prices are re-solved") {
    Scenario s = fixture_15bus(2);
    OpfSolution c = opf::solve_central(s);
    Profile agreed = c.vars.net_profile();
    Profile realized = agreed;
    realized.p(9, 0) += 0.1;  // aggregator 4
    SettleOptions opt;
    opt.tau_pen = 50.0;
    Settlement st = settle(s, agreed, c.dlmps, realized, opt);
    CHECK(st.recomputed);
    for (const auto& row : st.rows) {
        CHECK(row.deviated == (row.id == 4));
        CHECK(row.penalty == (row.id == 4 ? 50.0 : 0.0));
    }
    OpfSolution re = opf::solve_dso(s, realized);
    CHECK((st.lambda.lp - re.dlmps.lp).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(st.total_payment() == doctest::Approx(budget(s, st.lambda, realized)).epsilon(1e-12));
}

TEST_CASE("an infeasible realized profile settles on the truncated problem") {
    Scenario s = fixture_toy();
    OpfSolution c = opf::solve_central(s);
    Profile agreed = c.vars.net_profile();
    Profile realized = agreed;
    realized.p(1, 0) = 50.0;
    SettleOptions opt;
    opt.tau_pen = 1.0;
    Settlement st = settle(s, agreed, c.dlmps, realized, opt);
    CHECK(st.truncated);
    CHECK(st.rows[0].deviated);
}

TEST_CASE("aggregator without load pays nothing") {
    Scenario s = fixture_toy();
    DlmpSet l{Eigen::MatrixXd::Constant(2, 2, 3.0), Eigen::MatrixXd::Constant(2, 2, 1.0)};
    Profile zero = Profile::zeros(2, 2);
    CHECK(dlmp_payment(s, 0, l, zero).payment == 0.0);
}

TEST_CASE("single-aggregator VCG payment is the network cost") {
    Scenario s = fixture_toy();
    VcgReport v = vcg_payments(s);
    CHECK(v.solve_count == 2);
    REQUIRE(v.rows.size() == 1);
    // Without the aggregator the network only serves its own shunt, at ~zero cost.
    CHECK(v.rows[0].clarke_tax == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(v.rows[0].vcg_payment == doctest::Approx(v.dso_cost_full).epsilon(1e-6));
}

TEST_CASE("VCG solve count and payment identity on the 15-bus feeder") {
    Scenario s = fixture_15bus(4);
    VcgReport v = vcg_payments(s);
    CHECK(v.solve_count == static_cast<int>(s.aggregators.size()) + 1);
    double la_total = 0.0;
    for (double c : v.la_cost_full) la_total += c;
    for (std::size_t a = 0; a < v.rows.size(); ++a) {
        const VcgRow& r = v.rows[a];
        REQUIRE(r.counterfactual_feasible);
        CHECK(r.vcg_payment == r.others_cost_full - r.clarke_tax);
        CHECK(r.others_cost_full == doctest::Approx(v.dso_cost_full + la_total - v.la_cost_full[a]));
    }
}

TEST_CASE("negligible aggregator has near-zero VCG payment") {
    Scenario s = fixture_15bus(4);
    // Aggregator 4 owns buses 9 and 10; shrink them to a token load.
    for (LoadSpec& l : s.loads) {
        if (l.bus != 9 && l.bus != 10) continue;
        for (double& v : l.p_min) v = 0.0;
        for (double& v : l.p_max) v = 1e-6;
        l.energy = 0.0;
    }
    VcgReport v = vcg_payments(s);
    CHECK(std::abs(v.rows[3].vcg_payment) < 1e-4);
    CHECK(v.rows[3].clarke_tax == doctest::Approx(v.rows[3].others_cost_full).epsilon(1e-4));
}

TEST_CASE("declared values reproduce the central VCG report") {
    Scenario s = fixture_15bus(4);
    VcgReport central = vcg_payments(s);
    VcgDeclarations d;
    d.dso_cost_full = central.dso_cost_full;
    d.la_cost_full = central.la_cost_full;
    for (const auto& r : central.rows) d.counterfactual.push_back(r.clarke_tax);
    VcgReport dv = vcg_from_declarations(s, d);
    for (std::size_t a = 0; a < dv.rows.size(); ++a) CHECK(dv.rows[a].vcg_payment == central.rows[a].vcg_payment);
    d.counterfactual.pop_back();
    CHECK_THROWS_AS(vcg_from_declarations(s, d), Error);
}

TEST_CASE("comparison table has one row per aggregator") {
    Scenario s = fixture_15bus(0);
    Profile loads = fixture_15bus_table2_profiles();
    OpfSolution dso = opf::solve_dso(s, loads);
    REQUIRE(dso.ok());
    SettleOptions opt;
    opt.tau_pen = 1.0;
    Settlement st = settle(s, loads, dso.dlmps, loads, opt);
    VcgReport v = vcg_payments_fixed(s, loads);
    auto rows = compare(st, v);
    CHECK(rows.size() == 5);
    nlohmann::json j = comparison_to_json(rows);
    CHECK(j.size() == 5);
    CHECK(j[4]["nodes"] == nlohmann::json::array({11}));
    CHECK(comparison_table(rows).find("DLMP payment") != std::string::npos);
}

TEST_CASE("cheating on the announced bound lowers the aggregator's total cost") {
    Example1Result r = reproduce_example1();
    CHECK(r.truthful.total == doctest::Approx(-15.13).epsilon(0.05 / 15.13));
    CHECK(r.cheated.total == doctest::Approx(-15.47).epsilon(0.05 / 15.47));
    CHECK(r.truthful.phi_signed == doctest::Approx(-33.57).epsilon(0.05 / 33.57));
    CHECK(r.cheating_pays());
    CHECK(r.truthful.total - r.cheated.total >= 0.1);
    // The cheated profile sits on the announced bound.
    CHECK(r.cheated.x.p(1, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("settlement after an ADMM run uses the run's prices") {
    Scenario s = fixture_toy();
    coord::AlgoConfig cfg;
    cfg.max_iter = 200;
    coord::CoordinationResult r = coord::run_admm(s, cfg);
    REQUIRE(r.converged());
    SettleOptions opt;
    opt.tau_pen = 1.0;
    Settlement st = settle(s, r.x_a, r.lambda, r.x_a, opt);
    OpfSolution c = opf::solve_central(s);
    Settlement ref = settle(s, c.vars.net_profile(), c.dlmps, c.vars.net_profile(), opt);
    CHECK(st.total_payment() == doctest::Approx(ref.total_payment()).epsilon(1e-4));
}
