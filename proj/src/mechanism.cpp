#include "dlmp/mechanism.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "dlmp/error.hpp"
#include "dlmp/fixtures.hpp"

namespace dlmp::mech {

double Settlement::total_payment() const {
    double sum = 0.0;
    for (const auto& r : rows) sum += r.payment;
    return sum;
}

double Settlement::total_penalty() const {
    double sum = 0.0;
    for (const auto& r : rows) sum += r.penalty;
    return sum;
}

AggregatorSettlement dlmp_payment(const Scenario& s, int aggregator, const DlmpSet& lambda, const Profile& x) {
    const Aggregator& agg = s.aggregators.at(static_cast<std::size_t>(aggregator));
    AggregatorSettlement r;
    r.id = agg.id;
    r.buses = agg.buses;
    for (int n : agg.buses)
        for (int t = 0; t < s.horizon; ++t) {
            r.payment_p += lambda.lp(n, t) * x.p(n, t);
            r.payment_q += lambda.lq(n, t) * x.q(n, t);
        }
    r.payment = r.payment_p + r.payment_q;
    return r;
}

Settlement settle(const Scenario& s, const Profile& agreed, const DlmpSet& agreed_lambda, const Profile& realized,
                  const SettleOptions& opt) {
    Settlement st;
    if (opt.tau_pen) {
        st.tau_pen = *opt.tau_pen;
    } else {
        OpfSolution central = opf::solve_central(s, opt.solver);
        if (!central.ok()) throw Error(ErrorKind::infeasible, "central problem has no optimum; pass tau_pen");
        st.tau_pen = 10.0 * std::abs(central.objective);
    }

    std::vector<bool> deviated(s.aggregators.size(), false);
    bool any = false;
    for (std::size_t a = 0; a < s.aggregators.size(); ++a) {
        for (int n : s.aggregators[a].buses)
            for (int t = 0; t < s.horizon; ++t)
                if (std::abs(agreed.p(n, t) - realized.p(n, t)) > opt.deviation_tol ||
                    std::abs(agreed.q(n, t) - realized.q(n, t)) > opt.deviation_tol)
                    deviated[a] = true;
        any = any || deviated[a];
    }

    st.lambda = agreed_lambda;
    if (any) {
        st.recomputed = true;
        OpfSolution re = opf::solve_dso(s, realized, opt.solver);
        if (!re.ok()) {
            st.truncated = true;
            re = opf::solve_dso_truncated(s, realized, opt.K, opt.solver);
            if (!re.ok())
                throw Error(ErrorKind::solver_failure,
                            fmt::format("settlement-infeasible: truncated re-solve {}", conic::to_string(re.status)));
        }
        st.lambda = re.dlmps;
    }
    for (std::size_t a = 0; a < s.aggregators.size(); ++a) {
        AggregatorSettlement r = dlmp_payment(s, static_cast<int>(a), st.lambda, realized);
        r.deviated = deviated[a];
        r.penalty = deviated[a] ? st.tau_pen : 0.0;
        st.rows.push_back(r);
    }
    return st;
}

VcgReport vcg_from_declarations(const Scenario& s, const VcgDeclarations& d) {
    if (d.la_cost_full.size() != s.aggregators.size() || d.counterfactual.size() != s.aggregators.size())
        throw Error(ErrorKind::invalid_argument, "one declaration per aggregator expected");
    VcgReport rep;
    rep.dso_cost_full = d.dso_cost_full;
    rep.la_cost_full = d.la_cost_full;
    double la_total = 0.0;
    for (double c : d.la_cost_full) la_total += c;
    rep.full_objective = d.dso_cost_full + la_total;
    for (std::size_t a = 0; a < s.aggregators.size(); ++a) {
        VcgRow row;
        row.id = s.aggregators[a].id;
        row.buses = s.aggregators[a].buses;
        row.others_cost_full = d.dso_cost_full + la_total - d.la_cost_full[a];
        if (d.counterfactual[a]) {
            row.clarke_tax = *d.counterfactual[a];
            row.vcg_payment = row.others_cost_full - row.clarke_tax;
        } else {
            row.counterfactual_feasible = false;
            row.clarke_tax = NAN;
            row.vcg_payment = NAN;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

VcgReport vcg_payments(const Scenario& s, const conic::SolveOptions& opt) {
    OpfSolution full = opf::solve_central(s, opt);
    if (!full.ok()) throw Error(ErrorKind::infeasible, "central problem has no optimum");
    VcgDeclarations d;
    d.dso_cost_full = opf::dso_cost(s, full.vars);
    const Profile x = full.vars.net_profile();
    for (std::size_t a = 0; a < s.aggregators.size(); ++a) {
        d.la_cost_full.push_back(opf::la_cost(s, static_cast<int>(a), x));
        OpfSolution cf = opf::solve_central(s, opt, static_cast<int>(a));
        if (cf.ok())
            d.counterfactual.push_back(cf.objective);
        else
            d.counterfactual.push_back(std::nullopt);
    }
    VcgReport rep = vcg_from_declarations(s, d);
    rep.solve_count = 1 + static_cast<int>(s.aggregators.size());
    return rep;
}

VcgReport vcg_payments_fixed(const Scenario& s, const Profile& loads, const conic::SolveOptions& opt) {
    OpfSolution full = opf::solve_dso(s, loads, opt);
    if (!full.ok()) throw Error(ErrorKind::infeasible, "network problem at the given profile is infeasible");
    VcgDeclarations d;
    d.dso_cost_full = opf::dso_cost(s, full.vars);
    for (std::size_t a = 0; a < s.aggregators.size(); ++a) {
        d.la_cost_full.push_back(opf::la_cost(s, static_cast<int>(a), loads));
        Profile without = loads;
        for (int n : s.aggregators[a].buses) {
            without.p.row(n).setZero();
            without.q.row(n).setZero();
        }
        OpfSolution cf = opf::solve_dso(s, without, opt);
        if (cf.ok()) {
            double others = cf.objective;
            for (std::size_t b = 0; b < s.aggregators.size(); ++b)
                if (b != a) others += opf::la_cost(s, static_cast<int>(b), without);
            d.counterfactual.push_back(others);
        } else {
            d.counterfactual.push_back(std::nullopt);
        }
    }
    VcgReport rep = vcg_from_declarations(s, d);
    rep.solve_count = 1 + static_cast<int>(s.aggregators.size());
    return rep;
}

std::vector<ComparisonRow> compare(const Settlement& st, const VcgReport& vcg) {
    if (st.rows.size() != vcg.rows.size()) throw Error(ErrorKind::invalid_argument, "row count mismatch");
    std::vector<ComparisonRow> out;
    for (std::size_t a = 0; a < st.rows.size(); ++a)
        out.push_back({st.rows[a].id, st.rows[a].buses, st.rows[a].payment, vcg.rows[a].vcg_payment});
    return out;
}

nlohmann::json comparison_to_json(const std::vector<ComparisonRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json vcg = std::isfinite(r.vcg_payment) ? nlohmann::json(r.vcg_payment) : nlohmann::json(nullptr);
        j.push_back({{"aggregator", r.id}, {"nodes", r.buses}, {"dlmp_payment", r.dlmp_payment}, {"vcg_payment", vcg}});
    }
    return j;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows) {
    std::ostringstream os;
    os << fmt::format("{:<11} {:<20} {:>13} {:>13}\n", "aggregator", "nodes", "DLMP payment", "VCG payment");
    for (const auto& r : rows)
        os << fmt::format("{:<11} {:<20} {:>13.3f} {:>13.3f}\n", r.id, fmt::format("{}", fmt::join(r.buses, ",")),
                          r.dlmp_payment, r.vcg_payment);
    return os.str();
}

namespace {

Example1Side run_side(const std::vector<double>& p_max, bool literal, const conic::SolveOptions& opt) {
    // The true preferences never change; only the announced bound does.
    const Scenario truth = fixture_toy_with_pmax({1.5, 1.5}, literal);
    const Scenario announced = fixture_toy_with_pmax(p_max, literal);
    OpfSolution sol = opf::solve_central(announced, opt);
    if (!sol.ok()) throw Error(ErrorKind::solver_failure, "toy central solve failed");
    Example1Side side;
    side.p_max = p_max;
    side.x = sol.vars.net_profile();
    side.lambda = sol.dlmps;
    side.dso_cost = opf::dso_cost(announced, sol.vars);
    SettleOptions so;
    so.tau_pen = 10.0 * std::abs(sol.objective);
    so.solver = opt;
    Settlement st = settle(announced, side.x, side.lambda, side.x, so);
    side.payment = st.rows.at(0).payment;
    side.phi_raw = opf::la_cost(truth, 0, side.x);
    const LaCost& cost = truth.aggregators.at(0).cost;
    double bliss = 0.0;
    for (const auto& [bus, prof] : cost.profile)
        for (double v : prof) bliss += cost.weight * v * v;
    side.phi_signed = side.phi_raw - bliss;
    side.total = side.phi_signed + side.payment;
    return side;
}

}  // namespace

Example1Result reproduce_example1(bool literal_cost, const conic::SolveOptions& opt) {
    Example1Result r;
    r.truthful = run_side({1.5, 1.5}, literal_cost, opt);
    r.cheated = run_side({1.5, 1.0}, literal_cost, opt);
    return r;
}

}  // namespace dlmp::mech
