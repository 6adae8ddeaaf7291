#include "dlmp/opf/checks.hpp"

#include <algorithm>
#include <cmath>

namespace dlmp::opf {

ExactnessReport check_exactness(const Scenario& s, const OpfVariables& x, double tol) {
    const int N = s.network.size(), T = s.horizon;
    ExactnessReport r;
    r.gap = Matrix::Zero(N, T);
    for (int n = 0; n < N; ++n) {
        if (n == s.network.root()) continue;
        for (int t = 0; t < T; ++t) {
            double gap = x.v(n, t) * x.ell(n, t) - (x.f(n, t) * x.f(n, t) + x.g(n, t) * x.g(n, t));
            r.gap(n, t) = gap;
            r.max_gap = std::max(r.max_gap, gap);
            if (gap > tol) r.slack.push_back({n, t});
        }
    }
    r.is_exact = r.max_gap <= tol;
    return r;
}

AncestorIdentityReport check_dlmp_ancestor_identity(const Scenario& s, const OpfSolution& sol) {
    const Network& net = s.network;
    const int N = net.size(), T = s.horizon;
    const OpfVariables& x = sol.vars;
    const DualSet& d = sol.duals;
    const DlmpSet& lam = sol.dlmps;
    AncestorIdentityReport r;
    r.residual_p = Matrix::Zero(N, T);
    r.residual_q = Matrix::Zero(N, T);
    for (int n = 0; n < N; ++n) {
        if (n == net.root()) continue;
        const Bus& b = net.bus(n);
        const int a = b.ancestor;
        for (int t = 0; t < T; ++t) {
            double f = x.f(n, t), g = x.g(n, t), l = x.ell(n, t);
            double gm = d.gamma(n, t), ep = d.eta_plus(n, t), em = d.eta_minus(n, t), be = d.beta(n, t);
            double pred_p = lam.lp(a, t) - 2 * f * gm - 2 * f * ep - 2 * (f - b.r * l) * em + 2 * be * b.r;
            double pred_q = lam.lq(a, t) - 2 * g * gm - 2 * g * ep - 2 * (g - b.x * l) * em + 2 * be * b.x;
            r.residual_p(n, t) = lam.lp(n, t) - pred_p;
            r.residual_q(n, t) = lam.lq(n, t) - pred_q;
            r.max_residual =
                std::max({r.max_residual, std::abs(r.residual_p(n, t)), std::abs(r.residual_q(n, t))});
        }
    }
    return r;
}

SubgradientReport check_subgradient(const Scenario& s, const Profile& loads, const DlmpSet& dlmps,
                                    const SubgradientOptions& opt) {
    SubgradientReport rep;
    OpfSolution base = solve_dso(s, loads, opt.solver);
    if (!base.ok()) {
        rep.all_bracketed = false;
        return rep;
    }
    rep.base_value = base.objective;
    const double eps = opt.eps;
    for (int n = 0; n < s.network.size(); ++n) {
        if (n == s.network.root()) continue;
        for (int t = 0; t < s.horizon; ++t)
            for (BalanceKind kind : {BalanceKind::active, BalanceKind::reactive}) {
                if (kind == BalanceKind::reactive && !opt.reactive) continue;
                SubgradientEntry e;
                e.bus = n;
                e.period = t;
                e.kind = kind;
                e.lambda = kind == BalanceKind::active ? dlmps.lp(n, t) : dlmps.lq(n, t);
                auto value_at = [&](double delta, bool& ok) {
                    Profile pr = loads;
                    (kind == BalanceKind::active ? pr.p : pr.q)(n, t) += delta;
                    OpfSolution sol = solve_dso(s, pr, opt.solver);
                    ok = sol.ok();
                    return sol.objective;
                };
                bool ok_plus = false, ok_minus = false;
                double fp = value_at(eps, ok_plus), fm = value_at(-eps, ok_minus);
                if (!ok_plus || !ok_minus) {
                    e.skipped = true;
                    rep.entries.push_back(e);
                    continue;
                }
                e.forward = (fp - rep.base_value) / eps;
                e.backward = (rep.base_value - fm) / eps;
                e.central = (fp - fm) / (2 * eps);
                double scale = std::max(std::abs(e.lambda), opt.rel_floor);
                e.rel_error = std::abs(e.central - e.lambda) / scale;
                e.smooth = std::abs(e.forward - e.backward) <= opt.smooth_tol * std::max(1.0, std::abs(e.central));
                double lo = std::min(e.forward, e.backward), hi = std::max(e.forward, e.backward);
                e.bracketed = e.lambda >= lo - opt.bracket_tol * scale && e.lambda <= hi + opt.bracket_tol * scale;
                if (e.smooth) rep.max_rel_error_smooth = std::max(rep.max_rel_error_smooth, e.rel_error);
                if (!e.smooth && !e.bracketed) rep.all_bracketed = false;
                rep.entries.push_back(e);
            }
    }
    return rep;
}

SufficientConditionsReport check_sufficient_conditions(const Scenario& s, const OpfSolution& sol) {
    const Network& net = s.network;
    const int N = net.size(), T = s.horizon, root = net.root();
    SufficientConditionsReport r;
    r.horizon = T;

    bool la_constant = true;
    for (const Aggregator& a : s.aggregators) la_constant &= a.cost.kind == LaCost::Kind::zero;
    bool all_r_positive = true;
    for (int n = 0; n < N; ++n)
        if (n != root) all_r_positive &= net.bus(n).r > 0;
    r.increasing_in_losses = s.cost.alpha_loss > 0 && all_r_positive;

    bool no_upper = true;
    for (const LoadSpec& l : s.loads) {
        for (double pmax : l.p_max) no_upper &= std::isinf(pmax);
        if (l.q_max)
            for (double qmax : *l.q_max) no_upper &= std::isinf(qmax);
    }
    r.consumption_side = la_constant && no_upper;

    // DER lower bounds slack at the solution: pg > 0 and qg above rho_min pg.
    bool der_slack = !s.ders.empty();
    for (const DerSpec& d : s.ders)
        for (int t = 0; t < T; ++t) {
            double pg = sol.vars.pg(d.bus, t), qg = sol.vars.qg(d.bus, t);
            der_slack &= pg > 1e-6 && qg - d.rho_min * pg > 1e-6;
        }
    r.generation_side = la_constant && der_slack;
    r.loss_conditions_hold = r.convex_objective && r.increasing_in_losses && r.independent_of_flows &&
                   (r.consumption_side || r.generation_side);

    // Supply cost c_t(x) = alpha x + beta x^2 is strictly increasing on x >= 0.
    r.increasing_in_supply = true;
    for (int t = 0; t < T; ++t) r.increasing_in_supply &= s.cost.alpha[t] > 0 || s.cost.beta[t] > 0;
    r.no_shunts = true;
    for (const Bus& b : net.buses()) r.no_shunts &= b.b == 0.0 && b.g == 0.0;

    // Linearized flows: f_hat_n = -(sum of net consumption in the subtree of n).
    auto subtree_sum = [&](const Matrix& load, Matrix& out) {
        out = Matrix::Zero(N, T);
        const auto& order = net.topological_order();
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            int n = *it;
            if (n == root) continue;
            for (int t = 0; t < T; ++t) out(n, t) -= load(n, t);
            int a = net.ancestor(n);
            if (a != root)
                for (int t = 0; t < T; ++t) out(a, t) += out(n, t);
        }
    };
    subtree_sum(sol.vars.p, r.f_hat);
    subtree_sum(sol.vars.q, r.g_hat);
    r.v_hat = Matrix::Constant(N, T, net.v0());
    r.voltage_upper_slack = true;
    for (int n : net.topological_order()) {
        if (n == root) continue;
        const Bus& b = net.bus(n);
        for (int t = 0; t < T; ++t) {
            r.v_hat(n, t) = r.v_hat(b.ancestor, t) + 2 * (b.r * r.f_hat(n, t) + b.x * r.g_hat(n, t));
            r.voltage_upper_slack &= r.v_hat(n, t) < b.v_max;
        }
    }

    // Lowest net loads each bus can reach.
    Matrix p_lo = Matrix::Zero(N, T), q_lo = Matrix::Zero(N, T);
    for (const LoadSpec& l : s.loads) {
        const DerSpec* d = s.der_at(l.bus);
        for (int t = 0; t < T; ++t) {
            double avail = d ? d->p_avail[t] : 0.0;
            p_lo(l.bus, t) = l.p_min[t] - avail;
            double qc = std::min(l.tau * l.p_min[t], l.tau * l.p_max[t]);
            double qg_max = d ? std::max(0.0, d->rho_max * avail) : 0.0;
            q_lo(l.bus, t) = qc - qg_max;
            if (l.q_min) q_lo(l.bus, t) = std::max(q_lo(l.bus, t), (*l.q_min)[t]);
        }
    }
    Matrix f_lo, g_lo;
    subtree_sum(p_lo, f_lo);
    subtree_sum(q_lo, g_lo);
    r.u.assign(static_cast<std::size_t>(N), Eigen::Vector2d::Zero());
    r.a_lower.assign(static_cast<std::size_t>(N * T), Eigen::Matrix2d::Identity());
    for (int n = 0; n < N; ++n) {
        if (n == root) continue;
        const Bus& b = net.bus(n);
        r.u[n] = Eigen::Vector2d(b.r, b.x);
        for (int t = 0; t < T; ++t) {
            Eigen::RowVector2d row(std::max(f_lo(n, t), 0.0), std::max(g_lo(n, t), 0.0));
            r.a_lower[n * T + t] = Eigen::Matrix2d::Identity() - (2.0 / b.v_min) * r.u[n] * row;
        }
    }
    // Paths run from the bus next to the root down to each leaf.
    r.path_products_positive = true;
    for (int leaf : net.leaves()) {
        std::vector<int> path = net.path_to_root(leaf);
        path.pop_back();
        std::reverse(path.begin(), path.end());
        const int L = static_cast<int>(path.size());
        for (int t = 0; t < T; ++t)
            for (int k = 0; k < L; ++k) {
                Eigen::Vector2d v = r.u[path[k]];
                if (!(v.array() > 0).all()) r.path_products_positive = false;
                for (int sidx = k - 1; sidx >= 0; --sidx) {
                    v = r.a_lower[path[sidx] * T + t] * v;
                    if (!(v.array() > 0).all()) r.path_products_positive = false;
                }
            }
    }
    r.supply_conditions_hold = r.increasing_in_supply && r.no_shunts && r.voltage_upper_slack && r.path_products_positive;
    return r;
}

}  // namespace dlmp::opf
