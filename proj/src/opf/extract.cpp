#include <cmath>

#include <fmt/format.h>

#include "dlmp/conic/solver.hpp"
#include "dlmp/error.hpp"
#include "dlmp/opf/model.hpp"

namespace dlmp::opf {

namespace {

double value(const conic::ConicSolution& sol, conic::VarId v) {
    return v >= 0 ? sol.x[static_cast<std::size_t>(v)] : 0.0;
}

double row_dual(const conic::ConicSolution& sol, conic::RowId r) {
    if (r < 0 || r >= static_cast<int>(sol.eq_duals.size()))
        throw Error(ErrorKind::index_out_of_range, fmt::format("missing-row: balance row {} not in solution", r));
    return sol.eq_duals[static_cast<std::size_t>(r)];
}

}  // namespace

void extract_dlmps(const BuiltProgram& bp, const conic::ConicSolution& sol, DlmpSet& dlmps, DualSet& duals) {
    const IndexMap& ix = bp.index;
    const int N = ix.buses, T = ix.horizon;
    const conic::ConicProgram& prog = bp.program;
    dlmps.lp = Matrix::Zero(N, T);
    dlmps.lq = Matrix::Zero(N, T);
    Matrix z = Matrix::Zero(N, T);
    duals = DualSet{z, z, z, z, z, z, std::nullopt};
    for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t) {
            const int k = ix.at(n, t);
            // Balance rows read row(x) = -p; the price of consumption is the
            // negated sensitivity to the row's right-hand side.
            if (ix.bal_p[k] >= 0) dlmps.lp(n, t) = -row_dual(sol, ix.bal_p[k]);
            if (ix.bal_q[k] >= 0) dlmps.lq(n, t) = -row_dual(sol, ix.bal_q[k]);
            if (ix.drop[k] >= 0) duals.beta(n, t) = -row_dual(sol, ix.drop[k]);
            if (ix.cone_rel[k] >= 0) {
                const auto& zc = sol.cone_duals[static_cast<std::size_t>(ix.cone_rel[k])];
                double w = value(sol, ix.v[k]) + value(sol, ix.ell[k]);
                duals.gamma(n, t) = w > 0 ? (zc[0] + zc[1]) / w : 0.0;
            }
            auto cap = [&](conic::ConeId c) {
                const auto& zc = sol.cone_duals[static_cast<std::size_t>(c)];
                double smax = prog.cones[static_cast<std::size_t>(c)].bound.constant;
                return smax > 0 ? zc[0] / (2 * smax) : 0.0;
            };
            if (ix.cone_send[k] >= 0) duals.eta_plus(n, t) = cap(ix.cone_send[k]);
            if (ix.cone_recv[k] >= 0) duals.eta_minus(n, t) = cap(ix.cone_recv[k]);
            if (ix.v[k] >= 0) {
                duals.sigma_lo(n, t) = sol.lower_duals[static_cast<std::size_t>(ix.v[k])];
                duals.sigma_hi(n, t) = sol.upper_duals[static_cast<std::size_t>(ix.v[k])];
            }
        }
    bool has_la = false;
    for (conic::VarId v : ix.pc) has_la |= v >= 0;
    if (has_la) {
        LaDuals la{Eigen::VectorXd::Zero(N), Matrix::Zero(N, T), Matrix::Zero(N, T)};
        for (int n = 0; n < N; ++n) {
            if (ix.energy[n] >= 0) la.energy[n] = row_dual(sol, ix.energy[n]);
            for (int t = 0; t < T; ++t) {
                conic::VarId v = ix.pc[ix.at(n, t)];
                if (v < 0) continue;
                la.nu_lo(n, t) = sol.lower_duals[static_cast<std::size_t>(v)];
                la.nu_hi(n, t) = sol.upper_duals[static_cast<std::size_t>(v)];
            }
        }
        duals.la = la;
    }
}

OpfSolution extract(const Scenario& s, const BuiltProgram& bp, const conic::ConicSolution& sol,
                    const Profile* fixed_loads) {
    const IndexMap& ix = bp.index;
    const int N = ix.buses, T = ix.horizon;
    OpfSolution out;
    out.status = sol.status;
    out.raw = sol;
    out.objective = sol.objective;
    out.vars = OpfVariables::zeros(N, T);
    if (sol.x.empty()) return out;
    OpfVariables& x = out.vars;
    for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t) {
            const int k = ix.at(n, t);
            x.v(n, t) = value(sol, ix.v[k]);
            x.ell(n, t) = value(sol, ix.ell[k]);
            x.f(n, t) = value(sol, ix.f[k]);
            x.g(n, t) = value(sol, ix.g[k]);
            x.pc(n, t) = value(sol, ix.pc[k]);
            x.pg(n, t) = value(sol, ix.pg[k]);
            x.qg(n, t) = value(sol, ix.qg[k]);
            x.p(n, t) = value(sol, ix.p[k]);
            x.q(n, t) = value(sol, ix.q[k]);
            if (fixed_loads && n != s.network.root()) {
                x.p(n, t) = fixed_loads->p(n, t);
                x.q(n, t) = fixed_loads->q(n, t);
            }
        }
    if (sol.status == conic::Status::optimal) extract_dlmps(bp, sol, out.dlmps, out.duals);
    return out;
}

OpfSolution solve_central(const Scenario& s, const conic::SolveOptions& opt, int excluded_aggregator) {
    BuiltProgram bp = build_central(s, excluded_aggregator);
    return extract(s, bp, conic::solve(bp.program, opt));
}

OpfSolution solve_dso(const Scenario& s, const Profile& loads, const conic::SolveOptions& opt) {
    BuiltProgram bp = build_dso(s, loads);
    return extract(s, bp, conic::solve(bp.program, opt), &loads);
}

OpfSolution solve_dso_truncated(const Scenario& s, const Profile& loads, double K, const conic::SolveOptions& opt) {
    BuiltProgram bp = build_dso_truncated(s, loads, K);
    return extract(s, bp, conic::solve(bp.program, opt), &loads);
}

double dso_cost(const Scenario& s, const OpfVariables& x) {
    const int root = s.network.root();
    double c = 0.0;
    for (int t = 0; t < s.horizon; ++t) {
        double supply = -x.p(root, t);
        c += s.cost.alpha[t] * supply + s.cost.beta[t] * supply * supply;
    }
    if (s.cost.alpha_loss != 0.0)
        for (int n = 0; n < s.network.size(); ++n)
            if (n != root)
                for (int t = 0; t < s.horizon; ++t) c += s.cost.alpha_loss * s.network.bus(n).r * x.ell(n, t);
    return c;
}

double la_cost(const Scenario& s, int aggregator, const Profile& loads) {
    const Aggregator& agg = s.aggregators.at(static_cast<std::size_t>(aggregator));
    if (agg.cost.kind != LaCost::Kind::preferred_profile) return 0.0;
    double c = 0.0;
    for (const auto& [bus, prof] : agg.cost.profile)
        for (int t = 0; t < s.horizon; ++t) {
            double d = loads.p(bus, t) - prof[t];
            c += agg.cost.weight * d * d;
        }
    return c;
}

double total_la_cost(const Scenario& s, const Profile& loads) {
    double c = 0.0;
    for (std::size_t a = 0; a < s.aggregators.size(); ++a) c += la_cost(s, static_cast<int>(a), loads);
    return c;
}

void balance_expressions(const Scenario& s, const OpfVariables& x, Matrix& row_p, Matrix& row_q) {
    const Network& net = s.network;
    const int N = net.size(), T = s.horizon;
    row_p = Matrix::Zero(N, T);
    row_q = Matrix::Zero(N, T);
    for (int n = 0; n < N; ++n) {
        const Bus& b = net.bus(n);
        for (int t = 0; t < T; ++t) {
            double rp = 0.0, rq = 0.0;
            if (n != net.root()) {
                rp += x.f(n, t);
                rq += x.g(n, t);
            }
            for (int m : net.children(n)) {
                const Bus& c = net.bus(m);
                rp -= x.f(m, t) - c.r * x.ell(m, t);
                rq -= x.g(m, t) - c.x * x.ell(m, t);
            }
            rp += b.g * x.v(n, t);
            rq -= b.b * x.v(n, t);
            row_p(n, t) = rp;
            row_q(n, t) = rq;
        }
    }
}

double primal_residual(const Scenario& s, const OpfVariables& x, const Profile& loads) {
    Matrix rp, rq;
    balance_expressions(s, x, rp, rq);
    const int root = s.network.root();
    double sum = 0.0;
    for (int n = 0; n < s.network.size(); ++n)
        for (int t = 0; t < s.horizon; ++t) {
            double lp = n == root ? x.p(n, t) : loads.p(n, t);
            double lq = n == root ? x.q(n, t) : loads.q(n, t);
            sum += (rp(n, t) + lp) * (rp(n, t) + lp) + (rq(n, t) + lq) * (rq(n, t) + lq);
        }
    return std::sqrt(sum);
}

}  // namespace dlmp::opf
