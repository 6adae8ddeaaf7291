#include <cmath>

#include <fmt/format.h>

#include "dlmp/error.hpp"
#include "dlmp/opf/model.hpp"

namespace dlmp::opf {

using conic::Affine;
using conic::kInf;
using conic::ProgramBuilder;

OpfVariables OpfVariables::zeros(int buses, int horizon) {
    Matrix z = Matrix::Zero(buses, horizon);
    return {z, z, z, z, z, z, z, z, z};
}

std::optional<BalanceTag> IndexMap::tag_of(conic::RowId row) const {
    for (int n = 0; n < buses; ++n)
        for (int t = 0; t < horizon; ++t) {
            if (bal_p[at(n, t)] == row) return BalanceTag{n, t, BalanceKind::active};
            if (bal_q[at(n, t)] == row) return BalanceTag{n, t, BalanceKind::reactive};
        }
    return std::nullopt;
}

namespace {

enum class LoadMode {
    variable,   // aggregator decisions are program variables
    fixed,      // constants from a profile
    priced,     // non-root rows moved to the objective
    augmented,  // residual variables priced and penalized
};

struct BuildRequest {
    LoadMode mode = LoadMode::variable;
    const Profile* loads = nullptr;
    const DlmpSet* prices = nullptr;
    int excluded = -1;
    double K = 0.0;
    double rho = 0.0;
};

void reset(IndexMap& ix, int N, int T) {
    ix.buses = N;
    ix.horizon = T;
    const std::size_t sz = static_cast<std::size_t>(N * T);
    for (auto* v : {&ix.v, &ix.ell, &ix.f, &ix.g, &ix.pc, &ix.pg, &ix.qg, &ix.p, &ix.q, &ix.bal_p, &ix.bal_q, &ix.drop,
                    &ix.cone_rel, &ix.cone_send, &ix.cone_recv, &ix.u_plus_p, &ix.u_minus_p, &ix.u_plus_q,
                    &ix.u_minus_q, &ix.resid_p, &ix.resid_q})
        v->assign(sz, -1);
    ix.energy.assign(static_cast<std::size_t>(N), -1);
}

std::string tag(const char* what, int n, int t) { return fmt::format("{}[{},{}]", what, n, t); }

// Consumption, DER and net-load variables with constraints for one bus.
// Returns nothing; indices land in ix.
void add_aggregator_bus(ProgramBuilder& pb, IndexMap& ix, const Scenario& s, int n) {
    const int T = s.horizon;
    const LoadSpec* load = s.load_at(n);
    const DerSpec* der = s.der_at(n);
    double floor_sum = 0.0;
    for (int t = 0; t < T; ++t) {
        const int k = ix.at(n, t);
        ix.pc[k] = pb.add_var(tag("pc", n, t), load->p_min[t], load->p_max[t]);
        floor_sum += load->p_min[t];
        double qlo = load->q_min ? (*load->q_min)[t] : -kInf;
        double qhi = load->q_max ? (*load->q_max)[t] : kInf;
        ix.p[k] = pb.add_var(tag("p", n, t));
        ix.q[k] = pb.add_var(tag("q", n, t), qlo, qhi);
        Affine pdef = Affine::var(ix.p[k]) - Affine::var(ix.pc[k]);
        Affine qdef = Affine::var(ix.q[k]) - load->tau * Affine::var(ix.pc[k]);
        if (der) {
            ix.pg[k] = pb.add_var(tag("pg", n, t), 0.0, der->p_avail[t]);
            ix.qg[k] = pb.add_var(tag("qg", n, t));
            pdef.add(ix.pg[k], 1.0);
            qdef.add(ix.qg[k], 1.0);
            if (der->rho_min == der->rho_max) {
                pb.add_eq(Affine::var(ix.qg[k]) - der->rho_min * Affine::var(ix.pg[k]), 0.0, tag("der-q", n, t));
            } else {
                conic::VarId lo = pb.add_var(tag("der-q-lo", n, t), 0.0, kInf);
                conic::VarId hi = pb.add_var(tag("der-q-hi", n, t), 0.0, kInf);
                pb.add_eq(Affine::var(ix.qg[k]) - der->rho_min * Affine::var(ix.pg[k]) - Affine::var(lo), 0.0,
                          tag("der-q-lo", n, t));
                pb.add_eq(der->rho_max * Affine::var(ix.pg[k]) - Affine::var(ix.qg[k]) - Affine::var(hi), 0.0,
                          tag("der-q-hi", n, t));
            }
        }
        pb.add_eq(pdef, 0.0, tag("net-p", n, t));
        pb.add_eq(qdef, 0.0, tag("net-q", n, t));
    }
    // The energy floor is dropped when the consumption floors already imply it.
    if (floor_sum < load->energy) {
        Affine sum;
        for (int t = 0; t < T; ++t) sum.add(ix.pc[ix.at(n, t)], 1.0);
        conic::VarId slack = pb.add_var(fmt::format("energy-slack[{}]", n), 0.0, kInf);
        sum.add(slack, -1.0);
        ix.energy[n] = pb.add_eq(sum, load->energy, fmt::format("energy[{}]", n));
    }
}

void add_la_cost(ProgramBuilder& pb, const IndexMap& ix, const Aggregator& agg, int T) {
    if (agg.cost.kind != LaCost::Kind::preferred_profile) return;
    const double w = agg.cost.weight;
    for (const auto& [bus, prof] : agg.cost.profile)
        for (int t = 0; t < T; ++t) {
            conic::VarId p = ix.p[ix.at(bus, t)];
            pb.add_quadratic_cost(p, w);
            pb.add_linear_cost(p, -2.0 * w * prof[t]);
            pb.add_constant_cost(w * prof[t] * prof[t]);
        }
}

BuiltProgram build_network(const Scenario& s, const BuildRequest& req) {
    s.validate();
    const Network& net = s.network;
    const int N = net.size(), T = s.horizon, root = net.root();
    ProgramBuilder pb;
    BuiltProgram out;
    IndexMap& ix = out.index;
    reset(ix, N, T);

    for (int t = 0; t < T; ++t)
        for (int n = 0; n < N; ++n) {
            const Bus& b = net.bus(n);
            const int k = ix.at(n, t);
            if (n == root) {
                ix.v[k] = pb.add_var(tag("v", n, t), net.v0(), net.v0());
                continue;
            }
            ix.v[k] = pb.add_var(tag("v", n, t), b.v_min, b.v_max);
            ix.ell[k] = pb.add_var(tag("l", n, t), 0.0, kInf);
            ix.f[k] = pb.add_var(tag("f", n, t));
            ix.g[k] = pb.add_var(tag("g", n, t));
        }

    // Aggregator-side variables.
    if (req.mode == LoadMode::variable) {
        for (std::size_t a = 0; a < s.aggregators.size(); ++a) {
            if (static_cast<int>(a) == req.excluded) continue;
            for (int n : s.aggregators[a].buses) add_aggregator_bus(pb, ix, s, n);
            add_la_cost(pb, ix, s.aggregators[a], T);
        }
    }
    for (int t = 0; t < T; ++t) {
        const int k = ix.at(root, t);
        ix.p[k] = pb.add_var(tag("p0", root, t), -kInf, 0.0);
        ix.q[k] = pb.add_var(tag("q0", root, t));
    }

    for (int t = 0; t < T; ++t)
        for (int n : net.topological_order()) {
            const Bus& b = net.bus(n);
            const int k = ix.at(n, t);
            // Balance: f_n - sum_children (f_m - R_m l_m) + G_n v_n + p_n = 0
            Affine rp, rq;
            if (n != root) {
                rp.add(ix.f[k], 1.0);
                rq.add(ix.g[k], 1.0);
            }
            for (int m : net.children(n)) {
                const Bus& c = net.bus(m);
                const int km = ix.at(m, t);
                rp.add(ix.f[km], -1.0).add(ix.ell[km], c.r);
                rq.add(ix.g[km], -1.0).add(ix.ell[km], c.x);
            }
            rp.add(ix.v[k], b.g);
            rq.add(ix.v[k], -b.b);

            if (n == root) {
                rp.add(ix.p[k], 1.0);
                rq.add(ix.q[k], 1.0);
                ix.bal_p[k] = pb.add_eq(rp, 0.0, tag("bal-p", n, t));
                ix.bal_q[k] = pb.add_eq(rq, 0.0, tag("bal-q", n, t));
                continue;
            }
            switch (req.mode) {
                case LoadMode::variable: {
                    if (ix.p[k] >= 0) {
                        rp.add(ix.p[k], 1.0);
                        rq.add(ix.q[k], 1.0);
                    }
                    ix.bal_p[k] = pb.add_eq(rp, 0.0, tag("bal-p", n, t));
                    ix.bal_q[k] = pb.add_eq(rq, 0.0, tag("bal-q", n, t));
                    break;
                }
                case LoadMode::fixed: {
                    if (req.K > 0) {
                        ix.u_plus_p[k] = pb.add_var(tag("u+p", n, t), 0.0, kInf);
                        ix.u_minus_p[k] = pb.add_var(tag("u-p", n, t), 0.0, kInf);
                        ix.u_plus_q[k] = pb.add_var(tag("u+q", n, t), 0.0, kInf);
                        ix.u_minus_q[k] = pb.add_var(tag("u-q", n, t), 0.0, kInf);
                        rp.add(ix.u_plus_p[k], 1.0).add(ix.u_minus_p[k], -1.0);
                        rq.add(ix.u_plus_q[k], 1.0).add(ix.u_minus_q[k], -1.0);
                        for (conic::VarId u : {ix.u_plus_p[k], ix.u_minus_p[k], ix.u_plus_q[k], ix.u_minus_q[k]})
                            pb.add_linear_cost(u, req.K);
                    }
                    ix.bal_p[k] = pb.add_eq(rp, -req.loads->p(n, t), tag("bal-p", n, t));
                    ix.bal_q[k] = pb.add_eq(rq, -req.loads->q(n, t), tag("bal-q", n, t));
                    break;
                }
                case LoadMode::priced: {
                    for (const conic::Term& term : rp.terms) pb.add_linear_cost(term.var, req.prices->lp(n, t) * term.coef);
                    for (const conic::Term& term : rq.terms) pb.add_linear_cost(term.var, req.prices->lq(n, t) * term.coef);
                    break;
                }
                case LoadMode::augmented: {
                    ix.resid_p[k] = pb.add_var(tag("r-p", n, t));
                    ix.resid_q[k] = pb.add_var(tag("r-q", n, t));
                    rp.add(ix.resid_p[k], -1.0);
                    rq.add(ix.resid_q[k], -1.0);
                    ix.bal_p[k] = pb.add_eq(rp, -req.loads->p(n, t), tag("bal-p", n, t));
                    ix.bal_q[k] = pb.add_eq(rq, -req.loads->q(n, t), tag("bal-q", n, t));
                    pb.add_linear_cost(ix.resid_p[k], req.prices->lp(n, t));
                    pb.add_linear_cost(ix.resid_q[k], req.prices->lq(n, t));
                    pb.add_quadratic_cost(ix.resid_p[k], 0.5 * req.rho);
                    pb.add_quadratic_cost(ix.resid_q[k], 0.5 * req.rho);
                    break;
                }
            }
        }

    for (int t = 0; t < T; ++t)
        for (int n = 0; n < N; ++n) {
            if (n == root) continue;
            const Bus& b = net.bus(n);
            const int k = ix.at(n, t);
            const int ka = ix.at(b.ancestor, t);
            // v_n - 2(R f + X g) + (R^2 + X^2) l - v_parent = 0
            Affine drop = Affine::var(ix.v[k]);
            drop.add(ix.f[k], -2 * b.r).add(ix.g[k], -2 * b.x).add(ix.ell[k], b.r * b.r + b.x * b.x);
            drop.add(ix.v[ka], -1.0);
            ix.drop[k] = pb.add_eq(drop, 0.0, tag("drop", n, t));
            ix.cone_rel[k] = pb.add_rsoc({Affine::var(ix.f[k]), Affine::var(ix.g[k])}, Affine::var(ix.v[k]),
                                         Affine::var(ix.ell[k]), tag("rel", n, t));
            ix.cone_send[k] =
                pb.add_soc({Affine::var(ix.f[k]), Affine::var(ix.g[k])}, Affine(b.s_max), tag("cap-send", n, t));
            Affine fr = Affine::var(ix.f[k]), gr = Affine::var(ix.g[k]);
            fr.add(ix.ell[k], -b.r);
            gr.add(ix.ell[k], -b.x);
            ix.cone_recv[k] = pb.add_soc({fr, gr}, Affine(b.s_max), tag("cap-recv", n, t));
        }

    // Substation cost: alpha_t x + beta_t x^2 with x = -p0.
    for (int t = 0; t < T; ++t) {
        conic::VarId p0 = ix.p[ix.at(root, t)];
        pb.add_linear_cost(p0, -s.cost.alpha[t]);
        pb.add_quadratic_cost(p0, s.cost.beta[t]);
    }
    if (s.cost.alpha_loss != 0.0)
        for (int t = 0; t < T; ++t)
            for (int n = 0; n < N; ++n)
                if (n != root) pb.add_linear_cost(ix.ell[ix.at(n, t)], s.cost.alpha_loss * net.bus(n).r);

    out.program = pb.build();
    return out;
}

void check_profile(const Scenario& s, const Profile& loads) {
    if (loads.p.rows() != s.network.size() || loads.p.cols() != s.horizon || loads.q.rows() != s.network.size() ||
        loads.q.cols() != s.horizon)
        throw Error(ErrorKind::invalid_argument,
                    fmt::format("profile is {}x{}, expected {}x{}", loads.p.rows(), loads.p.cols(), s.network.size(),
                                s.horizon));
}

void check_prices(const Scenario& s, const DlmpSet& prices) {
    if (prices.lp.rows() != s.network.size() || prices.lp.cols() != s.horizon || prices.lq.rows() != s.network.size() ||
        prices.lq.cols() != s.horizon)
        throw Error(ErrorKind::invalid_argument, "price matrices have the wrong shape");
    if (!prices.lp.allFinite() || !prices.lq.allFinite()) throw Error(ErrorKind::invalid_argument, "non-finite price");
}

}  // namespace

BuiltProgram build_central(const Scenario& s, int excluded_aggregator) {
    BuildRequest req;
    req.mode = LoadMode::variable;
    req.excluded = excluded_aggregator;
    return build_network(s, req);
}

BuiltProgram build_dso(const Scenario& s, const Profile& loads) {
    check_profile(s, loads);
    BuildRequest req;
    req.mode = LoadMode::fixed;
    req.loads = &loads;
    return build_network(s, req);
}

BuiltProgram build_dso_truncated(const Scenario& s, const Profile& loads, double K) {
    if (!(K > 0)) throw Error(ErrorKind::invalid_argument, "truncation bound must be positive");
    check_profile(s, loads);
    BuildRequest req;
    req.mode = LoadMode::fixed;
    req.loads = &loads;
    req.K = K;
    return build_network(s, req);
}

BuiltProgram build_dso_priced(const Scenario& s, const DlmpSet& prices) {
    check_prices(s, prices);
    BuildRequest req;
    req.mode = LoadMode::priced;
    req.prices = &prices;
    return build_network(s, req);
}

BuiltProgram build_dso_augmented(const Scenario& s, const DlmpSet& prices, const Profile& loads, double rho) {
    if (!(rho > 0)) throw Error(ErrorKind::invalid_argument, "penalty must be positive");
    check_prices(s, prices);
    check_profile(s, loads);
    BuildRequest req;
    req.mode = LoadMode::augmented;
    req.prices = &prices;
    req.loads = &loads;
    req.rho = rho;
    return build_network(s, req);
}

BuiltProgram build_la(const Scenario& s, int aggregator, const DlmpSet& prices, const std::optional<Proximal>& prox) {
    s.validate();
    check_prices(s, prices);
    if (aggregator < 0 || aggregator >= static_cast<int>(s.aggregators.size()))
        throw Error(ErrorKind::invalid_argument, fmt::format("no aggregator at index {}", aggregator));
    const Aggregator& agg = s.aggregators[aggregator];
    const int T = s.horizon;
    for (int n : agg.buses) {
        const LoadSpec* l = s.load_at(n);
        if (!l) continue;
        double top = 0.0;
        for (double v : l->p_max) top += v;
        if (top < l->energy)
            throw Error(ErrorKind::infeasible,
                        fmt::format("infeasible-LA: bus {} cannot reach energy {} with upper bounds summing to {}",
                                    n, l->energy, top),
                        n);
    }
    if (prox && (prox->reference.p.rows() != s.network.size() || prox->reference.p.cols() != T ||
                 prox->reference.q.rows() != s.network.size() || prox->reference.q.cols() != T))
        throw Error(ErrorKind::invalid_argument, "proximal reference has the wrong shape");
    if (prox && prox->rho < 0) throw Error(ErrorKind::invalid_argument, "proximal weight must be nonnegative");
    ProgramBuilder pb;
    BuiltProgram out;
    reset(out.index, s.network.size(), T);
    IndexMap& ix = out.index;
    for (int n : agg.buses) add_aggregator_bus(pb, ix, s, n);
    add_la_cost(pb, ix, agg, T);
    for (int n : agg.buses)
        for (int t = 0; t < T; ++t) {
            const int k = ix.at(n, t);
            pb.add_linear_cost(ix.p[k], prices.lp(n, t));
            pb.add_linear_cost(ix.q[k], prices.lq(n, t));
            if (prox) {
                const double rho = prox->rho;
                const double pr = prox->reference.p(n, t), qr = prox->reference.q(n, t);
                pb.add_quadratic_cost(ix.p[k], 0.5 * rho);
                pb.add_linear_cost(ix.p[k], -rho * pr);
                pb.add_constant_cost(0.5 * rho * pr * pr);
                pb.add_quadratic_cost(ix.q[k], 0.5 * rho);
                pb.add_linear_cost(ix.q[k], -rho * qr);
                pb.add_constant_cost(0.5 * rho * qr * qr);
            }
        }
    out.program = pb.build();
    return out;
}

}  // namespace dlmp::opf
