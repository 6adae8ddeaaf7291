#include "dlmp/coordination.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "dlmp/conic/solver.hpp"
#include "dlmp/error.hpp"

namespace dlmp::coord {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

DlmpSet zero_prices(const Scenario& s) {
    return {Matrix::Zero(s.network.size(), s.horizon), Matrix::Zero(s.network.size(), s.horizon)};
}

Message make_message(const Scenario& s, Message::Kind kind, int round, int sender, int receiver,
                     const Aggregator& agg, const Matrix& p, const Matrix& q) {
    Message m;
    m.kind = kind;
    m.round = round;
    m.sender = sender;
    m.receiver = receiver;
    for (int n : agg.buses)
        for (int t = 0; t < s.horizon; ++t) m.entries.push_back({n, t, p(n, t), q(n, t)});
    return m;
}

// Non-root rows of row(x0) + x_a.
void coupling_rows(const Scenario& s, const OpfVariables& x0, const Profile& x_a, Matrix& rp, Matrix& rq) {
    opf::balance_expressions(s, x0, rp, rq);
    rp += x_a.p;
    rq += x_a.q;
    rp.row(s.network.root()).setZero();
    rq.row(s.network.root()).setZero();
}

// Converged once the residual is small and the objective has settled for
// enough consecutive rounds.
class StopRule {
public:
    explicit StopRule(const AlgoConfig& cfg) : cfg_(cfg) {}
    bool update(double residual, double objective, double extra_change = 0.0) {
        bool settled = std::isfinite(last_) && std::abs(objective - last_) <= cfg_.tol_obj &&
                       residual <= cfg_.tol_primal && extra_change <= cfg_.tol_primal;
        count_ = settled ? count_ + 1 : 0;
        last_ = objective;
        return cfg_.stop_early && count_ >= cfg_.stable_rounds;
    }

private:
    const AlgoConfig& cfg_;
    double last_ = std::numeric_limits<double>::quiet_NaN();
    int count_ = 0;
};

struct Round {
    Profile x_a;
    double la_ms = 0.0;
};

// All aggregators respond to the current prices; messages go through the bus.
Round best_responses(const Scenario& s, const DlmpSet& prices, const Profile* base, double rho, int round,
                     MessageBus& bus, const AlgoConfig& cfg) {
    Round out;
    out.x_a = Profile::zeros(s.network.size(), s.horizon);
    auto t0 = Clock::now();
    for (std::size_t a = 0; a < s.aggregators.size(); ++a) {
        const Aggregator& agg = s.aggregators[a];
        if (cfg.keep_transcript) {
            bus.post(make_message(s, Message::Kind::price_signal, round, kDso, agg.id, agg, prices.lp, prices.lq));
            if (base)
                bus.post(make_message(s, Message::Kind::base_profile, round, kDso, agg.id, agg, base->p, base->q));
        }
        std::optional<opf::Proximal> prox;
        if (base) prox = opf::Proximal{*base, rho};
        Profile r = la_best_response(s, static_cast<int>(a), prices, prox, cfg.solver);
        for (int n : agg.buses) {
            out.x_a.p.row(n) = r.p.row(n);
            out.x_a.q.row(n) = r.q.row(n);
        }
        if (cfg.keep_transcript)
            bus.post(make_message(s, Message::Kind::profile_report, round, agg.id, kDso, agg, r.p, r.q));
    }
    out.la_ms = ms_since(t0);
    return out;
}

void set_root_prices(const Scenario& s, DlmpSet& lambda, const OpfSolution& dso) {
    const int root = s.network.root();
    if (dso.dlmps.lp.size() == 0) return;
    lambda.lp.row(root) = dso.dlmps.lp.row(root);
    lambda.lq.row(root) = dso.dlmps.lq.row(root);
}

OpfSolution solve_program(const Scenario& s, const opf::BuiltProgram& bp, const conic::SolveOptions& opt) {
    return opf::extract(s, bp, conic::solve(bp.program, opt));
}

void finish(CoordinationResult& r, MessageBus& bus) { r.transcript = bus.transcript(); }

}  // namespace

const char* to_string(Message::Kind kind) {
    switch (kind) {
        case Message::Kind::price_signal: return "price-signal";
        case Message::Kind::base_profile: return "base-profile";
        case Message::Kind::profile_report: return "profile-report";
    }
    return "?";
}

const char* to_string(Algo a) {
    switch (a) {
        case Algo::dual_ascent: return "dual-ascent";
        case Algo::admm: return "admm";
        case Algo::pdgs: return "pdgs";
    }
    return "?";
}

Algo algo_from_string(const std::string& name) {
    if (name == "dual-ascent") return Algo::dual_ascent;
    if (name == "admm") return Algo::admm;
    if (name == "pdgs") return Algo::pdgs;
    throw Error(ErrorKind::invalid_argument, fmt::format("unknown algorithm '{}'", name));
}

const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::converged: return "converged";
        case RunStatus::max_iter: return "max-iter-exceeded";
        case RunStatus::diverged: return "divergence-detected";
        case RunStatus::failed: return "failed";
    }
    return "?";
}

bool transcript_is_local(const Scenario& s, const std::vector<Message>& transcript) {
    for (const Message& m : transcript) {
        int agent = m.sender == kDso ? m.receiver : m.sender;
        const Aggregator* agg = nullptr;
        for (const Aggregator& a : s.aggregators)
            if (a.id == agent) agg = &a;
        if (!agg) return false;
        std::set<int> own(agg->buses.begin(), agg->buses.end());
        for (const Message::Entry& e : m.entries)
            if (!own.count(e.bus)) return false;
    }
    return true;
}

Profile la_best_response(const Scenario& s, int aggregator, const DlmpSet& prices,
                         const std::optional<opf::Proximal>& prox, const conic::SolveOptions& opt) {
    opf::BuiltProgram bp = opf::build_la(s, aggregator, prices, prox);
    conic::ConicSolution sol = conic::solve(bp.program, opt);
    if (sol.status == conic::Status::infeasible)
        throw Error(ErrorKind::infeasible, fmt::format("infeasible-LA: aggregator {}", s.aggregators[aggregator].id));
    if (sol.status != conic::Status::optimal)
        throw Error(ErrorKind::solver_failure,
                    fmt::format("aggregator {} subproblem: {}", s.aggregators[aggregator].id, conic::to_string(sol.status)));
    OpfSolution x = opf::extract(s, bp, sol);
    return Profile{x.vars.p, x.vars.q};
}

double coupling_residual(const Scenario& s, const OpfVariables& x0, const Profile& x_a) {
    Matrix rp, rq;
    coupling_rows(s, x0, x_a, rp, rq);
    return std::sqrt(rp.squaredNorm() + rq.squaredNorm());
}

double total_cost(const Scenario& s, const OpfVariables& x0, const Profile& x_a) {
    return opf::dso_cost(s, x0) + opf::total_la_cost(s, x_a);
}

CoordinationResult run_dual_ascent(const Scenario& s, const AlgoConfig& cfg) {
    if (!(cfg.alpha0 >= 0)) throw Error(ErrorKind::invalid_argument, "step size must be nonnegative");
    CoordinationResult out;
    out.algo = Algo::dual_ascent;
    MessageBus bus;
    StopRule stop(cfg);
    DlmpSet lambda = cfg.initial_prices.value_or(zero_prices(s));
    DlmpSet prev = lambda;
    Matrix prev_rp, prev_rq;
    double prev_step = 0.0;

    for (int k = 0; k < cfg.max_iter; ++k) {
        Round la = best_responses(s, lambda, nullptr, 0.0, k, bus, cfg);
        auto t0 = Clock::now();
        OpfSolution dso = solve_program(s, opf::build_dso_priced(s, lambda), cfg.solver);
        // An unbounded network step means the last price move overshot:
        // back off along the same direction.
        int halvings = 0;
        while (dso.status == conic::Status::unbounded && k > 0 && halvings < 30) {
            prev_step *= 0.5;
            lambda.lp = prev.lp + prev_step * prev_rp;
            lambda.lq = prev.lq + prev_step * prev_rq;
            dso = solve_program(s, opf::build_dso_priced(s, lambda), cfg.solver);
            ++halvings;
        }
        double dso_ms = ms_since(t0);
        if (!dso.ok()) {
            out.status = RunStatus::failed;
            break;
        }
        if (halvings > 0) {
            la = best_responses(s, lambda, nullptr, 0.0, k, bus, cfg);
            out.logs.back().lambda = lambda;
            out.logs.back().step = prev_step;
        }
        OpfVariables x0 = dso.vars;
        Matrix rp, rq;
        coupling_rows(s, x0, la.x_a, rp, rq);
        const double step = cfg.alpha0 / (k + 1);
        prev = lambda;
        prev_rp = rp;
        prev_rq = rq;
        prev_step = step;
        lambda.lp += step * rp;
        lambda.lq += step * rq;
        set_root_prices(s, lambda, dso);

        IterationLog log;
        log.round = k;
        log.lambda = lambda;
        log.x_a = la.x_a;
        log.primal_residual = std::sqrt(rp.squaredNorm() + rq.squaredNorm());
        log.objective = total_cost(s, x0, la.x_a);
        log.step = step;
        log.la_ms = la.la_ms;
        log.dso_ms = dso_ms;
        out.logs.push_back(log);
        out.x0 = x0;
        out.x_a = la.x_a;
        out.lambda = lambda;
        out.last_dso = dso;

        // Divergence: the residual level, averaged to ride out the oscillation
        // of non-smooth responses, grew tenfold over 50 rounds.
        auto window_mean = [&](int last) {
            double sum = 0.0;
            for (int j = last - 24; j <= last; ++j) sum += out.logs[j].primal_residual;
            return sum / 25.0;
        };
        if (k >= 74 && window_mean(k) > 10.0 * window_mean(k - 50) && window_mean(k - 50) > cfg.tol_primal) {
            out.status = RunStatus::diverged;
            break;
        }
        if (stop.update(log.primal_residual, log.objective)) {
            out.status = RunStatus::converged;
            break;
        }
    }
    finish(out, bus);
    return out;
}

CoordinationResult run_admm(const Scenario& s, const AlgoConfig& cfg) {
    if (!(cfg.rho > 0)) throw Error(ErrorKind::invalid_argument, "ADMM penalty must be positive");
    CoordinationResult out;
    out.algo = Algo::admm;
    MessageBus bus;
    StopRule stop(cfg);
    const int N = s.network.size(), T = s.horizon, root = s.network.root();
    DlmpSet lambda = cfg.initial_prices.value_or(zero_prices(s));
    // Flat start for the network state.
    OpfVariables x0 = OpfVariables::zeros(N, T);
    x0.v.setConstant(s.network.v0());

    for (int k = 0; k < cfg.max_iter; ++k) {
        // Base profile: the net loads that would close every balance at x0.
        Matrix rp, rq;
        opf::balance_expressions(s, x0, rp, rq);
        Profile base{-rp, -rq};
        base.p.row(root).setZero();
        base.q.row(root).setZero();

        Round la = best_responses(s, lambda, &base, cfg.rho, k, bus, cfg);
        auto t0 = Clock::now();
        OpfSolution dso = solve_program(s, opf::build_dso_augmented(s, lambda, la.x_a, cfg.rho), cfg.solver);
        double dso_ms = ms_since(t0);
        if (!dso.ok()) {
            out.status = RunStatus::failed;
            break;
        }
        x0 = dso.vars;
        coupling_rows(s, x0, la.x_a, rp, rq);
        lambda.lp += cfg.rho * rp;
        lambda.lq += cfg.rho * rq;
        set_root_prices(s, lambda, dso);

        IterationLog log;
        log.round = k;
        log.lambda = lambda;
        log.x_a = la.x_a;
        log.primal_residual = std::sqrt(rp.squaredNorm() + rq.squaredNorm());
        log.objective = total_cost(s, x0, la.x_a);
        log.step = cfg.rho;
        log.la_ms = la.la_ms;
        log.dso_ms = dso_ms;
        out.logs.push_back(log);
        out.x0 = x0;
        out.x_a = la.x_a;
        out.lambda = lambda;
        out.last_dso = dso;
        if (stop.update(log.primal_residual, log.objective)) {
            out.status = RunStatus::converged;
            break;
        }
    }
    finish(out, bus);
    return out;
}

CoordinationResult run_pdgs(const Scenario& s, const AlgoConfig& cfg) {
    if (!(cfg.K > 0)) throw Error(ErrorKind::invalid_argument, "truncation bound must be positive");
    CoordinationResult out;
    out.algo = Algo::pdgs;
    MessageBus bus;
    StopRule stop(cfg);
    const int N = s.network.size(), T = s.horizon;
    DlmpSet avg_lambda = cfg.initial_prices.value_or(zero_prices(s));
    Profile avg_x = Profile::zeros(N, T);

    for (int k = 0; k < cfg.max_iter; ++k) {
        Round la = best_responses(s, avg_lambda, nullptr, 0.0, k, bus, cfg);
        const double w = 1.0 / (k + 1);
        avg_x.p = (1 - w) * avg_x.p + w * la.x_a.p;
        avg_x.q = (1 - w) * avg_x.q + w * la.x_a.q;

        auto t0 = Clock::now();
        OpfSolution dso = opf::solve_dso(s, avg_x, cfg.solver);
        const bool feasible = dso.ok();
        if (!feasible) dso = opf::solve_dso_truncated(s, avg_x, cfg.K, cfg.solver);
        double dso_ms = ms_since(t0);
        if (!dso.ok()) {
            out.status = RunStatus::failed;
            break;
        }
        DlmpSet before = avg_lambda;
        avg_lambda.lp = (1 - w) * avg_lambda.lp + w * dso.dlmps.lp;
        avg_lambda.lq = (1 - w) * avg_lambda.lq + w * dso.dlmps.lq;
        double dual_change = std::max((avg_lambda.lp - before.lp).cwiseAbs().maxCoeff(),
                                      (avg_lambda.lq - before.lq).cwiseAbs().maxCoeff());

        IterationLog log;
        log.round = k;
        log.lambda = avg_lambda;
        log.x_a = avg_x;
        log.primal_residual = coupling_residual(s, dso.vars, avg_x);
        log.objective = total_cost(s, dso.vars, avg_x);
        log.dso_feasible = feasible;
        log.step = w;
        log.la_ms = la.la_ms;
        log.dso_ms = dso_ms;
        out.logs.push_back(log);
        out.x0 = dso.vars;
        out.x_a = avg_x;
        out.lambda = avg_lambda;
        out.last_dso = dso;
        if (stop.update(log.primal_residual, log.objective, k > 0 ? dual_change : 0.0)) {
            out.status = RunStatus::converged;
            break;
        }
    }
    finish(out, bus);
    return out;
}

CoordinationResult run(const Scenario& s, const AlgoConfig& cfg) {
    switch (cfg.algo) {
        case Algo::dual_ascent: return run_dual_ascent(s, cfg);
        case Algo::admm: return run_admm(s, cfg);
        case Algo::pdgs: return run_pdgs(s, cfg);
    }
    throw Error(ErrorKind::invalid_argument, "unknown algorithm");
}

double FixedPointReport::max() const {
    double m = std::max(std::abs(dso_gap), primal_residual);
    for (double g : la_gap) m = std::max(m, std::abs(g));
    return m;
}

FixedPointReport check_fixed_point(const Scenario& s, const OpfVariables& x0, const Profile& x_a,
                                   const DlmpSet& lambda, const conic::SolveOptions& opt) {
    FixedPointReport r;
    for (std::size_t a = 0; a < s.aggregators.size(); ++a) {
        double value = opf::la_cost(s, static_cast<int>(a), x_a);
        for (int n : s.aggregators[a].buses)
            for (int t = 0; t < s.horizon; ++t)
                value += lambda.lp(n, t) * x_a.p(n, t) + lambda.lq(n, t) * x_a.q(n, t);
        opf::BuiltProgram bp = opf::build_la(s, static_cast<int>(a), lambda);
        conic::ConicSolution best = conic::solve(bp.program, opt);
        r.la_gap.push_back(best.status == conic::Status::optimal ? value - best.objective
                                                                  : std::numeric_limits<double>::infinity());
    }
    Matrix rp, rq;
    opf::balance_expressions(s, x0, rp, rq);
    double value = opf::dso_cost(s, x0);
    for (int n = 0; n < s.network.size(); ++n) {
        if (n == s.network.root()) continue;
        for (int t = 0; t < s.horizon; ++t) value += lambda.lp(n, t) * rp(n, t) + lambda.lq(n, t) * rq(n, t);
    }
    opf::BuiltProgram bp = opf::build_dso_priced(s, lambda);
    conic::ConicSolution best = conic::solve(bp.program, opt);
    r.dso_gap = best.status == conic::Status::optimal ? value - best.objective
                                                      : std::numeric_limits<double>::infinity();
    r.primal_residual = coupling_residual(s, x0, x_a);
    return r;
}

void write_curves_csv(const CoordinationResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", path));
    out << "round,primal_residual,objective,dso_feasible,step,la_ms,dso_ms\n";
    for (const IterationLog& l : r.logs)
        out << fmt::format("{},{:.12g},{:.12g},{},{:.6g},{:.3f},{:.3f}\n", l.round, l.primal_residual, l.objective,
                           l.dso_feasible ? 1 : 0, l.step, l.la_ms, l.dso_ms);
}

void write_transcript_csv(const CoordinationResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", path));
    out << "round,kind,sender,receiver,bus,period,p,q\n";
    for (const Message& m : r.transcript)
        for (const Message::Entry& e : m.entries)
            out << fmt::format("{},{},{},{},{},{},{:.12g},{:.12g}\n", m.round, to_string(m.kind), m.sender,
                               m.receiver, e.bus, e.period, e.p, e.q);
}

}  // namespace dlmp::coord
