#include "dlmp/report.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "dlmp/error.hpp"

namespace dlmp::report {

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string text_digest(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, fmt::format("cannot open {}", path));
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text_digest(bytes);
}

std::string opf_table(const Scenario& s, const opf::OpfSolution& sol) {
    const auto& x = sol.vars;
    const auto& l = sol.dlmps;
    std::ostringstream os;
    for (int t = 0; t < s.horizon; ++t) {
        os << fmt::format("t = {}\n", t);
        os << fmt::format("{:>3} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}\n", "n", "lam_p", "lam_q", "p", "q",
                          "f", "g", "ell", "v");
        for (int n = 0; n < s.network.size(); ++n) {
            if (n == s.network.root()) {
                os << fmt::format("{:>3} {:>8.3f} {:>8.3f} {:>8.3f} {:>8.3f} {:>8} {:>8} {:>8} {:>8.3f}\n", n,
                                  l.lp(n, t), l.lq(n, t), x.p(n, t), x.q(n, t), "-", "-", "-", x.v(n, t));
                continue;
            }
            os << fmt::format("{:>3} {:>8.3f} {:>8.3f} {:>8.3f} {:>8.3f} {:>8.3f} {:>8.3f} {:>8.3f} {:>8.3f}\n", n,
                              l.lp(n, t), l.lq(n, t), x.p(n, t), x.q(n, t), x.f(n, t), x.g(n, t), x.ell(n, t),
                              x.v(n, t));
        }
    }
    return os.str();
}

nlohmann::json solver_stats(const conic::ConicSolution& raw) {
    return {{"status", conic::to_string(raw.status)},
            {"iterations", raw.info.iterations},
            {"primal_residual", raw.info.primal_residual},
            {"dual_residual", raw.info.dual_residual},
            {"gap", raw.info.gap},
            {"reduced_accuracy", raw.info.reduced_accuracy}};
}

nlohmann::json period_costs(const Scenario& s, const opf::OpfVariables& x) {
    nlohmann::json out = nlohmann::json::array();
    const int root = s.network.root();
    for (int t = 0; t < s.horizon; ++t) {
        double supply = -x.p(root, t);
        out.push_back(s.cost.alpha[t] * supply + s.cost.beta[t] * supply * supply);
    }
    return out;
}

nlohmann::json opf_to_json(const Scenario& s, const opf::OpfSolution& sol) {
    const auto& x = sol.vars;
    return {{"status", conic::to_string(sol.status)},
            {"objective", sol.objective},
            {"period_costs", period_costs(s, x)},
            {"lambda_p", matrix_json(sol.dlmps.lp)},
            {"lambda_q", matrix_json(sol.dlmps.lq)},
            {"p", matrix_json(x.p)},
            {"q", matrix_json(x.q)},
            {"pc", matrix_json(x.pc)},
            {"pg", matrix_json(x.pg)},
            {"f", matrix_json(x.f)},
            {"g", matrix_json(x.g)},
            {"ell", matrix_json(x.ell)},
            {"v", matrix_json(x.v)}};
}

nlohmann::json exactness_to_json(const opf::ExactnessReport& r) {
    nlohmann::json slack = nlohmann::json::array();
    for (const auto& bp : r.slack) slack.push_back({{"bus", bp.bus}, {"period", bp.period}});
    return {{"max_gap", r.max_gap}, {"is_exact", r.is_exact}, {"slack", slack}};
}

nlohmann::json coordination_to_json(const coord::CoordinationResult& r, double central_objective) {
    nlohmann::json j = {{"algo", coord::to_string(r.algo)},
                        {"status", coord::to_string(r.status)},
                        {"rounds", r.logs.size()},
                        {"final_residual", r.final_residual()},
                        {"final_objective", r.final_objective()},
                        {"central_objective", central_objective},
                        {"objective_gap", std::abs(r.final_objective() - central_objective)},
                        {"lambda_p", matrix_json(r.lambda.lp)},
                        {"lambda_q", matrix_json(r.lambda.lq)}};
    int infeasible = 0;
    for (const auto& l : r.logs) infeasible += l.dso_feasible ? 0 : 1;
    j["infeasible_rounds"] = infeasible;
    return j;
}

nlohmann::json settlement_to_json(const mech::Settlement& st) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : st.rows)
        rows.push_back({{"aggregator", r.id},
                        {"nodes", r.buses},
                        {"payment_p", r.payment_p},
                        {"payment_q", r.payment_q},
                        {"payment", r.payment},
                        {"deviated", r.deviated},
                        {"penalty", r.penalty}});
    return {{"rows", rows},
            {"recomputed", st.recomputed},
            {"truncated", st.truncated},
            {"tau_pen", st.tau_pen},
            {"total_payment", st.total_payment()},
            {"total_penalty", st.total_penalty()}};
}

nlohmann::json vcg_to_json(const mech::VcgReport& v) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : v.rows)
        rows.push_back({{"aggregator", r.id},
                        {"nodes", r.buses},
                        {"others_cost_full", r.others_cost_full},
                        {"clarke_tax", finite_or_null(r.clarke_tax)},
                        {"vcg_payment", finite_or_null(r.vcg_payment)},
                        {"counterfactual", r.counterfactual_feasible ? "feasible" : "counterfactual-infeasible"}});
    return {{"full_objective", v.full_objective},
            {"dso_cost_full", v.dso_cost_full},
            {"la_cost_full", v.la_cost_full},
            {"solve_count", v.solve_count},
            {"rows", rows}};
}

nlohmann::json example1_to_json(const mech::Example1Result& r) {
    auto side = [](const mech::Example1Side& s) {
        return nlohmann::json{{"announced_p_max", s.p_max},
                              {"consumption", {s.x.p(1, 0), s.x.p(1, 1)}},
                              {"lambda_p", {s.lambda.lp(1, 0), s.lambda.lp(1, 1)}},
                              {"utility", s.phi_signed},
                              {"payment", s.payment},
                              {"total", s.total},
                              {"dso_cost", s.dso_cost}};
    };
    return {{"truthful", side(r.truthful)}, {"cheated", side(r.cheated)}, {"cheating_pays", r.cheating_pays()}};
}

}  // namespace dlmp::report
