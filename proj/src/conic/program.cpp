#include "dlmp/conic/program.hpp"

#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "dlmp/conic/solution.hpp"
#include "dlmp/conic/solver.hpp"
#include "dlmp/error.hpp"

namespace dlmp::conic {

const char* to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

SolveOptions options_from_env(SolveOptions base) {
    if (const char* v = std::getenv("DLMP_SOLVER_TOL")) {
        char* end = nullptr;
        double tol = std::strtod(v, &end);
        if (end != v && tol > 0 && std::isfinite(tol)) base.tol = tol;
    }
    return base;
}

bool ConicProgram::has_quadratic() const {
    for (double q : objective.quadratic)
        if (q != 0.0) return true;
    return false;
}

double ConicProgram::evaluate(const Affine& a, const std::vector<double>& x) const {
    double v = a.constant;
    for (const Term& t : a.terms) v += t.coef * x[static_cast<std::size_t>(t.var)];
    return v;
}

double ConicProgram::evaluate_objective(const std::vector<double>& x) const {
    double v = objective.constant;
    for (std::size_t i = 0; i < vars.size(); ++i)
        v += objective.linear[i] * x[i] + objective.quadratic[i] * x[i] * x[i];
    return v;
}

void ProgramBuilder::check(VarId v) const {
    if (v < 0 || v >= num_vars())
        throw Error(ErrorKind::index_out_of_range, fmt::format("variable index {} out of range ({} vars)", v, num_vars()));
}

void ProgramBuilder::check(const Affine& a) const {
    for (const Term& t : a.terms) check(t.var);
    if (!std::isfinite(a.constant)) throw Error(ErrorKind::invalid_argument, "non-finite constant in expression");
}

VarId ProgramBuilder::add_var(std::string name, double lower, double upper) {
    if (lower > upper) throw Error(ErrorKind::invalid_argument, fmt::format("variable {}: lower bound above upper", name));
    prog_.vars.push_back({std::move(name), lower, upper});
    prog_.objective.linear.push_back(0.0);
    prog_.objective.quadratic.push_back(0.0);
    return num_vars() - 1;
}

void ProgramBuilder::set_bounds(VarId v, double lower, double upper) {
    check(v);
    if (lower > upper) throw Error(ErrorKind::invalid_argument, "lower bound above upper");
    prog_.vars[v].lower = lower;
    prog_.vars[v].upper = upper;
}

RowId ProgramBuilder::add_eq(Affine lhs, double rhs, std::string label) {
    check(lhs);
    prog_.eqs.push_back({std::move(lhs), rhs, std::move(label)});
    return num_eqs() - 1;
}

ConeId ProgramBuilder::add_soc(std::vector<Affine> parts, Affine bound, std::string label) {
    for (const Affine& a : parts) check(a);
    check(bound);
    ConeRow c;
    c.kind = ConeKind::soc;
    c.parts = std::move(parts);
    c.bound = std::move(bound);
    c.label = std::move(label);
    prog_.cones.push_back(std::move(c));
    return num_cones() - 1;
}

ConeId ProgramBuilder::add_rsoc(std::vector<Affine> parts, Affine bound, Affine bound2, std::string label) {
    for (const Affine& a : parts) check(a);
    check(bound);
    check(bound2);
    ConeRow c;
    c.kind = ConeKind::rsoc;
    c.parts = std::move(parts);
    c.bound = std::move(bound);
    c.bound2 = std::move(bound2);
    c.label = std::move(label);
    prog_.cones.push_back(std::move(c));
    return num_cones() - 1;
}

void ProgramBuilder::add_linear_cost(VarId v, double coef) {
    check(v);
    prog_.objective.linear[v] += coef;
}

void ProgramBuilder::add_quadratic_cost(VarId v, double coef) {
    check(v);
    if (coef < 0) throw Error(ErrorKind::negative_quadratic, fmt::format("negative quadratic coefficient on variable {}", v));
    prog_.objective.quadratic[v] += coef;
}

void ProgramBuilder::add_constant_cost(double c) { prog_.objective.constant += c; }

VarId ProgramBuilder::add_square_cost(const Affine& expr, double coef, std::string name) {
    check(expr);
    if (coef < 0) throw Error(ErrorKind::negative_quadratic, "negative quadratic coefficient");
    VarId r = add_var(std::move(name));
    Affine row = Affine::var(r, 1.0) - expr;
    double rhs = -row.constant;
    row.constant = 0.0;
    add_eq(std::move(row), rhs, "square-cost");
    add_quadratic_cost(r, coef);
    return r;
}

ConicProgram ProgramBuilder::build() const {
    ConicProgram p = prog_;
    // Fold expression constants of equality rows into the right-hand side.
    for (EqualityRow& e : p.eqs) {
        e.rhs -= e.lhs.constant;
        e.lhs.constant = 0.0;
    }
    return p;
}

ConicProgram lower_quadratic(const ConicProgram& prog) {
    ConicProgram out = prog;
    const int n = prog.num_vars();
    for (int i = 0; i < n; ++i) {
        double q = prog.objective.quadratic[i];
        if (q == 0.0) continue;
        out.objective.quadratic[i] = 0.0;
        int t = out.num_vars();
        out.vars.push_back({"epi", -kInf, kInf});
        out.objective.linear.push_back(q);
        out.objective.quadratic.push_back(0.0);
        ConeRow c;
        c.kind = ConeKind::rsoc;
        c.parts.push_back(Affine::var(i));
        c.bound = Affine::var(t);
        c.bound2 = Affine(1.0);
        c.label = "epigraph";
        out.cones.push_back(std::move(c));
    }
    return out;
}

}  // namespace dlmp::conic
