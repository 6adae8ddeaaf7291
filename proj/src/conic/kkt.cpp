#include "dlmp/conic/kkt.hpp"

#include <algorithm>
#include <cmath>

namespace dlmp::conic {

double KktReport::max() const {
    return std::max({stationarity, primal_feasibility, dual_feasibility, complementarity});
}

KktReport kkt_residuals(const ConicProgram& prog, const ConicSolution& sol) {
    KktReport r;
    const std::size_t n = prog.vars.size();
    const std::vector<double>& x = sol.x;
    std::vector<double> grad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        grad[i] = prog.objective.linear[i] + 2.0 * prog.objective.quadratic[i] * x[i];
    auto sub = [&](const Affine& a, double w) {
        for (const Term& t : a.terms) grad[static_cast<std::size_t>(t.var)] -= w * t.coef;
    };
    for (std::size_t i = 0; i < prog.eqs.size(); ++i) {
        const EqualityRow& e = prog.eqs[i];
        sub(e.lhs, sol.eq_duals[i]);
        double res = prog.evaluate(e.lhs, x) - e.rhs;
        r.primal_feasibility = std::max(r.primal_feasibility, std::abs(res));
    }
    for (std::size_t k = 0; k < prog.cones.size(); ++k) {
        const ConeRow& c = prog.cones[k];
        const std::vector<double>& z = sol.cone_duals[k];
        double pairing = 0.0;
        double pn = 0.0;
        if (c.kind == ConeKind::soc) {
            double b = prog.evaluate(c.bound, x);
            sub(c.bound, z[0]);
            pairing += z[0] * b;
            double zn = 0.0;
            for (std::size_t j = 0; j < c.parts.size(); ++j) {
                double u = prog.evaluate(c.parts[j], x);
                sub(c.parts[j], z[j + 1]);
                pairing += z[j + 1] * u;
                pn += u * u;
                zn += z[j + 1] * z[j + 1];
            }
            r.primal_feasibility = std::max(r.primal_feasibility, std::sqrt(pn) - b);
            r.dual_feasibility = std::max(r.dual_feasibility, std::sqrt(zn) - z[0]);
        } else {
            double a = prog.evaluate(c.bound, x), b = prog.evaluate(c.bound2, x);
            sub(c.bound, z[0]);
            sub(c.bound2, z[1]);
            pairing += z[0] * a + z[1] * b;
            double zn = (z[0] - z[1]) * (z[0] - z[1]);
            for (std::size_t j = 0; j < c.parts.size(); ++j) {
                double u = prog.evaluate(c.parts[j], x);
                sub(c.parts[j], z[j + 2]);
                pairing += z[j + 2] * u;
                pn += u * u;
                zn += z[j + 2] * z[j + 2];
            }
            // ||(2u, a - b)|| <= a + b, and the matching dual cone
            double viol = std::sqrt(4 * pn + (a - b) * (a - b)) - (a + b);
            r.primal_feasibility = std::max(r.primal_feasibility, viol);
            r.dual_feasibility = std::max(r.dual_feasibility, std::sqrt(zn) - (z[0] + z[1]));
        }
        r.complementarity = std::max(r.complementarity, std::abs(pairing));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Variable& v = prog.vars[i];
        double lo = sol.lower_duals[i], up = sol.upper_duals[i];
        grad[i] += up - lo;
        if (std::isfinite(v.lower)) {
            r.primal_feasibility = std::max(r.primal_feasibility, v.lower - x[i]);
            r.complementarity = std::max(r.complementarity, std::abs(lo * (x[i] - v.lower)));
        }
        if (std::isfinite(v.upper)) {
            r.primal_feasibility = std::max(r.primal_feasibility, x[i] - v.upper);
            r.complementarity = std::max(r.complementarity, std::abs(up * (v.upper - x[i])));
        }
        r.dual_feasibility = std::max({r.dual_feasibility, -lo, -up});
    }
    for (double g : grad) r.stationarity = std::max(r.stationarity, std::abs(g));
    return r;
}

}  // namespace dlmp::conic
