#pragma once

#include "dlmp/conic/program.hpp"
#include "dlmp/conic/solution.hpp"

namespace dlmp::conic {

// Absolute residuals of the optimality conditions, measured on the program as
// written (quadratic terms included).
struct KktReport {
    double stationarity = 0.0;
    double primal_feasibility = 0.0;
    double dual_feasibility = 0.0;
    double complementarity = 0.0;

    double max() const;
};

KktReport kkt_residuals(const ConicProgram& prog, const ConicSolution& sol);

}  // namespace dlmp::conic
