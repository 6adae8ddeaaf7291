#pragma once

#include <string>
#include <vector>

namespace dlmp::conic {

enum class Status { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(Status s);

struct SolveInfo {
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double solve_ms = 0.0;
    bool reduced_accuracy = false;  // stalled within 100x of the tolerances
};

// Sign conventions:
//  eq_duals[i]   derivative of the optimal value with respect to rhs of row i.
//  cone_duals[k] soc: (z0, z_1..z_m), a point of the cone, pairing with
//                (bound, parts); rsoc: (z_bound, z_bound2, z_parts...),
//                pairing with (bound, bound2, parts).
//                The Lagrangian subtracts the pairing.
//  lower/upper_duals  nonnegative multipliers of the variable bounds.
struct ConicSolution {
    Status status = Status::numerical_failure;
    std::vector<double> x;
    std::vector<double> eq_duals;
    std::vector<std::vector<double>> cone_duals;
    std::vector<double> lower_duals;
    std::vector<double> upper_duals;
    double objective = 0.0;
    double dual_objective = 0.0;
    SolveInfo info;

    bool ok() const { return status == Status::optimal; }
};

struct SolveOptions {
    double tol = 1e-8;
    int max_iter = 200;
    bool verbose = false;
};

// Reads the solver tolerance override from the environment, if set.
SolveOptions options_from_env(SolveOptions base = {});

}  // namespace dlmp::conic
