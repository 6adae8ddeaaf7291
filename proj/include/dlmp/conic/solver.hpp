#pragma once

#include <string>

#include "dlmp/conic/program.hpp"
#include "dlmp/conic/solution.hpp"

namespace dlmp::conic {

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    // When false, quadratic objective terms are rewritten as rotated-cone
    // epigraphs before the call.
    virtual bool accepts_quadratic_objective() const = 0;
    virtual ConicSolution solve(const ConicProgram& prog, const SolveOptions& opt) const = 0;
};

// Homogeneous self-dual embedding, Nesterov-Todd scaling, Mehrotra
// predictor-corrector, sparse LDL' on the regularized quasi-definite system.
// Diagonal quadratic objective terms are handled directly.
class InteriorPointBackend : public Backend {
public:
    std::string name() const override { return "hsde-ipm"; }
    bool accepts_quadratic_objective() const override { return true; }
    ConicSolution solve(const ConicProgram& prog, const SolveOptions& opt) const override;
};

const Backend& default_backend();

// Replaces each q_i x_i^2 objective term by q_i t_i with x_i^2 <= t_i.
// Appends the epigraph variables and cones after the original ones.
ConicProgram lower_quadratic(const ConicProgram& prog);

ConicSolution solve(const ConicProgram& prog, const SolveOptions& opt = {}, const Backend* backend = nullptr);

}  // namespace dlmp::conic
