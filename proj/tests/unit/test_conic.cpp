#include <doctest.h>

#include <cmath>

#include "dlmp/conic/kkt.hpp"
#include "dlmp/conic/solver.hpp"
#include "dlmp/error.hpp"

using namespace dlmp::conic;

TEST_CASE("lp with one equality reports the equality dual") {
    ProgramBuilder pb;
    VarId x = pb.add_var("x", 0, kInf);
    VarId y = pb.add_var("y", 0, kInf);
    pb.add_linear_cost(x, 1);
    pb.add_linear_cost(y, 1);
    RowId r = pb.add_eq(Affine::var(x) + Affine::var(y), 2.0);
    auto prog = pb.build();
    auto sol = solve(prog);
    REQUIRE(sol.status == Status::optimal);
    CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(sol.eq_duals[r] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(kkt_residuals(prog, sol).max() < 1e-6);
}

TEST_CASE("norm bound") {
    // min t s.t. ||(3, 4)|| <= t
    ProgramBuilder pb;
    VarId t = pb.add_var("t");
    pb.add_linear_cost(t, 1);
    pb.add_soc({Affine(3.0), Affine(4.0)}, Affine::var(t));
    auto prog = pb.build();
    auto sol = solve(prog);
    REQUIRE(sol.status == Status::optimal);
    CHECK(sol.x[t] == doctest::Approx(5.0).epsilon(1e-8));
    CHECK(kkt_residuals(prog, sol).max() < 1e-6);
}

TEST_CASE("contradictory equalities are infeasible") {
    ProgramBuilder pb;
    VarId x = pb.add_var("x");
    pb.add_eq(Affine::var(x), 1.0);
    pb.add_eq(Affine::var(x), 2.0);
    auto sol = solve(pb.build());
    CHECK(sol.status == Status::infeasible);
}

TEST_CASE("bound conflict through a cone is infeasible") {
    // ||x|| <= 1 with x >= 2
    ProgramBuilder pb;
    VarId x = pb.add_var("x", 2.0, kInf);
    pb.add_linear_cost(x, 1);
    pb.add_soc({Affine::var(x)}, Affine(1.0));
    CHECK(solve(pb.build()).status == Status::infeasible);
}

TEST_CASE("unbounded below") {
    ProgramBuilder pb;
    VarId x = pb.add_var("x", -kInf, 0.0);
    pb.add_linear_cost(x, 1);
    CHECK(solve(pb.build()).status == Status::unbounded);
}

TEST_CASE("index checks") {
    ProgramBuilder pb;
    pb.add_var("x");
    CHECK_THROWS_AS(pb.add_eq(Affine::var(3), 1.0), dlmp::Error);
    CHECK_THROWS_AS(pb.add_quadratic_cost(0, -1.0), dlmp::Error);
}

TEST_CASE("quadratic objective matches the closed form") {
    // min sum_i w_i (x_i - a_i)^2  s.t.  sum x_i = 1
    // closed form: x_i = a_i - mu / (2 w_i), mu = 2 (sum a - 1) / sum(1/w)
    const double w[3] = {1.0, 2.0, 4.0};
    const double a[3] = {0.5, -0.25, 1.0};
    ProgramBuilder pb;
    Affine sum;
    VarId v[3];
    for (int i = 0; i < 3; ++i) {
        v[i] = pb.add_var();
        pb.add_quadratic_cost(v[i], w[i]);
        pb.add_linear_cost(v[i], -2 * w[i] * a[i]);
        pb.add_constant_cost(w[i] * a[i] * a[i]);
        sum.add(v[i], 1.0);
    }
    RowId r = pb.add_eq(sum, 1.0);
    auto prog = pb.build();
    auto sol = solve(prog);
    REQUIRE(sol.status == Status::optimal);
    double suma = a[0] + a[1] + a[2], sinv = 1 / w[0] + 1 / w[1] + 1 / w[2];
    double mu = 2 * (suma - 1) / sinv;
    double obj = 0;
    for (int i = 0; i < 3; ++i) {
        double xi = a[i] - mu / (2 * w[i]);
        CHECK(sol.x[v[i]] == doctest::Approx(xi).epsilon(1e-7));
        obj += w[i] * (xi - a[i]) * (xi - a[i]);
    }
    CHECK(sol.objective == doctest::Approx(obj).epsilon(1e-7));
    // d obj / d rhs = -mu
    CHECK(sol.eq_duals[r] == doctest::Approx(-mu).epsilon(1e-6));
    CHECK(kkt_residuals(prog, sol).max() < 1e-6);
}

TEST_CASE("rotated cone") {
    // min a + b s.t. 1 <= a b (u = 1), minimizer a = b = 1
    ProgramBuilder pb;
    VarId a = pb.add_var("a"), b = pb.add_var("b");
    pb.add_linear_cost(a, 1);
    pb.add_linear_cost(b, 1);
    pb.add_rsoc({Affine(1.0)}, Affine::var(a), Affine::var(b));
    auto prog = pb.build();
    auto sol = solve(prog);
    REQUIRE(sol.status == Status::optimal);
    CHECK(sol.x[a] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.x[b] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(kkt_residuals(prog, sol).max() < 1e-6);
}

namespace {

// Forces the epigraph route through the same native method.
class LinearOnlyBackend : public Backend {
public:
    std::string name() const override { return "linear-only"; }
    bool accepts_quadratic_objective() const override { return false; }
    ConicSolution solve(const ConicProgram& prog, const SolveOptions& opt) const override {
        REQUIRE_FALSE(prog.has_quadratic());
        return InteriorPointBackend().solve(prog, opt);
    }
};

// min sum_i w_i (x_i - a_i)^2 + |(x_0, x_1)| s.t. sum x = b, x_2 >= 0.2
ConicProgram mixed_program(double b, RowId* row = nullptr) {
    const double w[3] = {1.0, 2.0, 4.0};
    const double a[3] = {0.5, -0.25, 1.0};
    ProgramBuilder pb;
    Affine sum;
    VarId v[3];
    for (int i = 0; i < 3; ++i) {
        v[i] = pb.add_var({}, i == 2 ? 0.2 : -kInf);
        pb.add_quadratic_cost(v[i], w[i]);
        pb.add_linear_cost(v[i], -2 * w[i] * a[i]);
        sum.add(v[i], 1.0);
    }
    VarId t = pb.add_var();
    pb.add_linear_cost(t, 1.0);
    pb.add_soc({Affine::var(v[0]), Affine::var(v[1])}, Affine::var(t));
    RowId r = pb.add_eq(sum, b);
    if (row) *row = r;
    return pb.build();
}

}  // namespace

TEST_CASE("epigraph lowering gives the same optimum") {
    RowId r;
    ConicProgram prog = mixed_program(1.0, &r);
    ConicSolution direct = solve(prog);
    LinearOnlyBackend lin;
    ConicSolution lowered = solve(prog, {}, &lin);
    REQUIRE(direct.ok());
    REQUIRE(lowered.ok());
    CHECK(lowered.x.size() == direct.x.size());
    // A 1e-8 objective tolerance pins x only to about its square root.
    for (std::size_t i = 0; i < direct.x.size(); ++i) CHECK(std::abs(lowered.x[i] - direct.x[i]) < 1e-5);
    CHECK(lowered.objective == doctest::Approx(direct.objective).epsilon(1e-7));
    CHECK(std::abs(lowered.eq_duals[r] - direct.eq_duals[r]) < 1e-4);
}

TEST_CASE("primal and dual objectives agree at the optimum") {
    ConicSolution sol = solve(mixed_program(1.0));
    REQUIRE(sol.ok());
    CHECK(sol.objective >= sol.dual_objective - 1e-7);
    CHECK(std::abs(sol.objective - sol.dual_objective) <= 1e-6 * (1 + std::abs(sol.objective)));
}

TEST_CASE("equality duals are the sensitivity of the optimal value") {
    RowId r;
    ConicSolution base = solve(mixed_program(1.0, &r));
    REQUIRE(base.ok());
    const double eps = 1e-5;
    ConicSolution up = solve(mixed_program(1.0 + eps));
    ConicSolution down = solve(mixed_program(1.0 - eps));
    REQUIRE(up.ok());
    REQUIRE(down.ok());
    double fd = (up.objective - down.objective) / (2 * eps);
    CHECK(std::abs(fd - base.eq_duals[r]) <= 1e-2 * std::max(1.0, std::abs(base.eq_duals[r])));
}
