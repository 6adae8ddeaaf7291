#pragma once

#include <limits>
#include <string>
#include <vector>

namespace dlmp::conic {

constexpr double kInf = std::numeric_limits<double>::infinity();

using VarId = int;
using RowId = int;
using ConeId = int;

struct Term {
    VarId var;
    double coef;
};

// Affine expression sum(coef * x[var]) + constant.
struct Affine {
    std::vector<Term> terms;
    double constant = 0.0;

    Affine() = default;
    Affine(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
    static Affine var(VarId v, double coef = 1.0) {
        Affine a;
        a.terms.push_back({v, coef});
        return a;
    }
    Affine& add(VarId v, double coef) {
        if (coef != 0.0) terms.push_back({v, coef});
        return *this;
    }
    Affine& operator+=(const Affine& o) {
        terms.insert(terms.end(), o.terms.begin(), o.terms.end());
        constant += o.constant;
        return *this;
    }
    Affine& operator*=(double s) {
        for (Term& t : terms) t.coef *= s;
        constant *= s;
        return *this;
    }
};

inline Affine operator+(Affine a, const Affine& b) { return a += b; }
inline Affine operator*(double s, Affine a) { return a *= s; }
inline Affine operator-(Affine a, const Affine& b) { return a += (-1.0) * b; }

struct EqualityRow {
    Affine lhs;  // lhs.terms . x == rhs (lhs.constant folded into rhs at build)
    double rhs = 0.0;
    std::string label;
};

enum class ConeKind { soc, rsoc };

// soc:  || parts || <= bound
// rsoc: || parts ||^2 <= bound * bound2, bound >= 0, bound2 >= 0
struct ConeRow {
    ConeKind kind = ConeKind::soc;
    std::vector<Affine> parts;
    Affine bound;
    Affine bound2;
    std::string label;
};

struct Variable {
    std::string name;
    double lower = -kInf;
    double upper = kInf;
};

struct Objective {
    std::vector<double> linear;     // per variable
    std::vector<double> quadratic;  // per variable, coefficient of x_i^2, >= 0
    double constant = 0.0;
};

struct ConicProgram {
    std::vector<Variable> vars;
    std::vector<EqualityRow> eqs;
    std::vector<ConeRow> cones;
    Objective objective;

    int num_vars() const { return static_cast<int>(vars.size()); }
    bool has_quadratic() const;
    double evaluate_objective(const std::vector<double>& x) const;
    double evaluate(const Affine& a, const std::vector<double>& x) const;
};

// Incremental construction with index checks. Ids are dense and stable: the
// k-th call to add_eq returns k, and the solution's dual arrays use the same ids.
class ProgramBuilder {
public:
    VarId add_var(std::string name = {}, double lower = -kInf, double upper = kInf);
    void set_bounds(VarId v, double lower, double upper);
    RowId add_eq(Affine lhs, double rhs, std::string label = {});
    ConeId add_soc(std::vector<Affine> parts, Affine bound, std::string label = {});
    ConeId add_rsoc(std::vector<Affine> parts, Affine bound, Affine bound2, std::string label = {});
    void add_linear_cost(VarId v, double coef);
    void add_quadratic_cost(VarId v, double coef);
    void add_constant_cost(double c);
    // Adds coef * (expr)^2 through an auxiliary variable tied to expr.
    VarId add_square_cost(const Affine& expr, double coef, std::string name = {});

    int num_vars() const { return static_cast<int>(prog_.vars.size()); }
    int num_eqs() const { return static_cast<int>(prog_.eqs.size()); }
    int num_cones() const { return static_cast<int>(prog_.cones.size()); }

    ConicProgram build() const;

private:
    void check(const Affine& a) const;
    void check(VarId v) const;
    ConicProgram prog_;
};

}  // namespace dlmp::conic
