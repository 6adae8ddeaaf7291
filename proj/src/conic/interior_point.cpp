#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include "dlmp/conic/solver.hpp"

namespace dlmp::conic {
namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Trip = Eigen::Triplet<double>;

constexpr double kStaticReg = 1e-8;
constexpr double kStepFraction = 0.99;
constexpr double kSigmaMin = 1e-4;
// Stalled iterates within this factor of every tolerance are still accepted.
constexpr double kInaccurate = 100.0;
constexpr int kRefineSteps = 6;

struct Cones {
    int lp = 0;
    std::vector<int> dim;    // second-order cone dimensions
    std::vector<int> start;  // offsets into the stacked slack vector
    int total = 0;
    int degree() const { return lp + static_cast<int>(dim.size()); }
};

// min x'Px/2 + c'x  s.t.  Ax = b,  Gx + s = h,  s in K,  P diagonal
struct StandardForm {
    SpMat A, G;
    Vec c, b, h;
    Vec pdiag;
    Cones K;
    // Bookkeeping to map duals back to the program.
    std::vector<int> lower_row, upper_row;  // LP row per variable, -1 if none
    std::vector<int> fixed_row;             // equality row for lower == upper
};

StandardForm to_standard(const ConicProgram& prog) {
    StandardForm sf;
    const int n = prog.num_vars();
    std::vector<Trip> at, gt;
    std::vector<double> b, h;
    for (const EqualityRow& e : prog.eqs) {
        int r = static_cast<int>(b.size());
        for (const Term& t : e.lhs.terms) at.emplace_back(r, t.var, t.coef);
        b.push_back(e.rhs - e.lhs.constant);
    }
    sf.lower_row.assign(n, -1);
    sf.upper_row.assign(n, -1);
    sf.fixed_row.assign(n, -1);
    for (int i = 0; i < n; ++i) {
        const Variable& v = prog.vars[i];
        if (std::isfinite(v.lower) && v.lower == v.upper) {
            int r = static_cast<int>(b.size());
            at.emplace_back(r, i, 1.0);
            b.push_back(v.lower);
            sf.fixed_row[i] = r;
        }
    }
    int lp = 0;
    for (int i = 0; i < n; ++i) {
        const Variable& v = prog.vars[i];
        if (sf.fixed_row[i] >= 0) continue;
        if (std::isfinite(v.lower)) {
            gt.emplace_back(lp, i, -1.0);
            h.push_back(-v.lower);
            sf.lower_row[i] = lp++;
        }
        if (std::isfinite(v.upper)) {
            gt.emplace_back(lp, i, 1.0);
            h.push_back(v.upper);
            sf.upper_row[i] = lp++;
        }
    }
    sf.K.lp = lp;
    int row = lp;
    // Slack entry s_r = h_r - G_r x equals the affine expression scaled by w.
    auto emit = [&](const Affine& a, double w) {
        for (const Term& t : a.terms) gt.emplace_back(row, t.var, -w * t.coef);
        h.push_back(w * a.constant);
    };
    auto emit2 = [&](const Affine& a, double wa, const Affine& c, double wc) {
        for (const Term& t : a.terms) gt.emplace_back(row, t.var, -wa * t.coef);
        for (const Term& t : c.terms) gt.emplace_back(row, t.var, -wc * t.coef);
        h.push_back(wa * a.constant + wc * c.constant);
    };
    for (const ConeRow& c : prog.cones) {
        sf.K.start.push_back(row);
        if (c.kind == ConeKind::soc) {
            emit(c.bound, 1.0);
            ++row;
            for (const Affine& p : c.parts) {
                emit(p, 1.0);
                ++row;
            }
            sf.K.dim.push_back(1 + static_cast<int>(c.parts.size()));
        } else {
            // ||u||^2 <= a b  <=>  ||(2u, a - b)|| <= a + b
            emit2(c.bound, 1.0, c.bound2, 1.0);
            ++row;
            for (const Affine& p : c.parts) {
                emit(p, 2.0);
                ++row;
            }
            emit2(c.bound, 1.0, c.bound2, -1.0);
            ++row;
            sf.K.dim.push_back(2 + static_cast<int>(c.parts.size()));
        }
    }
    sf.K.total = row;
    sf.A.resize(static_cast<Eigen::Index>(b.size()), n);
    sf.A.setFromTriplets(at.begin(), at.end());
    sf.G.resize(row, n);
    sf.G.setFromTriplets(gt.begin(), gt.end());
    sf.c = Vec::Map(prog.objective.linear.data(), n);
    sf.pdiag = 2.0 * Vec::Map(prog.objective.quadratic.data(), n);
    sf.b = Vec::Map(b.data(), static_cast<Eigen::Index>(b.size()));
    sf.h = Vec::Map(h.data(), static_cast<Eigen::Index>(h.size()));
    return sf;
}

// Ruiz equilibration of [A; G], with one common scale per second-order cone.
struct Equilibration {
    Vec col, row_a, row_g;
};

Equilibration equilibrate(StandardForm& sf) {
    const Eigen::Index n = sf.A.cols(), p = sf.A.rows(), m = sf.G.rows();
    Equilibration eq{Vec::Ones(n), Vec::Ones(p), Vec::Ones(m)};
    for (int pass = 0; pass < 8; ++pass) {
        Vec cmax = Vec::Zero(n), ra = Vec::Zero(p), rg = Vec::Zero(m);
        for (Eigen::Index j = 0; j < n; ++j) {
            for (SpMat::InnerIterator it(sf.A, j); it; ++it) {
                double v = std::abs(it.value());
                cmax[j] = std::max(cmax[j], v);
                ra[it.row()] = std::max(ra[it.row()], v);
            }
            for (SpMat::InnerIterator it(sf.G, j); it; ++it) {
                double v = std::abs(it.value());
                cmax[j] = std::max(cmax[j], v);
                rg[it.row()] = std::max(rg[it.row()], v);
            }
        }
        for (std::size_t k = 0; k < sf.K.dim.size(); ++k) {
            int s = sf.K.start[k], d = sf.K.dim[k];
            double mx = rg.segment(s, d).maxCoeff();
            rg.segment(s, d).setConstant(mx);
        }
        auto inv_sqrt = [](double v) { return v > 0 ? std::clamp(1.0 / std::sqrt(v), 1e-4, 1e4) : 1.0; };
        Vec dc = cmax.unaryExpr(inv_sqrt), da = ra.unaryExpr(inv_sqrt), dg = rg.unaryExpr(inv_sqrt);
        sf.A = da.asDiagonal() * sf.A * dc.asDiagonal();
        sf.G = dg.asDiagonal() * sf.G * dc.asDiagonal();
        eq.col.array() *= dc.array();
        eq.row_a.array() *= da.array();
        eq.row_g.array() *= dg.array();
    }
    sf.c.array() *= eq.col.array();
    sf.pdiag.array() *= eq.col.array().square();
    sf.b.array() *= eq.row_a.array();
    sf.h.array() *= eq.row_g.array();
    return eq;
}

// ---- cone algebra -------------------------------------------------------

struct Scaling {
    Vec lp_w;                // LP part: W = diag(sqrt(s / z))
    std::vector<double> eta;
    std::vector<Vec> wbar;   // normalized scaling point per second-order cone
    Vec lambda;              // W z = W^{-1} s
};

double soc_residual(const Eigen::Ref<const Vec>& u) {
    double n1 = u.tail(u.size() - 1).norm();
    return (u[0] - n1) * (u[0] + n1);
}

void apply_w(const Cones& K, const Scaling& W, const Vec& v, Vec& out, bool inverse) {
    out.resize(v.size());
    if (K.lp > 0) {
        if (inverse)
            out.head(K.lp) = v.head(K.lp).cwiseQuotient(W.lp_w);
        else
            out.head(K.lp) = v.head(K.lp).cwiseProduct(W.lp_w);
    }
    for (std::size_t k = 0; k < K.dim.size(); ++k) {
        int s = K.start[k], d = K.dim[k];
        const Vec& w = W.wbar[k];
        double w0 = w[0];
        auto w1 = w.tail(d - 1);
        double v0 = v[s];
        auto v1 = v.segment(s + 1, d - 1);
        double dot = w1.dot(v1);
        if (!inverse) {
            double e = W.eta[k];
            out[s] = e * (w0 * v0 + dot);
            out.segment(s + 1, d - 1) = e * (v0 * w1 + v1 + (dot / (1.0 + w0)) * w1);
        } else {
            double e = 1.0 / W.eta[k];
            out[s] = e * (w0 * v0 - dot);
            out.segment(s + 1, d - 1) = e * (-v0 * w1 + v1 + (dot / (1.0 + w0)) * w1);
        }
    }
}

bool compute_scaling(const Cones& K, const Vec& s, const Vec& z, Scaling& W) {
    W.lp_w.resize(K.lp);
    W.lambda.resize(s.size());
    for (int i = 0; i < K.lp; ++i) {
        if (s[i] <= 0 || z[i] <= 0) return false;
        W.lp_w[i] = std::sqrt(s[i] / z[i]);
        W.lambda[i] = std::sqrt(s[i] * z[i]);
    }
    W.eta.resize(K.dim.size());
    W.wbar.resize(K.dim.size());
    for (std::size_t k = 0; k < K.dim.size(); ++k) {
        int st = K.start[k], d = K.dim[k];
        auto sk = s.segment(st, d);
        auto zk = z.segment(st, d);
        double sres = soc_residual(sk), zres = soc_residual(zk);
        if (!(sres > 0) || !(zres > 0) || sk[0] <= 0 || zk[0] <= 0) return false;
        double sn = std::sqrt(sres), zn = std::sqrt(zres);
        Vec sb = sk / sn, zb = zk / zn;
        double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
        Vec w(d);
        w[0] = (sb[0] + zb[0]) / (2 * gamma);
        w.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2 * gamma);
        W.wbar[k] = w;
        W.eta[k] = std::sqrt(sn / zn);
    }
    // lambda = W z on the cone part
    Vec wz;
    apply_w(K, W, z, wz, false);
    W.lambda.tail(s.size() - K.lp) = wz.tail(s.size() - K.lp);
    return true;
}

// u o v
Vec jordan(const Cones& K, const Vec& u, const Vec& v) {
    Vec out(u.size());
    out.head(K.lp) = u.head(K.lp).cwiseProduct(v.head(K.lp));
    for (std::size_t k = 0; k < K.dim.size(); ++k) {
        int s = K.start[k], d = K.dim[k];
        out[s] = u.segment(s, d).dot(v.segment(s, d));
        out.segment(s + 1, d - 1) = u[s] * v.segment(s + 1, d - 1) + v[s] * u.segment(s + 1, d - 1);
    }
    return out;
}

// x with lambda o x = v
Vec jordan_div(const Cones& K, const Vec& lam, const Vec& v) {
    Vec out(v.size());
    out.head(K.lp) = v.head(K.lp).cwiseQuotient(lam.head(K.lp));
    for (std::size_t k = 0; k < K.dim.size(); ++k) {
        int s = K.start[k], d = K.dim[k];
        double l0 = lam[s];
        auto l1 = lam.segment(s + 1, d - 1);
        double x0 = (l0 * v[s] - l1.dot(v.segment(s + 1, d - 1))) / soc_residual(lam.segment(s, d));
        out[s] = x0;
        out.segment(s + 1, d - 1) = (v.segment(s + 1, d - 1) - x0 * l1) / l0;
    }
    return out;
}

Vec identity(const Cones& K, Eigen::Index size) {
    Vec e = Vec::Zero(size);
    e.head(K.lp).setOnes();
    for (int s : K.start) e[s] = 1.0;
    return e;
}

// Largest alpha with u + alpha d in the cone (infinity when unbounded).
double max_step(const Cones& K, const Vec& u, const Vec& d) {
    double alpha = std::numeric_limits<double>::infinity();
    for (int i = 0; i < K.lp; ++i)
        if (d[i] < 0) alpha = std::min(alpha, -u[i] / d[i]);
    for (std::size_t k = 0; k < K.dim.size(); ++k) {
        int s = K.start[k], m = K.dim[k] - 1;
        double u0 = u[s], d0 = d[s];
        auto u1 = u.segment(s + 1, m);
        auto d1 = d.segment(s + 1, m);
        double a = d0 * d0 - d1.squaredNorm();
        double b = u0 * d0 - u1.dot(d1);
        double c = soc_residual(u.segment(s, m + 1));
        double disc = b * b - a * c;
        double ak = std::numeric_limits<double>::infinity();
        if (a > 0 && (b >= 0 || disc < 0)) {
            // never reaches the boundary
        } else if (a == 0) {
            if (b < 0) ak = -c / (2 * b);
        } else {
            double den = -b + std::sqrt(std::max(disc, 0.0));
            if (den > 0) ak = c / den;
        }
        if (d0 < 0) ak = std::min(ak, -u0 / d0);
        alpha = std::min(alpha, ak);
    }
    return alpha;
}

// Shift v into the interior if needed: v + (1 + a) e.
void shift_into_cone(const Cones& K, Vec& v) {
    double a = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < K.lp; ++i) a = std::max(a, -v[i]);
    for (std::size_t k = 0; k < K.dim.size(); ++k) {
        int s = K.start[k], d = K.dim[k];
        a = std::max(a, v.segment(s + 1, d - 1).norm() - v[s]);
    }
    if (a >= -1e-8) v += (1.0 + std::max(a, 0.0)) * identity(K, v.size());
}

// ---- KKT system -----------------------------------------------------------

class KktSystem {
public:
    explicit KktSystem(const StandardForm& sf) : sf_(sf) {
        n_ = static_cast<int>(sf.A.cols());
        p_ = static_cast<int>(sf.A.rows());
        m_ = static_cast<int>(sf.G.rows());
        for (int i = 0; i < n_; ++i) trips_.emplace_back(i, i, sf.pdiag[i] + kStaticReg);
        for (int j = 0; j < n_; ++j) {
            for (SpMat::InnerIterator it(sf.A, j); it; ++it) trips_.emplace_back(j, n_ + it.row(), it.value());
            for (SpMat::InnerIterator it(sf.G, j); it; ++it) trips_.emplace_back(j, n_ + p_ + it.row(), it.value());
        }
        ydiag_begin_ = trips_.size();
        for (int i = 0; i < p_; ++i) trips_.emplace_back(n_ + i, n_ + i, -kStaticReg);
        scale_begin_ = trips_.size();
        const int o = n_ + p_;
        for (int i = 0; i < sf.K.lp; ++i) trips_.emplace_back(o + i, o + i, -1.0);
        for (std::size_t k = 0; k < sf.K.dim.size(); ++k) {
            int s = sf.K.start[k], d = sf.K.dim[k];
            for (int a = 0; a < d; ++a)
                for (int b = a; b < d; ++b) trips_.emplace_back(o + s + a, o + s + b, a == b ? -1.0 : 0.0);
        }
        K_.resize(n_ + p_ + m_, n_ + p_ + m_);
    }

    // Sets the scaling block to -(W'W) and factors. W == nullptr means identity.
    // A zero pivot is retried with stronger regularization; refinement in
    // solve() works against the unregularized matrix either way.
    bool factor(const Scaling* W) {
        for (reg_ = kStaticReg; reg_ <= kStaticReg * 1e6; reg_ *= 100.0)
            if (try_factor(W)) return true;
        return false;
    }

    bool try_factor(const Scaling* W) {
        for (int i = 0; i < n_; ++i) trips_[i] = Trip(i, i, sf_.pdiag[i] + reg_);
        for (int i = 0; i < p_; ++i) trips_[ydiag_begin_ + i] = Trip(n_ + i, n_ + i, -reg_);
        std::size_t idx = scale_begin_;
        for (int i = 0; i < sf_.K.lp; ++i) {
            double w = W ? W->lp_w[i] : 1.0;
            trips_[idx] = Trip(trips_[idx].row(), trips_[idx].col(), -(w * w) - reg_);
            ++idx;
        }
        for (std::size_t k = 0; k < sf_.K.dim.size(); ++k) {
            int d = sf_.K.dim[k];
            Eigen::MatrixXd W2 = Eigen::MatrixXd::Identity(d, d);
            if (W) {
                // W^2 = eta^2 (2 w w' - J)
                const Vec& w = W->wbar[k];
                W2 = 2.0 * w * w.transpose();
                W2(0, 0) -= 1.0;
                for (int a = 1; a < d; ++a) W2(a, a) += 1.0;
                W2 *= W->eta[k] * W->eta[k];
            }
            for (int a = 0; a < d; ++a)
                for (int b = a; b < d; ++b) {
                    double v = -W2(a, b) - (a == b ? reg_ : 0.0);
                    trips_[idx] = Trip(trips_[idx].row(), trips_[idx].col(), v);
                    ++idx;
                }
        }
        K_.setFromTriplets(trips_.begin(), trips_.end());
        if (!analyzed_) {
            ldlt_.analyzePattern(K_);
            analyzed_ = true;
        }
        ldlt_.factorize(K_);
        return ldlt_.info() == Eigen::Success;
    }

    // Solves the unregularized system with iterative refinement.
    Vec solve(const Vec& rhs) const {
        Vec x = ldlt_.solve(rhs);
        double rn = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
        for (int it = 0; it < kRefineSteps; ++it) {
            Vec r = rhs - multiply(x);
            if (r.lpNorm<Eigen::Infinity>() <= 1e-14 * rn) break;
            x += ldlt_.solve(r);
        }
        return x;
    }

private:
    Vec multiply(const Vec& x) const {
        Vec y = K_.selfadjointView<Eigen::Upper>() * x;
        y.head(n_) -= reg_ * x.head(n_);
        y.segment(n_, p_) += reg_ * x.segment(n_, p_);
        y.tail(m_) += reg_ * x.tail(m_);
        return y;
    }

    const StandardForm& sf_;
    int n_ = 0, p_ = 0, m_ = 0;
    std::vector<Trip> trips_;
    std::size_t ydiag_begin_ = 0;
    std::size_t scale_begin_ = 0;
    double reg_ = kStaticReg;
    SpMat K_;
    Eigen::SimplicialLDLT<SpMat, Eigen::Upper, Eigen::AMDOrdering<int>> ldlt_;
    bool analyzed_ = false;
};

struct Iterate {
    Vec x, y, z, s;
    double tau = 1.0, kappa = 1.0;
};

struct Direction {
    Vec dx, dy, dz, ds;
    double dtau = 0, dkappa = 0;
};

}  // namespace

ConicSolution InteriorPointBackend::solve(const ConicProgram& prog, const SolveOptions& opt) const {
    auto t_start = std::chrono::steady_clock::now();
    ConicSolution out;
    StandardForm sf = to_standard(prog);
    Equilibration eq = equilibrate(sf);
    const Cones& K = sf.K;
    const int n = static_cast<int>(sf.A.cols());
    const int p = static_cast<int>(sf.A.rows());
    const int m = static_cast<int>(sf.G.rows());
    const double tol = opt.tol;
    const double nb = std::max(1.0, sf.b.norm()), nh = std::max(1.0, sf.h.norm()), nc = std::max(1.0, sf.c.norm());

    KktSystem kkt(sf);
    auto split = [&](const Vec& v, Vec& x, Vec& y, Vec& z) {
        x = v.head(n);
        y = v.segment(n, p);
        z = v.tail(m);
    };
    auto stack = [&](const Vec& a, const Vec& b, const Vec& c) {
        Vec v(n + p + m);
        v << a, b, c;
        return v;
    };

    Iterate it;
    Status status = Status::numerical_failure;
    if (!kkt.factor(nullptr)) {
        out.status = Status::numerical_failure;
        return out;
    }
    {
        Vec xx, yy, zz;
        split(kkt.solve(stack(Vec::Zero(n), sf.b, sf.h)), xx, yy, zz);
        it.x = xx;
        it.s = -zz;
        shift_into_cone(K, it.s);
        split(kkt.solve(stack(-sf.c, Vec::Zero(p), Vec::Zero(m))), xx, yy, zz);
        it.y = yy;
        it.z = zz;
        shift_into_cone(K, it.z);
    }

    Scaling W;
    const char* stall = nullptr;
    double last_pres = INFINITY, last_dres = INFINITY, last_gap = INFINITY;
    int iter = 0;
    const int deg = K.degree();
    for (;; ++iter) {
        Vec px = sf.pdiag.cwiseProduct(it.x);
        double xpx = it.x.dot(px);
        Vec r1 = px + sf.A.transpose() * it.y + sf.G.transpose() * it.z + sf.c * it.tau;
        Vec r2 = -(sf.A * it.x) + sf.b * it.tau;
        Vec r3 = it.s + sf.G * it.x - sf.h * it.tau;
        double cx = sf.c.dot(it.x), by = sf.b.dot(it.y), hz = sf.h.dot(it.z);
        double r4 = it.kappa + cx + by + hz + xpx / it.tau;

        double pres = std::max(r2.norm() / nb, r3.norm() / nh) / it.tau;
        double dres = r1.norm() / nc / it.tau;
        double qcost = 0.5 * xpx / (it.tau * it.tau);
        double pcost = cx / it.tau + qcost, dcost = -(by + hz) / it.tau - qcost;
        double gap = it.s.dot(it.z) / (it.tau * it.tau);
        double relgap = gap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));
        out.info.iterations = iter;
        out.info.primal_residual = pres;
        out.info.dual_residual = dres;
        out.info.gap = gap;
        if (opt.verbose)
            fmt::print("{:3d} pcost {:+.6e} dcost {:+.6e} pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kap {:.2e}\n", iter,
                       pcost, dcost, pres, dres, gap, it.tau, it.kappa);

        if (pres < tol && dres < tol && (gap < tol || relgap < tol)) {
            status = Status::optimal;
            break;
        }
        if (by + hz < 0) {
            double cert = (sf.A.transpose() * it.y + sf.G.transpose() * it.z).norm() / -(by + hz);
            if (cert < tol && it.kappa > it.tau) {
                status = Status::infeasible;
                break;
            }
        }
        if (cx < 0) {
            double cert = std::max({(sf.A * it.x).norm(), (sf.G * it.x + it.s).norm(), px.norm()}) / -cx;
            if (cert < tol && it.kappa > it.tau) {
                status = Status::unbounded;
                break;
            }
        }
        if (iter >= opt.max_iter) break;
        last_pres = pres;
        last_dres = dres;
        last_gap = std::min(gap, relgap);

        if (!compute_scaling(K, it.s, it.z, W)) {
            stall = "scaling";
            break;
        }
        if (!kkt.factor(&W)) {
            stall = "factorization";
            break;
        }
        const Vec& lam = W.lambda;
        double mu = (it.s.dot(it.z) + it.tau * it.kappa) / (deg + 1);

        Vec x1, y1, z1;
        split(kkt.solve(stack(-sf.c, sf.b, sf.h)), x1, y1, z1);
        // Equals -kappa/tau - |W z1|^2 - |x1 - x/tau|_P^2 < 0.
        const double den = sf.c.dot(x1) + sf.b.dot(y1) + sf.h.dot(z1) - it.kappa / it.tau + 2.0 * px.dot(x1) / it.tau -
                           xpx / (it.tau * it.tau);

        auto direction = [&](const Vec& d1, const Vec& d2, const Vec& d3, double d4, const Vec& ds, double dk) {
            Direction D;
            Vec q = jordan_div(K, lam, ds);
            Vec wq;
            apply_w(K, W, q, wq, false);
            Vec x2, y2, z2;
            split(kkt.solve(stack(d1, -d2, d3 - wq)), x2, y2, z2);
            D.dtau = (d4 - dk / it.tau - sf.c.dot(x2) - sf.b.dot(y2) - sf.h.dot(z2) - 2.0 * px.dot(x2) / it.tau) / den;
            D.dx = x2 + D.dtau * x1;
            D.dy = y2 + D.dtau * y1;
            D.dz = z2 + D.dtau * z1;
            Vec wdz;
            apply_w(K, W, D.dz, wdz, false);
            Vec tmp = q - wdz, wt;
            apply_w(K, W, tmp, wt, false);
            D.ds = wt;
            D.dkappa = (dk - it.kappa * D.dtau) / it.tau;
            return D;
        };
        auto step_to_boundary = [&](const Direction& D) {
            double a = std::min(max_step(K, it.s, D.ds), max_step(K, it.z, D.dz));
            if (D.dtau < 0) a = std::min(a, -it.tau / D.dtau);
            if (D.dkappa < 0) a = std::min(a, -it.kappa / D.dkappa);
            return a;
        };

        // Predictor
        Vec ll = jordan(K, lam, lam);
        Direction Da = direction(-r1, -r2, -r3, -r4, -ll, -it.tau * it.kappa);
        double alpha_a = std::min(1.0, step_to_boundary(Da));
        double sigma = std::clamp(std::pow(1.0 - alpha_a, 3), kSigmaMin, 1.0);

        // Corrector
        Vec wis, wdz;
        apply_w(K, W, Da.ds, wis, true);
        apply_w(K, W, Da.dz, wdz, false);
        Vec ds = -ll - jordan(K, wis, wdz) + sigma * mu * identity(K, m);
        double dk = -it.tau * it.kappa - Da.dtau * Da.dkappa + sigma * mu;
        double f = 1.0 - sigma;
        Direction D = direction(-f * r1, -f * r2, -f * r3, -f * r4, ds, dk);
        double alpha = std::min(1.0, kStepFraction * step_to_boundary(D));
        if (!(alpha > 1e-12)) {
            stall = "step";
            break;
        }

        it.x += alpha * D.dx;
        it.y += alpha * D.dy;
        it.z += alpha * D.dz;
        it.s += alpha * D.ds;
        it.tau += alpha * D.dtau;
        it.kappa += alpha * D.dkappa;
    }

    // A stall close to the target still yields a usable point; accept it at
    // reduced accuracy rather than discard it.
    if (status == Status::numerical_failure && stall && last_pres < kInaccurate * tol && last_dres < kInaccurate * tol &&
        last_gap < kInaccurate * tol) {
        status = Status::optimal;
        out.info.reduced_accuracy = true;
    }
    if (opt.verbose && stall) fmt::print("stalled: {}\n", stall);

    // Undo equilibration; report the optimal point or the certificate.
    double scale = (status == Status::infeasible || status == Status::unbounded) ? 1.0 : 1.0 / it.tau;
    Vec x = eq.col.cwiseProduct(it.x) * scale;
    Vec y = eq.row_a.cwiseProduct(it.y) * scale;
    Vec z = eq.row_g.cwiseProduct(it.z) * scale;

    out.status = status;
    const int nv = prog.num_vars();
    out.x.assign(x.data(), x.data() + nv);
    out.eq_duals.resize(prog.eqs.size());
    for (std::size_t i = 0; i < prog.eqs.size(); ++i) out.eq_duals[i] = -y[static_cast<Eigen::Index>(i)];
    out.lower_duals.assign(nv, 0.0);
    out.upper_duals.assign(nv, 0.0);
    for (int i = 0; i < nv; ++i) {
        if (sf.lower_row[i] >= 0) out.lower_duals[i] = z[sf.lower_row[i]];
        if (sf.upper_row[i] >= 0) out.upper_duals[i] = z[sf.upper_row[i]];
        if (sf.fixed_row[i] >= 0) {
            double d = -y[sf.fixed_row[i]];
            out.lower_duals[i] = std::max(d, 0.0);
            out.upper_duals[i] = std::max(-d, 0.0);
        }
    }
    out.cone_duals.resize(prog.cones.size());
    for (std::size_t k = 0; k < prog.cones.size(); ++k) {
        int s = K.start[k], d = K.dim[k];
        std::vector<double> zk;
        if (prog.cones[k].kind == ConeKind::soc) {
            zk.assign(z.data() + s, z.data() + s + d);
        } else {
            double z0 = z[s], zl = z[s + d - 1];
            zk.push_back(z0 + zl);
            zk.push_back(z0 - zl);
            for (int a = 1; a < d - 1; ++a) zk.push_back(2.0 * z[s + a]);
        }
        out.cone_duals[k] = std::move(zk);
    }
    if (status == Status::optimal) {
        out.objective = prog.evaluate_objective(out.x);
        Vec bo = sf.b.cwiseQuotient(eq.row_a), ho = sf.h.cwiseQuotient(eq.row_g);
        double quad = 0.0;
        for (int i = 0; i < nv; ++i) quad += prog.objective.quadratic[i] * x[i] * x[i];
        out.dual_objective = -(bo.dot(y) + ho.dot(z)) - quad + prog.objective.constant;
    } else if (status == Status::infeasible) {
        out.objective = std::numeric_limits<double>::infinity();
    } else if (status == Status::unbounded) {
        out.objective = -std::numeric_limits<double>::infinity();
    } else {
        out.objective = std::numeric_limits<double>::quiet_NaN();
    }
    out.info.solve_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

const Backend& default_backend() {
    static const InteriorPointBackend backend;
    return backend;
}

ConicSolution solve(const ConicProgram& prog, const SolveOptions& opt, const Backend* backend) {
    const Backend& be = backend ? *backend : default_backend();
    if (!prog.has_quadratic() || be.accepts_quadratic_objective()) return be.solve(prog, opt);
    ConicProgram lowered = lower_quadratic(prog);
    ConicSolution sol = be.solve(lowered, opt);
    const std::size_t n = prog.vars.size();
    if (sol.x.size() > n) sol.x.resize(n);
    sol.lower_duals.resize(std::min(sol.lower_duals.size(), n));
    sol.upper_duals.resize(std::min(sol.upper_duals.size(), n));
    if (sol.cone_duals.size() > prog.cones.size()) sol.cone_duals.resize(prog.cones.size());
    if (sol.status == Status::optimal) sol.objective = prog.evaluate_objective(sol.x);
    return sol;
}

}  // namespace dlmp::conic
