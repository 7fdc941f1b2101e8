#include "socpf/ipm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <Eigen/SparseCore>
#include <spdlog/spdlog.h>

namespace socpf {

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::IterationLimit: return "iteration_limit";
        case SolveStatus::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// min c'x  s.t.  A x = b,  G x + s = h,  s in K = R+^lp x SOC(q_1) x ... x SOC(q_k)
struct StandardForm {
    int n = 0;
    SpMat A, G;
    Vec c, b, h;
    int lp = 0;
    std::vector<int> soc;
    double obj_const = 0.0;
    std::vector<std::string> eq_names, ineq_names;
};

StandardForm to_standard_form(const ConicModel& model) {
    StandardForm f;
    f.n = model.num_variables();
    std::vector<Triplet> at, gt;
    std::vector<double> b, h;

    auto add_expr = [](std::vector<Triplet>& t, int row, const LinearExpr& e, double scale) {
        for (const auto& [v, coef] : e.terms) t.emplace_back(row, v, coef * scale);
    };

    // equalities: fixed variables and Eq rows
    for (int j = 0; j < f.n; ++j) {
        const auto& v = model.variable(j);
        if (v.lb == v.ub) {
            at.emplace_back(static_cast<int>(b.size()), j, 1.0);
            b.push_back(v.lb);
            f.eq_names.push_back("fix:" + v.name);
        }
    }
    for (const auto& r : model.rows()) {
        if (r.sense != Sense::Eq) continue;
        add_expr(at, static_cast<int>(b.size()), r.expr, 1.0);
        b.push_back(r.rhs - r.expr.constant);
        f.eq_names.push_back(r.name);
    }

    // LP cone: bounds then inequality rows
    for (int j = 0; j < f.n; ++j) {
        const auto& v = model.variable(j);
        if (v.lb == v.ub) continue;
        if (std::isfinite(v.lb)) {
            gt.emplace_back(static_cast<int>(h.size()), j, -1.0);
            h.push_back(-v.lb);
            f.ineq_names.push_back("lb:" + v.name);
        }
        if (std::isfinite(v.ub)) {
            gt.emplace_back(static_cast<int>(h.size()), j, 1.0);
            h.push_back(v.ub);
            f.ineq_names.push_back("ub:" + v.name);
        }
    }
    for (const auto& r : model.rows()) {
        if (r.sense == Sense::Eq) continue;
        const double sign = r.sense == Sense::Le ? 1.0 : -1.0;
        add_expr(gt, static_cast<int>(h.size()), r.expr, sign);
        h.push_back(sign * (r.rhs - r.expr.constant));
        f.ineq_names.push_back(r.name);
    }
    f.lp = static_cast<int>(h.size());

    // SOC blocks: s = h - Gx = (head, tail...)
    for (const auto& cone : model.cones()) {
        add_expr(gt, static_cast<int>(h.size()), cone.head, -1.0);
        h.push_back(cone.head.constant);
        f.ineq_names.push_back(cone.name);
        for (const auto& t : cone.tail) {
            add_expr(gt, static_cast<int>(h.size()), t, -1.0);
            h.push_back(t.constant);
            f.ineq_names.push_back(cone.name);
        }
        f.soc.push_back(static_cast<int>(cone.tail.size()) + 1);
    }

    f.A.resize(static_cast<Eigen::Index>(b.size()), f.n);
    f.A.setFromTriplets(at.begin(), at.end());
    f.G.resize(static_cast<Eigen::Index>(h.size()), f.n);
    f.G.setFromTriplets(gt.begin(), gt.end());
    f.b = Eigen::Map<Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
    f.h = Eigen::Map<Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
    f.c = Vec::Zero(f.n);
    for (const auto& [v, coef] : model.objective().terms) f.c[v] += coef;
    f.obj_const = model.objective().constant;
    return f;
}

double inf_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// Per-cone Nesterov-Todd scaling.
struct SocScaling {
    double eta = 1.0;
    Mat W, Winv, W2;
};

class ConeOps {
public:
    ConeOps(int lp, std::vector<int> soc) : lp_(lp), soc_(std::move(soc)) {
        int start = lp_;
        for (int q : soc_) {
            start_.push_back(start);
            start += q;
        }
        m_ = start;
    }

    int m() const { return m_; }
    int degree() const { return lp_ + static_cast<int>(soc_.size()); }

    /// Smallest "eigenvalue" of x with respect to the cone; > 0 means interior.
    double min_eig(const Vec& x) const {
        double e = std::numeric_limits<double>::infinity();
        for (int i = 0; i < lp_; ++i) e = std::min(e, x[i]);
        for (size_t k = 0; k < soc_.size(); ++k) {
            const int s = start_[k], q = soc_[k];
            e = std::min(e, x[s] - x.segment(s + 1, q - 1).norm());
        }
        return e;
    }

    void add_identity(Vec& x, double alpha) const {
        for (int i = 0; i < lp_; ++i) x[i] += alpha;
        for (size_t k = 0; k < soc_.size(); ++k) x[start_[k]] += alpha;
    }

    Vec identity() const {
        Vec e = Vec::Zero(m_);
        add_identity(e, 1.0);
        return e;
    }

    Vec prod(const Vec& u, const Vec& v) const {
        Vec w(m_);
        for (int i = 0; i < lp_; ++i) w[i] = u[i] * v[i];
        for (size_t k = 0; k < soc_.size(); ++k) {
            const int s = start_[k], q = soc_[k];
            w[s] = u.segment(s, q).dot(v.segment(s, q));
            w.segment(s + 1, q - 1) = u[s] * v.segment(s + 1, q - 1) + v[s] * u.segment(s + 1, q - 1);
        }
        return w;
    }

    /// Solves lambda o w = v for w.
    Vec div(const Vec& lambda, const Vec& v) const {
        Vec w(m_);
        for (int i = 0; i < lp_; ++i) w[i] = v[i] / lambda[i];
        for (size_t k = 0; k < soc_.size(); ++k) {
            const int s = start_[k], q = soc_[k];
            const double l0 = lambda[s];
            const auto l1 = lambda.segment(s + 1, q - 1);
            const double det = l0 * l0 - l1.squaredNorm();
            const double w0 = (l0 * v[s] - l1.dot(v.segment(s + 1, q - 1))) / det;
            w[s] = w0;
            w.segment(s + 1, q - 1) = (v.segment(s + 1, q - 1) - w0 * l1) / l0;
        }
        return w;
    }

    /// Largest alpha with x + alpha*dx in the (closed) cone.
    double max_step(const Vec& x, const Vec& dx) const {
        double alpha = std::numeric_limits<double>::infinity();
        for (int i = 0; i < lp_; ++i) {
            if (dx[i] < 0) alpha = std::min(alpha, -x[i] / dx[i]);
        }
        for (size_t k = 0; k < soc_.size(); ++k) {
            const int s = start_[k], q = soc_[k];
            alpha = std::min(alpha, soc_step(x.segment(s, q), dx.segment(s, q)));
        }
        return alpha;
    }

    void update_scaling(const Vec& s, const Vec& z, Vec& lp_w, std::vector<SocScaling>& sc, Vec& lambda) const {
        lambda.resize(m_);
        lp_w.resize(lp_);
        for (int i = 0; i < lp_; ++i) {
            lp_w[i] = std::sqrt(s[i] / z[i]);
            lambda[i] = std::sqrt(s[i] * z[i]);
        }
        sc.resize(soc_.size());
        for (size_t k = 0; k < soc_.size(); ++k) {
            const int st = start_[k], q = soc_[k];
            const Vec sk = s.segment(st, q), zk = z.segment(st, q);
            const double s_res = sk[0] * sk[0] - sk.tail(q - 1).squaredNorm();
            const double z_res = zk[0] * zk[0] - zk.tail(q - 1).squaredNorm();
            const Vec sbar = sk / std::sqrt(s_res);
            const Vec zbar = zk / std::sqrt(z_res);
            const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
            Vec wbar(q);
            wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
            wbar.tail(q - 1) = (sbar.tail(q - 1) - zbar.tail(q - 1)) / (2.0 * gamma);
            const double eta = std::pow(s_res / z_res, 0.25);
            Mat Wb(q, q);
            Wb(0, 0) = wbar[0];
            Wb.block(0, 1, 1, q - 1) = wbar.tail(q - 1).transpose();
            Wb.block(1, 0, q - 1, 1) = wbar.tail(q - 1);
            Wb.block(1, 1, q - 1, q - 1) = Mat::Identity(q - 1, q - 1) +
                                           wbar.tail(q - 1) * wbar.tail(q - 1).transpose() / (1.0 + wbar[0]);
            Mat J = Mat::Identity(q, q);
            J.block(1, 1, q - 1, q - 1) *= -1.0;
            auto& out = sc[k];
            out.eta = eta;
            out.W = eta * Wb;
            out.Winv = (J * Wb * J) / eta;
            out.W2 = out.W * out.W;
            lambda.segment(st, q) = out.W * zk;
        }
    }

    Vec apply_W(const Vec& lp_w, const std::vector<SocScaling>& sc, const Vec& v) const {
        Vec out(m_);
        for (int i = 0; i < lp_; ++i) out[i] = lp_w[i] * v[i];
        for (size_t k = 0; k < soc_.size(); ++k) out.segment(start_[k], soc_[k]) = sc[k].W * v.segment(start_[k], soc_[k]);
        return out;
    }

    Vec apply_Winv(const Vec& lp_w, const std::vector<SocScaling>& sc, const Vec& v) const {
        Vec out(m_);
        for (int i = 0; i < lp_; ++i) out[i] = v[i] / lp_w[i];
        for (size_t k = 0; k < soc_.size(); ++k)
            out.segment(start_[k], soc_[k]) = sc[k].Winv * v.segment(start_[k], soc_[k]);
        return out;
    }

    Vec apply_W2(const Vec& lp_w, const std::vector<SocScaling>& sc, const Vec& v) const {
        Vec out(m_);
        for (int i = 0; i < lp_; ++i) out[i] = lp_w[i] * lp_w[i] * v[i];
        for (size_t k = 0; k < soc_.size(); ++k)
            out.segment(start_[k], soc_[k]) = sc[k].W2 * v.segment(start_[k], soc_[k]);
        return out;
    }

    int lp() const { return lp_; }
    const std::vector<int>& soc() const { return soc_; }
    const std::vector<int>& starts() const { return start_; }

private:
    static double soc_step(const Vec& x, const Vec& d) {
        const double a = d[0] * d[0] - d.tail(d.size() - 1).squaredNorm();
        const double b = x[0] * d[0] - x.tail(x.size() - 1).dot(d.tail(d.size() - 1));
        const double c = std::max(x[0] * x[0] - x.tail(x.size() - 1).squaredNorm(), 0.0);
        // f(t) = a t^2 + 2 b t + c, f(0) = c > 0; find the first positive root
        const double inf = std::numeric_limits<double>::infinity();
        const double disc = b * b - a * c;
        if (std::abs(a) < 1e-300) {
            if (b < 0) return -c / (2.0 * b);
            return inf;
        }
        if (disc < 0) return inf;
        const double sq = std::sqrt(disc);
        const double qq = -(b + std::copysign(sq, b));
        double r1 = qq / a;
        double r2 = (qq != 0.0) ? c / qq : inf;
        double best = inf;
        for (double r : {r1, r2}) {
            if (r > 0 && r < best) best = r;
        }
        // also guard the head from going negative when f stays positive (x in -K branch)
        if (d[0] < 0) best = std::min(best, -x[0] / d[0]);
        return best;
    }

    int lp_;
    std::vector<int> soc_;
    std::vector<int> start_;
    int m_ = 0;
};

void max_rows(Vec& e, const SpMat& m) {
    for (int j = 0; j < m.outerSize(); ++j)
        for (SpMat::InnerIterator it(m, j); it; ++it) e[it.row()] = std::max(e[it.row()], std::abs(it.value()));
}

void max_cols(Vec& e, const SpMat& m) {
    for (int j = 0; j < m.outerSize(); ++j)
        for (SpMat::InnerIterator it(m, j); it; ++it) e[j] = std::max(e[j], std::abs(it.value()));
}

void scale_matrix(SpMat& m, const Vec& row, const Vec& col) {
    for (int j = 0; j < m.outerSize(); ++j)
        for (SpMat::InnerIterator it(m, j); it; ++it) it.valueRef() /= row[it.row()] * col[j];
}

class Ipm {
public:
    Ipm(StandardForm f, const SolverSettings& st)
        : f_(std::move(f)), st_(st), cones_(f_.lp, f_.soc), n_(f_.n), p_(static_cast<int>(f_.A.rows())),
          m_(static_cast<int>(f_.G.rows())) {
        equilibrate();
        At_ = A_.transpose();
        Gt_ = G_.transpose();
    }

    SolverResult run();

private:
    void equilibrate() {
        A_ = f_.A;
        G_ = f_.G;
        ex_ = Vec::Ones(n_);
        ea_ = Vec::Ones(p_);
        eg_ = Vec::Ones(m_);
        for (int it = 0; it < st_.equil_iters; ++it) {
            Vec xt = Vec::Zero(n_), at = Vec::Zero(p_), gt = Vec::Zero(m_);
            max_cols(xt, A_);
            max_cols(xt, G_);
            max_rows(at, A_);
            max_rows(gt, G_);
            for (size_t k = 0; k < cones_.soc().size(); ++k) {
                const int s = cones_.starts()[k], q = cones_.soc()[k];
                const double tot = gt.segment(s, q).sum();
                gt.segment(s, q).setConstant(tot);
            }
            auto sq = [](double a) { return std::abs(a) < 1e-6 ? 1.0 : std::sqrt(a); };
            xt = xt.unaryExpr(sq);
            at = at.unaryExpr(sq);
            gt = gt.unaryExpr(sq);
            scale_matrix(A_, at, xt);
            scale_matrix(G_, gt, xt);
            ex_ = ex_.cwiseProduct(xt);
            ea_ = ea_.cwiseProduct(at);
            eg_ = eg_.cwiseProduct(gt);
        }
        c_ = f_.c.cwiseQuotient(ex_);
        b_ = f_.b.cwiseQuotient(ea_);
        h_ = f_.h.cwiseQuotient(eg_);
    }

    // Builds the regularized KKT matrix for the current scaling.
    SpMat assemble(const Vec& lp_w, const std::vector<SocScaling>& sc, bool identity_scaling) const {
        const int dim = n_ + p_ + m_;
        std::vector<Triplet> t;
        t.reserve(static_cast<size_t>(n_ + p_ + m_ + 2 * (A_.nonZeros() + G_.nonZeros())) + 16 * sc.size());
        const double d = st_.static_reg;
        for (int i = 0; i < n_; ++i) t.emplace_back(i, i, d);
        for (int j = 0; j < A_.outerSize(); ++j)
            for (SpMat::InnerIterator it(A_, j); it; ++it) {
                t.emplace_back(n_ + static_cast<int>(it.row()), j, it.value());
                t.emplace_back(j, n_ + static_cast<int>(it.row()), it.value());
            }
        for (int j = 0; j < G_.outerSize(); ++j)
            for (SpMat::InnerIterator it(G_, j); it; ++it) {
                t.emplace_back(n_ + p_ + static_cast<int>(it.row()), j, it.value());
                t.emplace_back(j, n_ + p_ + static_cast<int>(it.row()), it.value());
            }
        for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -d);
        const int off = n_ + p_;
        for (int i = 0; i < cones_.lp(); ++i) {
            const double w2 = identity_scaling ? 1.0 : lp_w[i] * lp_w[i];
            t.emplace_back(off + i, off + i, -w2 - d);
        }
        for (size_t k = 0; k < cones_.soc().size(); ++k) {
            const int s = cones_.starts()[k], q = cones_.soc()[k];
            for (int a = 0; a < q; ++a)
                for (int b = 0; b < q; ++b) {
                    double v = identity_scaling ? (a == b ? 1.0 : 0.0) : sc[k].W2(a, b);
                    if (a == b) v += d;
                    t.emplace_back(off + s + a, off + s + b, -v);
                }
        }
        SpMat K(dim, dim);
        K.setFromTriplets(t.begin(), t.end());
        return K;
    }

    // Unregularized KKT operator.
    Vec apply_kkt(const Vec& v, const Vec& lp_w, const std::vector<SocScaling>& sc, bool identity_scaling) const {
        const Vec vx = v.head(n_), vy = v.segment(n_, p_), vz = v.tail(m_);
        Vec out(n_ + p_ + m_);
        out.head(n_) = At_ * vy + Gt_ * vz;
        out.segment(n_, p_) = A_ * vx;
        out.tail(m_) = G_ * vx - (identity_scaling ? vz : cones_.apply_W2(lp_w, sc, vz));
        return out;
    }

    bool factorize(const SpMat& K) {
        if (!analyzed_) {
            lu_.analyzePattern(K);
            analyzed_ = true;
        }
        lu_.factorize(K);
        return lu_.info() == Eigen::Success;
    }

    Vec solve(const Vec& rhs, const Vec& lp_w, const std::vector<SocScaling>& sc, bool identity_scaling) {
        Vec x = lu_.solve(rhs);
        const double tol = 1e-14 * (1.0 + inf_norm(rhs));
        double prev = std::numeric_limits<double>::infinity();
        for (int k = 0; k < st_.max_refine; ++k) {
            const Vec r = rhs - apply_kkt(x, lp_w, sc, identity_scaling);
            const double e = inf_norm(r);
            if (!(e > tol) || e >= prev) break;
            prev = e;
            x += lu_.solve(r);
        }
        return x;
    }

    StandardForm f_;
    SolverSettings st_;
    ConeOps cones_;
    int n_, p_, m_;
    SpMat A_, G_, At_, Gt_;
    Vec c_, b_, h_;
    Vec ex_, ea_, eg_;
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
    bool analyzed_ = false;
};

SolverResult Ipm::run() {
    SolverResult res;
    const double bh_norm = std::max({1.0, inf_norm(f_.b), inf_norm(f_.h)});
    const double c_norm = std::max(1.0, inf_norm(f_.c));

    Vec lp_w;
    std::vector<SocScaling> sc;

    // Initial point.
    if (!factorize(assemble(lp_w, sc, true))) {
        res.status = SolveStatus::NumericalFailure;
        return res;
    }
    Vec rhs(n_ + p_ + m_);
    rhs << Vec::Zero(n_), b_, h_;
    Vec sol = solve(rhs, lp_w, sc, true);
    Vec x = sol.head(n_);
    Vec s = -sol.tail(m_);
    {
        const double a = -cones_.min_eig(s);
        if (a >= 0) cones_.add_identity(s, 1.0 + a);
    }
    rhs << -c_, Vec::Zero(p_), Vec::Zero(m_);
    sol = solve(rhs, lp_w, sc, true);
    Vec y = sol.segment(n_, p_);
    Vec z = sol.tail(m_);
    {
        const double a = -cones_.min_eig(z);
        if (a >= 0) cones_.add_identity(z, 1.0 + a);
    }
    double tau = 1.0, kap = 1.0;
    const double D = cones_.degree();
    const Vec e = cones_.identity();

    Vec lambda;
    for (int iter = 0; iter <= st_.max_iter; ++iter) {
        res.iterations = iter;
        // residuals (scaled space)
        const Vec hrx = -(At_ * y + Gt_ * z);
        const Vec hry = A_ * x;
        const Vec hrz = s + G_ * x;
        const Vec rx = hrx - c_ * tau;
        const Vec ry = hry - b_ * tau;
        const Vec rz = hrz - h_ * tau;
        const double cx = c_.dot(x), by = b_.dot(y), hz = h_.dot(z);
        const double rt = kap + cx + by + hz;
        const double mu = (s.dot(z) + tau * kap) / (D + 1.0);

        // convergence tests in the original data
        const double pres =
            std::max(inf_norm(ry.cwiseProduct(ea_)), inf_norm(rz.cwiseProduct(eg_))) / tau / bh_norm;
        const double dres = inf_norm(rx.cwiseProduct(ex_)) / tau / c_norm;
        const double pcost = cx / tau, dcost = -(by + hz) / tau;
        const double gap = s.dot(z) / (tau * tau);
        double relgap = std::numeric_limits<double>::infinity();
        if (pcost < 0) relgap = gap / -pcost;
        else if (dcost > 0) relgap = gap / dcost;
        res.primal_residual = pres * bh_norm;
        res.dual_residual = dres * c_norm;
        res.gap = gap;

        if (st_.verbose)
            spdlog::debug("ipm {:3d} pcost {:+.6e} dcost {:+.6e} gap {:.2e} pres {:.2e} dres {:.2e} k/t {:.2e}",
                          iter, pcost, dcost, gap, pres, dres, kap / tau);

        auto finish = [&](SolveStatus status) {
            res.status = status;
            const Vec xo = x.cwiseQuotient(ex_) / tau;
            res.x.assign(xo.data(), xo.data() + xo.size());
            res.objective = f_.c.dot(xo) + f_.obj_const;
            return res;
        };

        if (pres < st_.feastol && dres < st_.feastol && (gap < st_.abstol || relgap < st_.reltol))
            return finish(SolveStatus::Optimal);

        // infeasibility certificates
        if (by + hz < 0 && kap > tau) {
            const double pinf = inf_norm(hrx.cwiseProduct(ex_)) / (-(by + hz));
            if (pinf < st_.feastol) {
                finish(SolveStatus::Infeasible);
                const Vec zo = z.cwiseQuotient(eg_), yo = y.cwiseQuotient(ea_);
                const double zmax = std::max(inf_norm(zo), inf_norm(yo));
                for (int i = 0; i < m_; ++i)
                    if (std::abs(zo[i]) > 1e-6 * zmax) res.certificate.push_back(f_.ineq_names[static_cast<size_t>(i)]);
                for (int i = 0; i < p_; ++i)
                    if (std::abs(yo[i]) > 1e-6 * zmax) res.certificate.push_back(f_.eq_names[static_cast<size_t>(i)]);
                std::sort(res.certificate.begin(), res.certificate.end());
                res.certificate.erase(std::unique(res.certificate.begin(), res.certificate.end()),
                                      res.certificate.end());
                return res;
            }
        }
        if (cx < 0 && kap > tau) {
            const double dinf = std::max(inf_norm(hry.cwiseProduct(ea_)), inf_norm(hrz.cwiseProduct(eg_))) / (-cx);
            if (dinf < st_.feastol) return finish(SolveStatus::Unbounded);
        }
        if (iter == st_.max_iter) return finish(SolveStatus::IterationLimit);

        // scaling and factorization
        cones_.update_scaling(s, z, lp_w, sc, lambda);
        if (!factorize(assemble(lp_w, sc, false))) return finish(SolveStatus::NumericalFailure);

        rhs << -c_, b_, h_;
        const Vec sol1 = solve(rhs, lp_w, sc, false);
        const double den = c_.dot(sol1.head(n_)) + b_.dot(sol1.segment(n_, p_)) + h_.dot(sol1.tail(m_)) - kap / tau;

        struct Dir {
            Vec dx, dy, dz, ds;
            double dtau, dkap;
        };
        auto direction = [&](const Vec& ds_t, double dkap_t, double scale) {
            Vec r(n_ + p_ + m_);
            r << scale * rx, -scale * ry, -scale * rz + cones_.apply_W(lp_w, sc, cones_.div(lambda, ds_t));
            const Vec sol2 = solve(r, lp_w, sc, false);
            const double num = -scale * rt + dkap_t / tau -
                               (c_.dot(sol2.head(n_)) + b_.dot(sol2.segment(n_, p_)) + h_.dot(sol2.tail(m_)));
            Dir d;
            d.dtau = num / den;
            const Vec full = sol2 + d.dtau * sol1;
            d.dx = full.head(n_);
            d.dy = full.segment(n_, p_);
            d.dz = full.tail(m_);
            d.ds = -cones_.apply_W(lp_w, sc, cones_.div(lambda, ds_t) + cones_.apply_W(lp_w, sc, d.dz));
            d.dkap = -(dkap_t + kap * d.dtau) / tau;
            return d;
        };
        auto step_length = [&](const Dir& d) {
            double a = std::min(cones_.max_step(s, d.ds), cones_.max_step(z, d.dz));
            if (d.dtau < 0) a = std::min(a, -tau / d.dtau);
            if (d.dkap < 0) a = std::min(a, -kap / d.dkap);
            return a;
        };

        // predictor
        const Vec ll = cones_.prod(lambda, lambda);
        const Dir aff = direction(ll, kap * tau, 1.0);
        const double a_aff = std::min(1.0, step_length(aff));
        const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 1e-4, 1.0);

        // corrector
        const Vec corr = cones_.prod(cones_.apply_Winv(lp_w, sc, aff.ds), cones_.apply_W(lp_w, sc, aff.dz));
        const Vec ds_t = ll + corr - sigma * mu * e;
        const double dkap_t = kap * tau + aff.dkap * aff.dtau - sigma * mu;
        const Dir d = direction(ds_t, dkap_t, 1.0 - sigma);
        const double alpha = std::min(1.0, 0.99 * step_length(d));
        if (!(alpha > 1e-12) || !std::isfinite(alpha)) return finish(SolveStatus::NumericalFailure);

        x += alpha * d.dx;
        y += alpha * d.dy;
        z += alpha * d.dz;
        s += alpha * d.ds;
        tau += alpha * d.dtau;
        kap += alpha * d.dkap;
    }
    return res;
}

// Problems without cone rows: solve the equality-constrained system directly.
SolverResult solve_equality_only(const StandardForm& f) {
    SolverResult res;
    const int n = f.n, p = static_cast<int>(f.A.rows());
    Mat K = Mat::Zero(n + p, n + p);
    const Mat A = Mat(f.A);
    K.block(0, n, n, p) = A.transpose();
    K.block(n, 0, p, n) = A;
    Vec rhs(n + p);
    rhs << -f.c, f.b;
    const Vec sol = K.completeOrthogonalDecomposition().solve(rhs);
    const Vec x = sol.head(n);
    const double pres = p ? inf_norm(A * x - f.b) : 0.0;
    const double dres = inf_norm(A.transpose() * sol.tail(p) + f.c);
    res.x.assign(x.data(), x.data() + n);
    res.objective = f.c.dot(x) + f.obj_const;
    res.primal_residual = pres;
    res.dual_residual = dres;
    if (pres > 1e-8) res.status = SolveStatus::Infeasible;
    else if (dres > 1e-8) res.status = SolveStatus::Unbounded;
    else res.status = SolveStatus::Optimal;
    return res;
}

}  // namespace

namespace {

// Rows of a Farkas certificate A'y + G'z = 0, b'y + h'z = -1, z in K with
// least l1 weight; empty if that auxiliary problem cannot be solved.
std::vector<std::string> sparse_certificate(const StandardForm& f, const SolverSettings& settings) {
    ConicModel m;
    const auto p = static_cast<int>(f.b.size()), q = static_cast<int>(f.h.size());
    std::vector<LinearExpr> stationarity(static_cast<size_t>(f.n));
    LinearExpr value, weight;
    std::vector<VarId> y(static_cast<size_t>(p)), z(static_cast<size_t>(q));
    for (int i = 0; i < p; ++i) {
        y[static_cast<size_t>(i)] = m.add_variable("y" + std::to_string(i));
        const VarId t = m.add_variable("t" + std::to_string(i), 0.0);
        m.add_row("abs+" + std::to_string(i), LinearExpr().add(t, 1.0).add(y[static_cast<size_t>(i)], -1.0), Sense::Ge, 0.0);
        m.add_row("abs-" + std::to_string(i), LinearExpr().add(t, 1.0).add(y[static_cast<size_t>(i)], 1.0), Sense::Ge, 0.0);
        weight.add(t, 1.0);
        value.add(y[static_cast<size_t>(i)], f.b[i]);
    }
    for (int i = 0; i < q; ++i) {
        z[static_cast<size_t>(i)] = m.add_variable("z" + std::to_string(i), i < f.lp ? 0.0 : -kInf);
        value.add(z[static_cast<size_t>(i)], f.h[i]);
        if (i < f.lp) weight.add(z[static_cast<size_t>(i)], 1.0);
    }
    int offset = f.lp;
    for (int dim : f.soc) {
        SocConstraint c;
        c.name = "k" + std::to_string(offset);
        c.head.add(z[static_cast<size_t>(offset)], 1.0);
        for (int k = 1; k < dim; ++k) c.tail.push_back(LinearExpr().add(z[static_cast<size_t>(offset + k)], 1.0));
        weight.add(z[static_cast<size_t>(offset)], 1.0);
        m.add_cone(std::move(c));
        offset += dim;
    }
    for (int k = 0; k < f.A.outerSize(); ++k)
        for (SpMat::InnerIterator it(f.A, k); it; ++it) stationarity[static_cast<size_t>(it.col())].add(y[static_cast<size_t>(it.row())], it.value());
    for (int k = 0; k < f.G.outerSize(); ++k)
        for (SpMat::InnerIterator it(f.G, k); it; ++it) stationarity[static_cast<size_t>(it.col())].add(z[static_cast<size_t>(it.row())], it.value());
    for (int j = 0; j < f.n; ++j)
        if (!stationarity[static_cast<size_t>(j)].terms.empty())
            m.add_row("x" + std::to_string(j), stationarity[static_cast<size_t>(j)], Sense::Eq, 0.0);
    m.add_row("value", value, Sense::Eq, -1.0);
    m.set_objective(weight);

    const SolverResult r = solve_socp(m, settings);
    std::vector<std::string> out;
    if (!r.optimal()) return out;
    double zmax = 0.0;
    for (int i = 0; i < p; ++i) zmax = std::max(zmax, std::abs(r.x[static_cast<size_t>(y[static_cast<size_t>(i)])]));
    for (int i = 0; i < q; ++i) zmax = std::max(zmax, std::abs(r.x[static_cast<size_t>(z[static_cast<size_t>(i)])]));
    for (int i = 0; i < p; ++i)
        if (std::abs(r.x[static_cast<size_t>(y[static_cast<size_t>(i)])]) > 1e-6 * zmax) out.push_back(f.eq_names[static_cast<size_t>(i)]);
    for (int i = 0; i < q; ++i)
        if (std::abs(r.x[static_cast<size_t>(z[static_cast<size_t>(i)])]) > 1e-6 * zmax) out.push_back(f.ineq_names[static_cast<size_t>(i)]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

SolverResult solve_socp(const ConicModel& model, const SolverSettings& settings) {
    StandardForm f = to_standard_form(model);
    if (f.G.rows() == 0) return solve_equality_only(f);
    Ipm ipm(std::move(f), settings);
    return ipm.run();
}

std::vector<std::string> infeasibility_certificate(const ConicModel& model, const SolverSettings& settings) {
    return sparse_certificate(to_standard_form(model), settings);
}

}  // namespace socpf
