#ifndef GREENKAM_ACTION_HPP
#define GREENKAM_ACTION_HPP

#include <cmath>
#include <vector>

#include "greenkam/common.hpp"
#include "greenkam/model.hpp"

namespace greenkam {

/// Broken minimizing path between two lifted configuration points, with the
/// trapezoidal action value and the discrete boundary momenta.
struct MinimizingArc {
    std::vector<Vec> nodes;  // lifted, sub_steps + 1 entries
    double t = 0;
    double value = 0;
    Vec p_start, p_end;  // discrete Legendre momenta at the ends
    bool certified = true;
    double grad_norm = 0;  // interior Euler-Lagrange residual at exit
};

struct ActionConfig {
    double grad_tol = 1e-10;
    int max_iter = 60;
};

namespace detail {

// First derivatives of L only; the hot path of the action table.
struct LagFirst {
    double L;
    Vec Lq, Lv;
};

inline LagFirst lag_first(const TonelliModel& m, const Vec& q, const Vec& v) {
    Vec p = v;
    for (int it = 0; it < 50; ++it) {
        Vec r = m.dHdp(q, p) - v;
        if (r.squaredNorm() < 1e-26) break;
        p -= m.Hpp(q, p).ldlt().solve(r);
        if (it == 49) throw ConvergenceError(m.name + ": Legendre Newton stalled");
    }
    return LagFirst{p.dot(v) - m.H(q, p), -m.dHdq(q, p), p};
}

// Minimizes the trapezoidal action over interior nodes; endpoints fixed.
// Damped Newton from the given seed. Returns false on non-convergence.
inline bool minimize_arc(const TonelliModel& m, std::vector<Vec>& z, double t,
                         const ActionConfig& cfg, double& value_out, double& gnorm_out) {
    int nn = m.n;
    int nseg = static_cast<int>(z.size()) - 1;
    int nvar = (nseg - 1) * nn;
    double h = t / nseg;

    auto eval_grad = [&](const std::vector<Vec>& zz, Vec& grad) {
        double total = 0;
        grad.setZero();
        for (int i = 0; i < nseg; ++i) {
            Vec v = (zz[i + 1] - zz[i]) / h;
            auto da = lag_first(m, zz[i], v);
            auto db = lag_first(m, zz[i + 1], v);
            total += (h / 2) * (da.L + db.L);
            Vec psum = 0.5 * (da.Lv + db.Lv);
            if (i > 0) grad.segment((i - 1) * nn, nn) += (h / 2) * da.Lq - psum;
            if (i < nseg - 1) grad.segment(i * nn, nn) += (h / 2) * db.Lq + psum;
        }
        return total;
    };

    Vec grad(nvar);
    double value = eval_grad(z, grad);
    gnorm_out = grad.norm();
    if (nvar == 0 || gnorm_out < cfg.grad_tol) {
        value_out = value;
        return true;
    }

    Mat hess(nvar, nvar);
    double lambda = 0;
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        // assemble the block-tridiagonal Hessian of the trapezoidal action
        hess.setZero();
        for (int i = 0; i < nseg; ++i) {
            Vec v = (z[i + 1] - z[i]) / h;
            auto da = lagrangian_derivs(m, z[i], v);
            auto db = lagrangian_derivs(m, z[i + 1], v);
            Mat vv = (da.Lvv + db.Lvv) / (2 * h);
            Mat haa = (h / 2) * da.Lqq - 0.5 * (da.Lqv + da.Lqv.transpose()) + vv;
            Mat hbb = (h / 2) * db.Lqq + 0.5 * (db.Lqv + db.Lqv.transpose()) + vv;
            Mat hab = 0.5 * da.Lqv.transpose() - 0.5 * db.Lqv - vv;  // d(de/da)/db
            if (i > 0) hess.block((i - 1) * nn, (i - 1) * nn, nn, nn) += haa;
            if (i < nseg - 1) hess.block(i * nn, i * nn, nn, nn) += hbb;
            if (i > 0 && i < nseg - 1) {
                hess.block((i - 1) * nn, i * nn, nn, nn) += hab.transpose();
                hess.block(i * nn, (i - 1) * nn, nn, nn) += hab;
            }
        }
        bool stepped = false;
        for (int tries = 0; tries < 12 && !stepped; ++tries) {
            Mat hl = hess;
            if (lambda > 0) hl.diagonal().array() += lambda;
            Eigen::LDLT<Mat> ldlt(hl);
            Vec d = ldlt.solve(-grad);
            if (ldlt.info() != Eigen::Success || !d.allFinite() || d.dot(-grad) <= 0) {
                lambda = std::max(1e-8, lambda * 10);
                continue;
            }
            // backtracking on the action value
            double alpha = 1.0;
            for (int ls = 0; ls < 20; ++ls) {
                std::vector<Vec> trial = z;
                for (int k = 1; k < nseg; ++k)
                    trial[k] += alpha * d.segment((k - 1) * nn, nn);
                Vec gtrial(nvar);
                double vtrial = eval_grad(trial, gtrial);
                if (vtrial <= value + 1e-12 * std::abs(value) || gtrial.norm() < grad.norm()) {
                    z = trial;
                    value = vtrial;
                    grad = gtrial;
                    stepped = true;
                    lambda = lambda / 4;
                    break;
                }
                alpha /= 2;
            }
            if (!stepped) lambda = std::max(1e-8, lambda * 10);
        }
        gnorm_out = grad.norm();
        if (gnorm_out < cfg.grad_tol) {
            value_out = value;
            return true;
        }
        if (!stepped) break;
    }
    value_out = value;
    return gnorm_out < 1e2 * cfg.grad_tol;
}

inline MinimizingArc solve_arc_lifted(const TonelliModel& m, const Vec& z0, const Vec& z1,
                                      double t, int sub_steps, const ActionConfig& cfg) {
    std::vector<Vec> z(sub_steps + 1);
    for (int i = 0; i <= sub_steps; ++i) {
        double s = static_cast<double>(i) / sub_steps;
        z[i] = (1 - s) * z0 + s * z1;
    }
    MinimizingArc arc;
    arc.t = t;
    arc.certified = minimize_arc(m, z, t, cfg, arc.value, arc.grad_norm);
    arc.nodes = std::move(z);
    double h = t / sub_steps;
    {
        Vec v0 = (arc.nodes[1] - arc.nodes[0]) / h;
        auto da = lag_first(m, arc.nodes[0], v0);
        auto db = lag_first(m, arc.nodes[1], v0);
        arc.p_start = 0.5 * (da.Lv + db.Lv) - (h / 2) * da.Lq;
        Vec vN = (arc.nodes[sub_steps] - arc.nodes[sub_steps - 1]) / h;
        auto dc = lag_first(m, arc.nodes[sub_steps - 1], vN);
        auto dd = lag_first(m, arc.nodes[sub_steps], vN);
        arc.p_end = 0.5 * (dc.Lv + dd.Lv) + (h / 2) * dd.Lq;
    }
    return arc;
}

}  // namespace detail

/// A_t(q0, q1): minimal trapezoidal action over broken paths with sub_steps
/// segments, minimized over interior nodes and over the integer lifts
/// k in {-1,0,1}^n of the endpoint.
inline MinimizingArc action(const TonelliModel& m, const Vec& q0, const Vec& q1, double t,
                            int sub_steps, const ActionConfig& cfg = {}) {
    if (t <= 0) throw ModelDomainError("action requires t > 0");
    Vec z0 = wrap01(q0), q1w = wrap01(q1);
    MinimizingArc best;
    bool have = false, any_certified = false;
    int n = m.n;
    int lifts = 1;
    for (int i = 0; i < n; ++i) lifts *= 3;
    for (int l = 0; l < lifts; ++l) {
        Vec z1 = q1w;
        int code = l;
        for (int i = 0; i < n; ++i) {
            z1[i] += (code % 3) - 1;
            code /= 3;
        }
        MinimizingArc arc = detail::solve_arc_lifted(m, z0, z1, t, sub_steps, cfg);
        if (!have || arc.value < best.value) {
            best = std::move(arc);
            have = true;
        }
        any_certified = any_certified || best.certified;
    }
    if (!best.certified)
        best.certified = false;  // caller sees UNCERTIFIED via the flag
    return best;
}

}  // namespace greenkam

#endif
