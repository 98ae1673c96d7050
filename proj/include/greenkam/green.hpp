#ifndef GREENKAM_GREEN_HPP
#define GREENKAM_GREEN_HPP

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "greenkam/common.hpp"
#include "greenkam/flow.hpp"
#include "greenkam/model.hpp"

namespace greenkam {

/// Lagrangian subspace transverse to the vertical, stored as the graph
/// {(X, S X)} of a symmetric matrix at its base point.
struct LagrangianGraph {
    Mat S;
    PhasePoint base;
};

struct GreenConfig {
    double riccati_h = 5e-3;       // base Riccati/orbit step
    double blowup_threshold = 1e6; // conjugate-vector detection
    double eps_factor = 1e-4;      // small-time start: S(eps) = Hpp^-1/eps, eps = eps_factor*t
    double t0 = 1.0;               // first doubling time
    double T_max = 1200.0;
    double tol = 1e-3;             // doubling acceptance, matrix norm
    double rank_tol = 1e-6;        // relative kernel threshold on Delta s
    double tail_factor = 3.0;      // kernel threshold also covers the convergence tail
};

/// (s-, s+, Delta s, kernel dimension, tilted bundles) at a phase point.
struct GreenPair {
    LagrangianGraph s_minus, s_plus;
    Mat delta;         // s+ - s-, positive semi-definite up to tolerance
    int p_dim = 0;     // dim ker Delta s at the reported threshold
    Mat tilde_minus;   // 2 s- - s+
    Mat tilde_plus;    // 2 s+ - s-
    Mat p_delta;       // orthogonal projector onto range of Delta s
    double lambda = 0; // largest eigenvalue of Delta s
    double kernel_threshold = 0;
    double T_used_minus = 0, T_used_plus = 0;
    double tail_minus = 0, tail_plus = 0;  // doubling tail differences
};

namespace detail {

struct RiccatiState {
    Vec q, p;
    Mat S;
};

inline RiccatiState riccati_rhs(const TonelliModel& m, const RiccatiState& s) {
    RiccatiState d;
    d.q = m.dHdp(s.q, s.p);
    d.p = -m.dHdq(s.q, s.p);
    Mat hqq = m.Hqq(s.q, s.p), hqp = m.Hqp(s.q, s.p), hpp = m.Hpp(s.q, s.p);
    d.S = -hqq - hqp * s.S - s.S * hqp.transpose() - s.S * hpp * s.S;
    return d;
}

inline RiccatiState riccati_axpy(const RiccatiState& a, double c, const RiccatiState& b) {
    return RiccatiState{a.q + c * b.q, a.p + c * b.p, a.S + c * b.S};
}

}  // namespace detail

/// Graph transform of S under a cocycle factor: S -> (C + D S)(A + B S)^-1.
inline Mat graph_transform(const Mat& dphi, const Mat& s) {
    int n = static_cast<int>(s.rows());
    Mat a = dphi.topLeftCorner(n, n), b = dphi.topRightCorner(n, n);
    Mat c = dphi.bottomLeftCorner(n, n), d = dphi.bottomRightCorner(n, n);
    return (c + d * s) * (a + b * s).inverse();
}

/// Symmetric matrix S_t whose graph is G_t(x) = D phi_t V(phi_{-t} x).
/// Integrates the matrix Riccati equation along the orbit, started from the
/// small-time asymptotic S(eps) = Hpp(phi_{-t}x)^-1 / eps.
inline LagrangianGraph pushed_vertical(const TonelliModel& m, const PhasePoint& x, double t,
                                       const FlowConfig& fcfg = {}, const GreenConfig& gcfg = {}) {
    if (t == 0.0) throw ModelDomainError("pushed_vertical requires t != 0");
    FlowConfig fc = fcfg;
    fc.horizon = std::max(fc.horizon, std::abs(t));
    double sign0 = (t > 0) ? 1.0 : -1.0;
    double eps = gcfg.eps_factor * sign0 * std::min(1.0, std::abs(t));
    // orbit starts where the asymptotic start S(eps) lives, so that the
    // integration ends exactly at x
    PhasePoint y0 = integrate(m, x, -(t - eps), fc);
    detail::RiccatiState st{y0.q, y0.p, m.Hpp(y0.q, y0.p).inverse() / eps};
    double tau = eps;
    double sign = sign0;
    while (sign * (t - tau) > 1e-14) {
        double sn = st.S.norm();
        if (sn > gcfg.blowup_threshold)
            throw ConjugatePointError(
                "conjugate vector encountered: Riccati blow-up at t=" + std::to_string(tau), tau);
        // adaptive near the singular start, capped by the base step
        double dt = std::min(gcfg.riccati_h, 0.1 / (1.0 + sn));
        dt = sign * std::min(dt, sign * (t - tau));
        auto k1 = detail::riccati_rhs(m, st);
        auto k2 = detail::riccati_rhs(m, detail::riccati_axpy(st, dt / 2, k1));
        auto k3 = detail::riccati_rhs(m, detail::riccati_axpy(st, dt / 2, k2));
        auto k4 = detail::riccati_rhs(m, detail::riccati_axpy(st, dt, k3));
        st.q += (dt / 6) * (k1.q + 2 * k2.q + 2 * k3.q + k4.q);
        st.p += (dt / 6) * (k1.p + 2 * k2.p + 2 * k3.p + k4.p);
        st.S += (dt / 6) * (k1.S + 2 * k2.S + 2 * k3.S + k4.S);
        st.S = symmetrize(st.S);
        tau += dt;
    }
    if (st.S.norm() > gcfg.blowup_threshold)
        throw ConjugatePointError("conjugate vector encountered at t=" + std::to_string(t), t);
    return LagrangianGraph{symmetrize(st.S), x};
}

namespace detail {

// Doubling limit S_{2^k t0} -> s_lim; one Richardson step cancels the 1/t tail.
struct GreenLimit {
    Mat s;
    double T_used, tail;
};

inline GreenLimit green_limit(const TonelliModel& m, const PhasePoint& x, double direction,
                              const FlowConfig& fcfg, const GreenConfig& gcfg) {
    double t = gcfg.t0 * direction;
    Mat s_prev = pushed_vertical(m, x, t, fcfg, gcfg).S;
    double last_tail = std::numeric_limits<double>::infinity();
    while (std::abs(t) * 2 <= gcfg.T_max) {
        t *= 2;
        Mat s_cur = pushed_vertical(m, x, t, fcfg, gcfg).S;
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(s_cur - s_prev));
        last_tail = es.eigenvalues().cwiseAbs().maxCoeff();  // operator norm
        if (last_tail <= gcfg.tol)
            return GreenLimit{2 * s_cur - s_prev, std::abs(t), last_tail};
        s_prev = s_cur;
    }
    throw LimitNotReachedError(
        "Green limit not reached at T_max (tail " + std::to_string(last_tail) + ")", last_tail);
}

}  // namespace detail

/// Green bundles s-/s+ as limits of pushed verticals, with the gap Delta s,
/// its kernel dimension and the tilted bundles.
inline GreenPair green_bundles(const TonelliModel& m, const PhasePoint& x, double T_max,
                               double tol, const FlowConfig& fcfg = {}, GreenConfig gcfg = {}) {
    gcfg.T_max = T_max;
    gcfg.tol = tol;
    auto lim_plus = detail::green_limit(m, x, +1.0, fcfg, gcfg);
    auto lim_minus = detail::green_limit(m, x, -1.0, fcfg, gcfg);

    GreenPair gp{LagrangianGraph{lim_minus.s, x}, LagrangianGraph{lim_plus.s, x}};
    gp.T_used_plus = lim_plus.T_used;
    gp.T_used_minus = lim_minus.T_used;
    gp.tail_plus = lim_plus.tail;
    gp.tail_minus = lim_minus.tail;
    gp.delta = symmetrize(lim_plus.s - lim_minus.s);
    gp.tilde_minus = 2 * lim_minus.s - lim_plus.s;
    gp.tilde_plus = 2 * lim_plus.s - lim_minus.s;

    Eigen::SelfAdjointEigenSolver<Mat> es(gp.delta);
    gp.lambda = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < -1e-7 * (1 + gp.lambda))
        throw ModelDomainError("Delta s not positive semi-definite beyond tolerance");
    gp.kernel_threshold = std::max(gcfg.rank_tol * (1 + gp.lambda),
                                   gcfg.tail_factor * (gp.tail_minus + gp.tail_plus));
    int n = m.n;
    gp.p_dim = 0;
    Mat range_basis(n, n);
    int r = 0;
    for (int i = 0; i < n; ++i) {
        if (es.eigenvalues()[i] <= gp.kernel_threshold)
            ++gp.p_dim;
        else
            range_basis.col(r++) = es.eigenvectors().col(i);
    }
    gp.p_delta = (r > 0) ? Mat(range_basis.leftCols(r) * range_basis.leftCols(r).transpose())
                         : Mat::Zero(n, n);
    return gp;
}

// ---- dynamical criterion ----------------------------------------------

struct GrowthSample {
    double t;
    double horizontal_norm;  // || X-component of D phi_t v ||
};

struct GrowthReport {
    std::vector<GrowthSample> forward, backward;
    double dist_to_minus = 0, dist_to_plus = 0;  // ||Y - s X|| / ||v||
    bool in_minus = false, in_plus = false;
    bool diverges_forward = false, diverges_backward = false;
    std::string verdict;  // "DIVERGES" or "BOUNDED" (forward direction)
};

/// Growth of the horizontal component of D phi_t v, classified against the
/// Green bundles per the dynamical criterion.
inline GrowthReport dynamical_criterion_check(const TonelliModel& m, const PhasePoint& x,
                                              const TangentVector& v, double T,
                                              const GreenPair& pair, const FlowConfig& cfg = {},
                                              double membership_tol = 1e-3, int samples = 16) {
    GrowthReport rep;
    double vnorm = v.flat().norm();
    rep.dist_to_minus = (v.Y - pair.s_minus.S * v.X).norm() / vnorm;
    rep.dist_to_plus = (v.Y - pair.s_plus.S * v.X).norm() / vnorm;
    rep.in_minus = rep.dist_to_minus <= membership_tol;
    rep.in_plus = rep.dist_to_plus <= membership_tol;

    for (double dir : {+1.0, -1.0}) {
        auto& out = (dir > 0) ? rep.forward : rep.backward;
        FlowStepper st(m, x, cfg);
        Vec w = v.flat();
        int n = m.n;
        double t_sample = T / samples;
        double initial = w.head(n).norm() > 0 ? w.head(n).norm() : w.norm();
        for (int s = 1; s <= samples; ++s) {
            int nsteps = detail::substeps(t_sample, cfg.h);
            double hs = dir * t_sample / nsteps;
            for (int k = 0; k < nsteps; ++k) w = st.advance_tangent(hs) * w;
            out.push_back(GrowthSample{dir * s * t_sample, w.head(n).norm()});
        }
        bool div = out.back().horizontal_norm >= 1e3 * initial;
        if (dir > 0)
            rep.diverges_forward = div;
        else
            rep.diverges_backward = div;
    }
    rep.verdict = rep.diverges_forward ? "DIVERGES" : "BOUNDED";
    return rep;
}

// ---- ordered-family scan ----------------------------------------------

struct MonotonicityReport {
    bool pass = true;
    double worst_margin = std::numeric_limits<double>::infinity();
    std::string offending_pair;
    std::vector<std::pair<double, Mat>> family;  // (t, S_t) for +-each requested time
};

/// Checks the ordering S_{-a} < S_{-b} < S_b < S_a for all pairs a < b of
/// the requested positive times (strictness reported via eigenvalue margins).
inline MonotonicityReport monotonicity_scan(const TonelliModel& m, const PhasePoint& x,
                                            const std::vector<double>& times,
                                            const FlowConfig& fcfg = {},
                                            const GreenConfig& gcfg = {}) {
    MonotonicityReport rep;
    std::vector<double> ts = times;
    std::sort(ts.begin(), ts.end());
    std::vector<Mat> s_pos, s_neg;
    for (double t : ts) {
        s_pos.push_back(pushed_vertical(m, x, t, fcfg, gcfg).S);
        s_neg.push_back(pushed_vertical(m, x, -t, fcfg, gcfg).S);
        rep.family.emplace_back(t, s_pos.back());
        rep.family.emplace_back(-t, s_neg.back());
    }
    auto margin = [](const Mat& lo, const Mat& hi) {
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(hi - lo));
        return es.eigenvalues().minCoeff();
    };
    auto record = [&](double mgn, const std::string& label) {
        if (mgn < rep.worst_margin) {
            rep.worst_margin = mgn;
            rep.offending_pair = label;
        }
        if (mgn < -1e-9) rep.pass = false;
    };
    for (size_t i = 0; i < ts.size(); ++i) {
        for (size_t k = i + 1; k < ts.size(); ++k) {
            double a = ts[i], b = ts[k];
            record(margin(s_neg[i], s_neg[k]),
                   "S(-" + std::to_string(a) + ") < S(-" + std::to_string(b) + ")");
            record(margin(s_pos[k], s_pos[i]),
                   "S(" + std::to_string(b) + ") < S(" + std::to_string(a) + ")");
        }
        record(margin(s_neg[i], s_pos[i]),
               "S(-" + std::to_string(ts[i]) + ") < S(" + std::to_string(ts[i]) + ")");
    }
    return rep;
}

}  // namespace greenkam

#endif
