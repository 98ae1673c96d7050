#ifndef GREENKAM_MODEL_HPP
#define GREENKAM_MODEL_HPP

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "greenkam/common.hpp"

namespace greenkam {

/// Point of the configuration torus T^n, canonical representative in [0,1)^n.
struct TorusPoint {
    Vec q;
    explicit TorusPoint(Vec q_) : q(wrap01(std::move(q_))) {}
    double dist(const TorusPoint& other) const { return torus_dist(q, other.q); }
};

/// Point (q,p) of T*T^n.
struct PhasePoint {
    Vec q;  // torus coordinates, kept in [0,1)^n
    Vec p;  // momentum covector
    PhasePoint() = default;
    PhasePoint(Vec q_, Vec p_) : q(wrap01(std::move(q_))), p(std::move(p_)) {}
};

/// Tangent vector at a phase point, split into horizontal (dq) and
/// vertical (dp) parts. The linear vertical is {X = 0}.
struct TangentVector {
    Vec X, Y;
    Vec flat() const {
        Vec v(X.size() + Y.size());
        v << X, Y;
        return v;
    }
    static TangentVector from_flat(const Vec& v) {
        int n = static_cast<int>(v.size()) / 2;
        return TangentVector{v.head(n), v.tail(n)};
    }
};

/// Tonelli Hamiltonian on T*T^n with analytic derivatives. All evaluators
/// accept unwrapped q (everything is 1-periodic in each coordinate) and are
/// pure, so a model may be shared freely across threads.
class TonelliModel {
  public:
    std::string name;
    int n = 1;
    std::map<std::string, double> parameters;

    std::function<double(const Vec&, const Vec&)> H;
    std::function<Vec(const Vec&, const Vec&)> dHdq;
    std::function<Vec(const Vec&, const Vec&)> dHdp;
    std::function<Mat(const Vec&, const Vec&)> Hqq;
    std::function<Mat(const Vec&, const Vec&)> Hqp;  // d2H/dq dp, (i,j) = d2H/dq_i dp_j
    std::function<Mat(const Vec&, const Vec&)> Hpp;

    Mat Hpq(const Vec& q, const Vec& p) const { return Hqp(q, p).transpose(); }

    Mat hessian(const Vec& q, const Vec& p) const {
        Mat h(2 * n, 2 * n);
        h.topLeftCorner(n, n) = Hqq(q, p);
        h.topRightCorner(n, n) = Hqp(q, p);
        h.bottomLeftCorner(n, n) = Hpq(q, p);
        h.bottomRightCorner(n, n) = Hpp(q, p);
        return h;
    }

    double energy(const PhasePoint& x) const {
        double e = H(x.q, x.p);
        if (!std::isfinite(e))
            throw ModelDomainError(name + ": non-finite energy at queried point");
        return e;
    }
};

inline double eval_hamiltonian(const TonelliModel& m, const PhasePoint& x) {
    return m.energy(x);
}

/// Fiber derivative: v = dH/dp(q,p).
inline Vec legendre_inverse(const TonelliModel& m, const PhasePoint& x) {
    return m.dHdp(x.q, x.p);
}

/// Solve v = dH/dp(q,p) for p by Newton and return (p, L(q,v)).
inline std::pair<Vec, double> legendre(const TonelliModel& m, const Vec& q, const Vec& v) {
    Vec p = v;  // exact seed for H = |p|^2/2 + ..., good generally
    for (int it = 0; it < 50; ++it) {
        Vec r = m.dHdp(q, p) - v;
        if (r.norm() < 1e-13) {
            double lv = p.dot(v) - m.H(q, p);
            return {p, lv};
        }
        p -= m.Hpp(q, p).ldlt().solve(r);
    }
    throw ConvergenceError(m.name + ": Legendre Newton did not converge in 50 iterations");
}

// Lagrangian and its derivatives via the Legendre correspondence.
inline double lagrangian(const TonelliModel& m, const Vec& q, const Vec& v) {
    return legendre(m, q, v).second;
}

struct LagrangianDerivs {
    double L;
    Vec Lq, Lv;
    Mat Lqq, Lqv, Lvv;  // Lqv(i,j) = d2L/dq_i dv_j
};

inline LagrangianDerivs lagrangian_derivs(const TonelliModel& m, const Vec& q, const Vec& v) {
    auto [p, lval] = legendre(m, q, v);
    LagrangianDerivs d;
    d.L = lval;
    d.Lv = p;
    d.Lq = -m.dHdq(q, p);
    Mat hpp_inv = m.Hpp(q, p).inverse();
    Mat dp_dq = -hpp_inv * m.Hpq(q, p);  // from differentiating v = H_p(q, p(q,v))
    d.Lvv = hpp_inv;
    d.Lqv = dp_dq.transpose();  // dL_v/dq = dp/dq, stored transposed to match (i,j) convention
    d.Lqq = -m.Hqq(q, p) - m.Hqp(q, p) * dp_dq;
    return d;
}

// ---- built-in catalog --------------------------------------------------

namespace detail {

constexpr double kTwoPi = 6.283185307179586476925286766559;

inline TonelliModel make_free_rotor() {
    TonelliModel m;
    m.name = "FreeRotor";
    m.n = 1;
    m.H = [](const Vec&, const Vec& p) { return 0.5 * p.squaredNorm(); };
    m.dHdq = [](const Vec& q, const Vec&) { return Vec::Zero(q.size()).eval(); };
    m.dHdp = [](const Vec&, const Vec& p) { return p; };
    m.Hqq = [](const Vec& q, const Vec&) { return Mat::Zero(q.size(), q.size()).eval(); };
    m.Hqp = [](const Vec& q, const Vec&) { return Mat::Zero(q.size(), q.size()).eval(); };
    m.Hpp = [](const Vec& q, const Vec&) { return Mat::Identity(q.size(), q.size()).eval(); };
    return m;
}

inline TonelliModel make_pendulum() {
    TonelliModel m;
    m.name = "Pendulum";
    m.n = 1;
    m.H = [](const Vec& q, const Vec& p) {
        return 0.5 * p.squaredNorm() + std::cos(kTwoPi * q[0]);
    };
    m.dHdq = [](const Vec& q, const Vec&) {
        Vec g(1);
        g[0] = -kTwoPi * std::sin(kTwoPi * q[0]);
        return g;
    };
    m.dHdp = [](const Vec&, const Vec& p) { return p; };
    m.Hqq = [](const Vec& q, const Vec&) {
        Mat h(1, 1);
        h(0, 0) = -kTwoPi * kTwoPi * std::cos(kTwoPi * q[0]);
        return h;
    };
    m.Hqp = [](const Vec&, const Vec&) { return Mat::Zero(1, 1).eval(); };
    m.Hpp = [](const Vec&, const Vec&) { return Mat::Identity(1, 1).eval(); };
    return m;
}

inline TonelliModel make_mane_rotor(const std::map<std::string, double>& params) {
    TonelliModel m;
    m.name = "ManeRotor";
    m.n = 2;
    Vec omega(2);
    omega[0] = params.count("omega1") ? params.at("omega1") : 1.0;
    omega[1] = params.count("omega2") ? params.at("omega2") : std::sqrt(2.0);
    m.parameters = {{"omega1", omega[0]}, {"omega2", omega[1]}};
    m.H = [omega](const Vec&, const Vec& p) { return 0.5 * p.squaredNorm() + p.dot(omega); };
    m.dHdq = [](const Vec&, const Vec&) { return Vec::Zero(2).eval(); };
    m.dHdp = [omega](const Vec&, const Vec& p) { return (p + omega).eval(); };
    m.Hqq = [](const Vec&, const Vec&) { return Mat::Zero(2, 2).eval(); };
    m.Hqp = [](const Vec&, const Vec&) { return Mat::Zero(2, 2).eval(); };
    m.Hpp = [](const Vec&, const Vec&) { return Mat::Identity(2, 2).eval(); };
    return m;
}

// H = |p|^2/2 + V(q) with V a two-harmonic trigonometric polynomial:
// V(q) = sum_i a_i cos(2 pi q_i) + b_i cos(4 pi q_i).
inline TonelliModel make_mechanical_t2(const std::map<std::string, double>& params) {
    TonelliModel m;
    m.name = "MechanicalT2";
    m.n = 2;
    auto get = [&](const char* k, double dflt) {
        return params.count(k) ? params.at(k) : dflt;
    };
    Vec a(2), b(2);
    a[0] = get("a1", 0.5);
    a[1] = get("a2", 0.3);
    b[0] = get("b1", 0.1);
    b[1] = get("b2", 0.05);
    m.parameters = {{"a1", a[0]}, {"a2", a[1]}, {"b1", b[0]}, {"b2", b[1]}};
    m.H = [a, b](const Vec& q, const Vec& p) {
        double v = 0.0;
        for (int i = 0; i < 2; ++i)
            v += a[i] * std::cos(kTwoPi * q[i]) + b[i] * std::cos(2 * kTwoPi * q[i]);
        return 0.5 * p.squaredNorm() + v;
    };
    m.dHdq = [a, b](const Vec& q, const Vec&) {
        Vec g(2);
        for (int i = 0; i < 2; ++i)
            g[i] = -kTwoPi * a[i] * std::sin(kTwoPi * q[i]) -
                   2 * kTwoPi * b[i] * std::sin(2 * kTwoPi * q[i]);
        return g;
    };
    m.dHdp = [](const Vec&, const Vec& p) { return p; };
    m.Hqq = [a, b](const Vec& q, const Vec&) {
        Mat h = Mat::Zero(2, 2);
        for (int i = 0; i < 2; ++i)
            h(i, i) = -kTwoPi * kTwoPi * a[i] * std::cos(kTwoPi * q[i]) -
                      4 * kTwoPi * kTwoPi * b[i] * std::cos(2 * kTwoPi * q[i]);
        return h;
    };
    m.Hqp = [](const Vec&, const Vec&) { return Mat::Zero(2, 2).eval(); };
    m.Hpp = [](const Vec&, const Vec&) { return Mat::Identity(2, 2).eval(); };
    return m;
}

}  // namespace detail

inline std::vector<std::string> model_names() {
    return {"FreeRotor", "Pendulum", "ManeRotor", "MechanicalT2"};
}

/// Finite-difference consistency check of the analytic derivatives.
/// Throws if gradient or Hessian blocks disagree beyond the stated tolerance.
inline void validate_derivatives(const TonelliModel& m, const PhasePoint& x,
                                 double step = 1e-5, double rel_tol = 1e-6) {
    int n = m.n;
    Vec z(2 * n);
    z << x.q, x.p;
    auto f = [&](const Vec& w) { return m.H(w.head(n), w.tail(n)); };
    Vec grad(2 * n);
    grad << m.dHdq(x.q, x.p), m.dHdp(x.q, x.p);
    double scale = 1.0 + grad.norm() + std::abs(f(z));
    for (int i = 0; i < 2 * n; ++i) {
        Vec zp = z, zm = z;
        zp[i] += step;
        zm[i] -= step;
        double fd = (f(zp) - f(zm)) / (2 * step);
        if (std::abs(fd - grad[i]) > rel_tol * scale)
            throw ModelDomainError(m.name + ": gradient mismatch vs finite differences");
    }
    Mat hess = m.hessian(x.q, x.p);
    double hscale = 1.0 + hess.norm();
    for (int i = 0; i < 2 * n; ++i) {
        Vec zp = z, zm = z;
        zp[i] += step;
        zm[i] -= step;
        auto g = [&](const Vec& w) {
            Vec gr(2 * n);
            gr << m.dHdq(w.head(n), w.tail(n)), m.dHdp(w.head(n), w.tail(n));
            return gr;
        };
        Vec col = (g(zp) - g(zm)) / (2 * step);
        if ((col - hess.col(i)).norm() > rel_tol * hscale * 10)
            throw ModelDomainError(m.name + ": Hessian mismatch vs finite differences");
    }
}

/// Factory for the built-in catalog. Validates fiber convexity and the
/// analytic derivatives at a few points before handing the model out.
inline TonelliModel make_model(const std::string& name,
                               const std::map<std::string, double>& params = {}) {
    TonelliModel m;
    if (name == "FreeRotor")
        m = detail::make_free_rotor();
    else if (name == "Pendulum")
        m = detail::make_pendulum();
    else if (name == "ManeRotor")
        m = detail::make_mane_rotor(params);
    else if (name == "MechanicalT2")
        m = detail::make_mechanical_t2(params);
    else
        throw ModelDomainError("unknown model: " + name);

    // spot-check convexity and derivative consistency
    for (int k = 0; k < 4; ++k) {
        Vec q = Vec::Constant(m.n, 0.13 + 0.21 * k);
        Vec p = Vec::Constant(m.n, -0.7 + 0.5 * k);
        Eigen::SelfAdjointEigenSolver<Mat> es(m.Hpp(q, p));
        if (es.eigenvalues().minCoeff() <= 0)
            throw ModelDomainError(name + ": H_pp not positive definite");
        validate_derivatives(m, PhasePoint{q, p});
    }
    return m;
}

}  // namespace greenkam

#endif
