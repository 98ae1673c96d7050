#ifndef GREENKAM_FLOW_HPP
#define GREENKAM_FLOW_HPP

#include <cmath>
#include <cstdlib>

#include "greenkam/common.hpp"
#include "greenkam/model.hpp"

namespace greenkam {

struct FlowConfig {
    enum class Method { SymplecticLeapfrog, ImplicitMidpoint };
    double h = 1e-3;
    Method method = Method::SymplecticLeapfrog;
    double max_energy_drift = 5e-5;  // allowed |dH| per unit time
    double horizon = 1e3;
};

/// One 2n x 2n factor of the cocycle D phi_t, block-ordered (dq; dp).
struct CocycleMatrix {
    Mat entries;
};

inline TangentVector flow_vector(const TonelliModel& m, const PhasePoint& x) {
    return TangentVector{m.dHdp(x.q, x.p), (-m.dHdq(x.q, x.p)).eval()};
}

/// Step-wise integrator for Hamilton's equations and the variational system.
/// The tangent factors returned by step() use exactly the same stepping as
/// the base orbit, so long-horizon cocycles can be consumed factor by factor.
class FlowStepper {
  public:
    FlowStepper(const TonelliModel& m, PhasePoint x, const FlowConfig& cfg)
        : model_(&m), x_(std::move(x)), cfg_(cfg) {}

    const PhasePoint& state() const { return x_; }

    // Advance by h (signed); returns nothing.
    void advance(double h) {
        if (cfg_.method == FlowConfig::Method::SymplecticLeapfrog)
            leapfrog(h, nullptr);
        else
            midpoint(h, nullptr);
    }

    // Advance by h and return the tangent map of this step.
    Mat advance_tangent(double h) {
        Mat d = Mat::Identity(2 * model_->n, 2 * model_->n);
        if (cfg_.method == FlowConfig::Method::SymplecticLeapfrog)
            leapfrog(h, &d);
        else
            midpoint(h, &d);
        return d;
    }

  private:
    void leapfrog(double h, Mat* tangent) {
        int n = model_->n;
        Vec& q = x_.q;
        Vec& p = x_.p;
        if (tangent) {
            // kick factor at current q
            Mat k0 = Mat::Identity(2 * n, 2 * n);
            k0.bottomLeftCorner(n, n) = -(h / 2) * model_->Hqq(q, p);
            *tangent = k0 * (*tangent);
        }
        p -= (h / 2) * model_->dHdq(q, p);
        if (tangent) {
            Mat dr = Mat::Identity(2 * n, 2 * n);
            dr.topRightCorner(n, n) = h * model_->Hpp(q, p);
            *tangent = dr * (*tangent);
        }
        q += h * model_->dHdp(q, p);
        q = wrap01(q);
        if (tangent) {
            Mat k1 = Mat::Identity(2 * n, 2 * n);
            k1.bottomLeftCorner(n, n) = -(h / 2) * model_->Hqq(q, p);
            *tangent = k1 * (*tangent);
        }
        p -= (h / 2) * model_->dHdq(q, p);
    }

    void midpoint(double h, Mat* tangent) {
        int n = model_->n;
        Vec z0(2 * n);
        z0 << x_.q, x_.p;
        Mat j = symplectic_j(n);
        Vec z1 = z0;
        // Newton on z1 - z0 - h J grad H(mid) = 0
        for (int it = 0; it < 30; ++it) {
            Vec mid = 0.5 * (z0 + z1);
            Vec g(2 * n);
            g << model_->dHdq(mid.head(n), mid.tail(n)), model_->dHdp(mid.head(n), mid.tail(n));
            Vec f = z1 - z0 - h * j * g;
            if (f.norm() < 1e-14) break;
            Mat jf = Mat::Identity(2 * n, 2 * n) -
                     (h / 2) * j * model_->hessian(mid.head(n), mid.tail(n));
            z1 -= jf.lu().solve(f);
        }
        if (tangent) {
            Vec mid = 0.5 * (z0 + z1);
            Mat b = model_->hessian(mid.head(n), mid.tail(n));
            Mat lhs = Mat::Identity(2 * n, 2 * n) - (h / 2) * j * b;
            Mat rhs = Mat::Identity(2 * n, 2 * n) + (h / 2) * j * b;
            *tangent = lhs.lu().solve(rhs) * (*tangent);
        }
        x_.q = wrap01(z1.head(n));
        x_.p = z1.tail(n);
    }

    const TonelliModel* model_;
    PhasePoint x_;
    FlowConfig cfg_;
};

namespace detail {
// Uniform substep count for a requested time t.
inline int substeps(double t, double h) {
    return std::max(1, static_cast<int>(std::ceil(std::abs(t) / h - 1e-12)));
}
}  // namespace detail

inline PhasePoint integrate(const TonelliModel& m, const PhasePoint& x, double t,
                            const FlowConfig& cfg = {}) {
    if (std::abs(t) > cfg.horizon)
        throw IntegrationError("requested time exceeds configured horizon");
    double e0 = m.energy(x);
    FlowStepper st(m, x, cfg);
    int nsteps = detail::substeps(t, cfg.h);
    double hs = t / nsteps;
    for (int k = 0; k < nsteps; ++k) st.advance(hs);
    double drift = std::abs(m.energy(st.state()) - e0);
    double budget = cfg.max_energy_drift * std::max(1.0, std::abs(t));
    if (drift > budget)
        throw IntegrationError("energy drift " + std::to_string(drift) + " exceeds budget " +
                               std::to_string(budget) + " over t=" + std::to_string(t));
    return st.state();
}

/// D phi_t(x) by joint integration of the variational system along the orbit.
inline CocycleMatrix linearized_flow(const TonelliModel& m, const PhasePoint& x, double t,
                                     const FlowConfig& cfg = {}) {
    if (std::abs(t) > cfg.horizon)
        throw IntegrationError("requested time exceeds configured horizon");
    FlowStepper st(m, x, cfg);
    int nsteps = detail::substeps(t, cfg.h);
    double hs = t / nsteps;
    Mat d = Mat::Identity(2 * m.n, 2 * m.n);
    for (int k = 0; k < nsteps; ++k) d = st.advance_tangent(hs) * d;
    return CocycleMatrix{d};
}

}  // namespace greenkam

#endif
