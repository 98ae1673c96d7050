#ifndef GREENKAM_LYAPUNOV_HPP
#define GREENKAM_LYAPUNOV_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "greenkam/common.hpp"
#include "greenkam/flow.hpp"
#include "greenkam/green.hpp"
#include "greenkam/model.hpp"

namespace greenkam {

struct LyapunovSpectrum {
    std::vector<double> exponents;  // 2n, sorted descending
    double T = 0, step = 0;
    std::vector<double> slopes;  // per-exponent last-quarter drift
    double zero_tol = 1e-2;
    // cumulative log-diagonal traces for convergence plots: (t, lambda_i(t))
    std::vector<std::pair<double, std::vector<double>>> trace;
};

/// Discrete-QR Lyapunov exponents of D phi_t along the orbit of x.
/// The cocycle is consumed one D phi_step factor at a time; exponents are
/// the second-half averages of the accumulated R-diagonal logs (the full
/// average carries an O(log T / T) bias on polynomially-growing cocycles).
inline LyapunovSpectrum lyapunov_spectrum(const TonelliModel& m, const PhasePoint& x, double T,
                                          double step = 0.5, const FlowConfig& cfg = {},
                                          int trace_points = 32) {
    int dim = 2 * m.n;
    int nsteps = std::max(4, static_cast<int>(std::round(T / step)));
    step = T / nsteps;
    FlowStepper st(m, x, cfg);
    Mat qmat = Mat::Identity(dim, dim);
    Vec sums = Vec::Zero(dim);
    Vec sums_half = Vec::Zero(dim), sums_3q = Vec::Zero(dim);
    int substeps = detail::substeps(step, cfg.h);
    double hs = step / substeps;

    LyapunovSpectrum spec;
    spec.T = T;
    spec.step = step;
    int trace_every = std::max(1, nsteps / trace_points);

    for (int k = 1; k <= nsteps; ++k) {
        Mat a = qmat;
        for (int s = 0; s < substeps; ++s) a = st.advance_tangent(hs) * a;
        Eigen::HouseholderQR<Mat> qr(a);
        Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        qmat = qr.householderQ();
        for (int i = 0; i < dim; ++i) {
            double d = r(i, i);
            if (d < 0) {
                qmat.col(i) *= -1;
                d = -d;
            }
            if (d < 1e-300)
                throw ConvergenceError(
                    "degenerate QR factor (underflow); try a smaller Lyapunov step");
            sums[i] += std::log(d);
        }
        if (k == nsteps / 2) sums_half = sums;
        if (k == (3 * nsteps) / 4) sums_3q = sums;
        if (k % trace_every == 0 || k == nsteps) {
            std::vector<double> est(dim);
            for (int i = 0; i < dim; ++i) est[i] = sums[i] / (k * step);
            spec.trace.emplace_back(k * step, est);
        }
    }

    int half = nsteps / 2, q3 = (3 * nsteps) / 4;
    std::vector<std::pair<double, double>> lam(dim);  // (estimate, slope)
    for (int i = 0; i < dim; ++i) {
        double windowed = (sums[i] - sums_half[i]) / ((nsteps - half) * step);
        double full = sums[i] / (nsteps * step);
        double last_quarter = (sums[i] - sums_3q[i]) / ((nsteps - q3) * step);
        lam[i] = {windowed, std::abs(last_quarter - full)};
    }
    std::sort(lam.begin(), lam.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double max_slope = 0;
    for (auto& [e, s] : lam) {
        spec.exponents.push_back(e);
        spec.slopes.push_back(s);
        max_slope = std::max(max_slope, s);
    }
    spec.zero_tol = std::max(1e-2, 5 * max_slope);
    return spec;
}

/// || lambda_i + lambda_{2n+1-i} || worst case, the symplectic pairing defect.
inline double pairing_defect(const LyapunovSpectrum& spec) {
    double worst = 0;
    size_t d = spec.exponents.size();
    for (size_t i = 0; i < d; ++i)
        worst = std::max(worst, std::abs(spec.exponents[i] + spec.exponents[d - 1 - i]));
    return worst;
}

struct SpectrumCounts {
    int zero = 0, pos = 0, neg = 0;
    bool indeterminate = false;  // some exponent within a factor 2 of zero_tol
};

inline SpectrumCounts classify_spectrum(const LyapunovSpectrum& spec) {
    if (pairing_defect(spec) > 2 * spec.zero_tol)
        throw ModelDomainError("spectrum pairing invariant violated; cannot classify");
    SpectrumCounts c;
    for (double l : spec.exponents) {
        double a = std::abs(l);
        if (a <= spec.zero_tol)
            ++c.zero;
        else if (l > 0)
            ++c.pos;
        else
            ++c.neg;
        if (a > spec.zero_tol / 2 && a < 2 * spec.zero_tol) c.indeterminate = true;
    }
    return c;
}

struct TheoremTwoReport {
    int p_from_green = 0;
    SpectrumCounts counts;
    std::string verdict;  // CONSISTENT / CONSISTENT-WITH-CAVEAT / INCONSISTENT / INDETERMINATE
    bool critical_point_caveat = false;
    LyapunovSpectrum spectrum;
    GreenPair pair;
};

/// Cross-check dim(G- ^ G+) against the zero/positive/negative exponent
/// counts: consistent iff zero = 2p and pos = neg = n - p.
inline TheoremTwoReport verify_theorem_two(const TonelliModel& m, const PhasePoint& x, double T,
                                           const FlowConfig& fcfg = {},
                                           const GreenConfig& gcfg = {}, double lyap_step = 0.5) {
    TheoremTwoReport rep;
    rep.pair = green_bundles(m, x, gcfg.T_max, gcfg.tol, fcfg, gcfg);
    rep.p_from_green = rep.pair.p_dim;
    rep.spectrum = lyapunov_spectrum(m, x, T, lyap_step, fcfg);
    rep.counts = classify_spectrum(rep.spectrum);

    TangentVector xh = flow_vector(m, x);
    rep.critical_point_caveat = xh.flat().norm() < 1e-8;

    int n = m.n, p = rep.p_from_green;
    if (rep.counts.zero < 2 * p) {
        // dim E^c >= 2 dim(G- ^ G+) must hold before the full equality verdict
        rep.verdict = "INCONSISTENT";
        return rep;
    }
    bool equal = rep.counts.zero == 2 * p && rep.counts.pos == n - p && rep.counts.neg == n - p;
    if (!equal && rep.counts.indeterminate)
        rep.verdict = "INDETERMINATE";
    else if (!equal)
        rep.verdict = "INCONSISTENT";
    else
        rep.verdict = rep.critical_point_caveat ? "CONSISTENT-WITH-CAVEAT" : "CONSISTENT";
    return rep;
}

}  // namespace greenkam

#endif
