#ifndef GREENKAM_REGULARITY_HPP
#define GREENKAM_REGULARITY_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "greenkam/common.hpp"
#include "greenkam/green.hpp"
#include "greenkam/lyapunov.hpp"
#include "greenkam/model.hpp"

namespace greenkam {

struct ConeEstimate {
    PhasePoint base;
    std::vector<TangentVector> directions;  // unit vectors, one-sided
    std::vector<double> scales;             // smallest shell radius supporting each
    std::vector<double> radii;
    std::string status;  // "OK" or "INSUFFICIENT-SAMPLES"
};

namespace detail {

inline double direction_angle(const Vec& a, const Vec& b) {
    return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
}

struct DirCluster {
    Vec mean;  // unit
    int count = 0;
};

inline std::vector<DirCluster> cluster_directions(const std::vector<Vec>& dirs,
                                                  double angular_tol) {
    std::vector<DirCluster> clusters;
    for (const Vec& d : dirs) {
        DirCluster* best = nullptr;
        double best_angle = angular_tol;
        for (auto& c : clusters) {
            double a = direction_angle(d, c.mean);
            if (a <= best_angle) {
                best_angle = a;
                best = &c;
            }
        }
        if (best) {
            best->mean = (best->mean * best->count + d).normalized();
            best->count += 1;
        } else {
            clusters.push_back(DirCluster{d, 1});
        }
    }
    return clusters;
}

}  // namespace detail

/// Contingent-cone estimate by shell clustering: secant directions from the
/// base are clustered per radius shell, and clusters that persist across
/// shrinking shells with bounded drift become cone directions.
inline ConeEstimate contingent_cone(const std::vector<PhasePoint>& samples,
                                    const PhasePoint& base, std::vector<double> radii,
                                    double drift_tol = 0.03, double angular_tol = 0.05,
                                    int min_shells = 3) {
    std::sort(radii.begin(), radii.end(), std::greater<double>());
    if (radii.size() < static_cast<size_t>(min_shells) || radii.front() <= 0 ||
        radii.back() <= 0)
        throw ModelDomainError("contingent_cone: need a decreasing positive radius schedule");
    if (radii.front() / radii.back() < 100 - 1e-9)
        throw ModelDomainError("contingent_cone: radius schedule must span two decades");

    ConeEstimate cone{base, {}, {}, radii, "INSUFFICIENT-SAMPLES"};

    // secant directions per shell (ball of each radius)
    std::vector<std::vector<Vec>> shell_dirs(radii.size());
    for (const auto& a : samples) {
        Vec d(2 * base.q.size());
        d << torus_diff(a.q, base.q), a.p - base.p;
        double r = d.norm();
        if (r < 1e-14) continue;
        for (size_t s = 0; s < radii.size(); ++s)
            if (r <= radii[s]) shell_dirs[s].push_back(d / r);
    }

    std::vector<std::vector<detail::DirCluster>> shells;
    for (auto& dirs : shell_dirs)
        shells.push_back(detail::cluster_directions(dirs, angular_tol));

    // chains of matching clusters across consecutive shells
    std::vector<std::vector<bool>> used(shells.size());
    for (size_t s = 0; s < shells.size(); ++s) used[s].assign(shells[s].size(), false);
    for (size_t s0 = 0; s0 + min_shells <= shells.size(); ++s0) {
        for (size_t c0 = 0; c0 < shells[s0].size(); ++c0) {
            if (used[s0][c0]) continue;
            Vec cur = shells[s0][c0].mean;
            int length = 1;
            size_t last_shell = s0;
            std::vector<std::pair<size_t, size_t>> chain{{s0, c0}};
            for (size_t s = s0 + 1; s < shells.size(); ++s) {
                int match = -1;
                double best = drift_tol;
                for (size_t c = 0; c < shells[s].size(); ++c) {
                    double a = detail::direction_angle(cur, shells[s][c].mean);
                    if (a <= best) {
                        best = a;
                        match = static_cast<int>(c);
                    }
                }
                if (match < 0) break;
                cur = shells[s][match].mean;
                chain.emplace_back(s, match);
                ++length;
                last_shell = s;
            }
            if (length < min_shells) continue;
            for (auto [s, c] : chain) used[s][c] = true;
            bool duplicate = false;
            for (const auto& d : cone.directions)
                if (detail::direction_angle(cur, d.flat()) <= angular_tol) duplicate = true;
            if (duplicate) continue;
            cone.directions.push_back(TangentVector::from_flat(cur));
            cone.scales.push_back(radii[last_shell]);
        }
    }
    if (!cone.directions.empty()) cone.status = "OK";
    return cone;
}

enum class PairSide { Minus, Plus };

struct DirectionSlack {
    TangentVector dir;
    double lhs = 0;       // || Y - tilted S X ||
    double rhs = 0;       // 2 sqrt(||Delta s||) sqrt(Delta s(X,X))
    double rhs_proj = 0;  // 2 Lambda ||p_Delta X||, the weaker projected bound
    double slack = 0;     // rhs - lhs
};

struct RegularityReport {
    std::vector<DirectionSlack> directions;
    Mat delta;
    double lambda = 0;
    double min_slack = 0;
    double sampling_error = 0;
    std::string verdict;  // C1-REGULAR-CONSISTENT / INEQUALITY-VIOLATION / INSUFFICIENT-SAMPLES
};

/// Tilted-bundle inequality on the estimated cone directions: for each unit
/// (X, Y), compares ||Y - tilde s X|| against the Delta s bound; a violation
/// is only reported beyond five times the sampling error.
inline RegularityReport theorem_three_check(const TonelliModel& m, const PhasePoint& base,
                                            const ConeEstimate& cone, PairSide side,
                                            double sampling_error = 1e-3,
                                            const FlowConfig& fcfg = {},
                                            const GreenConfig& gcfg = {}) {
    RegularityReport rep;
    rep.sampling_error = sampling_error;
    if (cone.directions.empty()) {
        rep.verdict = "INSUFFICIENT-SAMPLES";
        return rep;
    }
    GreenPair pair = green_bundles(m, base, gcfg.T_max, gcfg.tol, fcfg, gcfg);
    rep.delta = pair.delta;
    rep.lambda = pair.lambda;
    const Mat& tilted = side == PairSide::Minus ? pair.tilde_minus : pair.tilde_plus;

    rep.min_slack = std::numeric_limits<double>::infinity();
    for (const auto& v : cone.directions) {
        DirectionSlack ds;
        ds.dir = v;
        ds.lhs = (v.Y - tilted * v.X).norm();
        double quad = std::max(0.0, v.X.dot(pair.delta * v.X));
        ds.rhs = 2 * std::sqrt(pair.lambda) * std::sqrt(quad);
        ds.rhs_proj = 2 * pair.lambda * (pair.p_delta * v.X).norm();
        ds.slack = ds.rhs - ds.lhs;
        rep.min_slack = std::min(rep.min_slack, ds.slack);
        rep.directions.push_back(ds);
    }
    rep.verdict = rep.min_slack < -5 * sampling_error ? "INEQUALITY-VIOLATION"
                                                      : "C1-REGULAR-CONSISTENT";
    return rep;
}

struct C1BaseResult {
    PhasePoint base;
    bool applicable = false;  // all exponents numerically zero
    bool pass = false;
    double worst_angle = 0;
    int directions = 0;
    std::string verdict;  // PASS / FAIL / NOT-APPLICABLE / INSUFFICIENT-SAMPLES
};

struct C1Report {
    std::vector<C1BaseResult> bases;
    int applicable = 0;
    int passed = 0;
    double pass_fraction = 0;  // over applicable bases
};

/// At each base with an all-zero Lyapunov spectrum, checks that every
/// contingent-cone direction of the sampled support lies within angle_tol of
/// the common Green graph (the degenerate Delta s = 0 form of the cone
/// inequality). Nonzero exponents gate the base out as NOT-APPLICABLE.
inline C1Report c1_diagnostic(const TonelliModel& m,
                              const std::vector<PhasePoint>& support_samples,
                              const std::vector<PhasePoint>& bases,
                              std::vector<double> radii = {0.1, 0.032, 0.01, 0.0032, 0.001},
                              double angle_tol = 0.05, double lyap_T = 100,
                              const FlowConfig& fcfg = {}, const GreenConfig& gcfg = {}) {
    C1Report rep;
    int n = m.n;
    for (const auto& base : bases) {
        C1BaseResult res;
        res.base = base;
        auto spec = lyapunov_spectrum(m, base, lyap_T, 0.5, fcfg);
        bool zero = true;
        for (double l : spec.exponents) zero = zero && std::abs(l) <= spec.zero_tol;
        res.applicable = zero;
        if (!zero) {
            res.verdict = "NOT-APPLICABLE";
            rep.bases.push_back(res);
            continue;
        }
        ++rep.applicable;
        auto cone = contingent_cone(support_samples, base, radii);
        if (cone.status != "OK") {
            res.verdict = "INSUFFICIENT-SAMPLES";
            rep.bases.push_back(res);
            continue;
        }
        GreenPair pair = green_bundles(m, base, gcfg.T_max, gcfg.tol, fcfg, gcfg);
        // orthogonal projector onto the graph of s_minus
        Mat basis(2 * n, n);
        basis.topRows(n) = Mat::Identity(n, n);
        basis.bottomRows(n) = pair.s_minus.S;
        Mat proj = basis * (basis.transpose() * basis).ldlt().solve(basis.transpose());
        res.directions = static_cast<int>(cone.directions.size());
        for (const auto& v : cone.directions) {
            Vec w = v.flat();
            double a = std::asin(std::clamp((w - proj * w).norm(), 0.0, 1.0));
            res.worst_angle = std::max(res.worst_angle, a);
        }
        res.pass = res.worst_angle <= angle_tol;
        res.verdict = res.pass ? "PASS" : "FAIL";
        rep.passed += res.pass;
        rep.bases.push_back(res);
    }
    rep.pass_fraction = rep.applicable > 0
                            ? static_cast<double>(rep.passed) / rep.applicable
                            : 0.0;
    return rep;
}

}  // namespace greenkam

#endif
