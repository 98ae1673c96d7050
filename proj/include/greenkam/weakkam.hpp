#ifndef GREENKAM_WEAKKAM_HPP
#define GREENKAM_WEAKKAM_HPP

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "greenkam/action.hpp"
#include "greenkam/common.hpp"
#include "greenkam/flow.hpp"
#include "greenkam/green.hpp"
#include "greenkam/grid.hpp"
#include "greenkam/model.hpp"

namespace greenkam {

enum class Sign { Negative, Positive };

namespace detail {

inline int num_threads() {
    if (const char* env = std::getenv("GREENKAM_THREADS")) {
        int k = std::atoi(env);
        if (k > 0) return k;
    }
    return 1;
}

template <typename F>
inline void parallel_for(size_t count, F body) {
    int nt = num_threads();
    if (nt <= 1 || count < 64) {
        body(size_t{0}, count);
        return;
    }
    std::vector<std::thread> pool;
    size_t chunk = (count + nt - 1) / nt;
    for (int k = 0; k < nt; ++k) {
        size_t a = k * chunk, b = std::min(count, a + chunk);
        if (a >= b) break;
        pool.emplace_back([&, a, b] { body(a, b); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

struct LaxConfig {
    int sub_steps = 8;
    double window_radius = 0;  // 0 = automatic (full circle for n=1, 0.4 for n=2)
    bool refine = true;        // sub-grid quadratic refinement around the argmin
    ActionConfig action;
};

/// Discrete Lax-Oleinik operators on a uniform torus grid. Construction
/// precomputes the table of pairwise arc actions inside the search window;
/// both semigroup directions are then grid sweeps over that table.
class LaxOleinikOperator {
  public:
    LaxOleinikOperator(const TonelliModel& model, double tau, int grid_m, LaxConfig cfg = {})
        : model_(model), tau_(tau), m_(grid_m), n_(model.n), cfg_(cfg) {
        if (tau < 0.05 - 1e-12 || tau > 0.5 + 1e-12)
            throw ModelDomainError("lax_oleinik: tau outside [0.05, 0.5]");
        if (cfg_.sub_steps < std::max(4.0, std::ceil(tau / 0.1)))
            throw ModelDomainError("lax_oleinik: sub_steps too small for this tau");
        if ((n_ == 1 && m_ < 128) || (n_ == 2 && m_ < 64))
            throw ModelDomainError("lax_oleinik: grid too coarse for this dimension");
        radius_ = cfg_.window_radius > 0 ? cfg_.window_radius : (n_ == 1 ? 0.5 : 0.4);
        build_offsets();
        build_table();
    }

    double tau() const { return tau_; }
    int grid() const { return m_; }
    const TonelliModel& model() const { return model_; }

    /// Negative: (T u)(q) = min_{q'} u(q') + A(q', q).
    /// Positive: (T^ u)(q) = max_{q'} u(q') - A(q, q').
    GridFunction apply(const GridFunction& u, Sign sign) const {
        if (u.n != n_ || u.m != m_)
            throw ModelDomainError("lax_oleinik: grid shape mismatch");
        GridFunction out(n_, m_, u.interp);
        size_t nodes = u.size();
        size_t no = offsets_.size();
        bool neg = sign == Sign::Negative;
        detail::parallel_for(nodes, [&](size_t a, size_t b) {
            std::vector<double> f(no);
            for (size_t j = a; j < b; ++j) {
                int ji = n_ == 1 ? static_cast<int>(j) : static_cast<int>(j / m_);
                int jj = n_ == 1 ? 0 : static_cast<int>(j % m_);
                double best = 0;
                size_t best_oi = 0;
                for (size_t oi = 0; oi < no; ++oi) {
                    size_t src = u.index(ji + offsets_[oi][0], jj + offsets_[oi][1]);
                    double val;
                    if (neg)
                        val = u.values[src] + table_[j * no + oi];
                    else
                        val = u.values[src] - table_[src * no + neg_index_[oi]];
                    f[oi] = val;
                    if (oi == 0 || (neg ? val < best : val > best)) {
                        best = val;
                        best_oi = oi;
                    }
                }
                if (cfg_.refine) best = refine(f, best_oi, best, neg);
                out.values[j] = best;
            }
        });
        return out;
    }

  private:
    void build_offsets() {
        double d = 1.0 / m_;
        int r0 = static_cast<int>(std::floor(radius_ * m_ + 1e-9));
        for (int o1 = -r0; o1 <= r0; ++o1) {
            if (n_ == 1) {
                offsets_.push_back({o1, 0});
            } else {
                for (int o2 = -r0; o2 <= r0; ++o2) {
                    if (d * std::hypot(o1, o2) <= radius_ + 1e-9) offsets_.push_back({o1, o2});
                }
            }
        }
        box_r_ = r0;
        int side = 2 * r0 + 1;
        offset_slot_.assign(static_cast<size_t>(side) * side, -1);
        for (size_t oi = 0; oi < offsets_.size(); ++oi) {
            auto [o1, o2] = std::pair{offsets_[oi][0], offsets_[oi][1]};
            offset_slot_[static_cast<size_t>(o1 + r0) * side + (o2 + r0)] =
                static_cast<int>(oi);
        }
        neg_index_.resize(offsets_.size());
        for (size_t oi = 0; oi < offsets_.size(); ++oi) {
            int s = slot(-offsets_[oi][0], -offsets_[oi][1]);
            // the list is symmetric under negation except the half-circle seam
            // offset for n=1, which is the same grid node either way
            neg_index_[oi] = s >= 0 ? static_cast<size_t>(s) : oi;
        }
    }

    int slot(int o1, int o2) const {
        if (std::abs(o1) > box_r_ || std::abs(o2) > box_r_) return -1;
        int side = 2 * box_r_ + 1;
        return offset_slot_[static_cast<size_t>(o1 + box_r_) * side + (o2 + box_r_)];
    }

    void build_table() {
        size_t nodes = static_cast<size_t>(std::pow(m_, n_));
        size_t no = offsets_.size();
        table_.assign(nodes * no, 0.0);
        double d = 1.0 / m_;
        GridFunction shape(n_, m_);
        detail::parallel_for(nodes, [&](size_t a, size_t b) {
            for (size_t j = a; j < b; ++j) {
                Vec target = shape.node(j);
                for (size_t oi = 0; oi < no; ++oi) {
                    // arc from the lifted source node to the target node
                    Vec z0(n_);
                    z0[0] = target[0] + d * offsets_[oi][0];
                    if (n_ == 2) z0[1] = target[1] + d * offsets_[oi][1];
                    auto arc = detail::solve_arc_lifted(model_, z0, target, tau_,
                                                        cfg_.sub_steps, cfg_.action);
                    if (!arc.certified)
                        throw ConvergenceError(model_.name +
                                               ": uncertified arc while building the "
                                               "action table");
                    table_[j * no + oi] = arc.value;
                }
            }
        });
    }

    // One quadratic fit per axis around the winning offset; exact sub-grid
    // correction for locally parabolic objectives, skipped at window edges.
    double refine(const std::vector<double>& f, size_t best_oi, double best, bool neg) const {
        double out = best;
        for (int axis = 0; axis < n_; ++axis) {
            int o1 = offsets_[best_oi][0], o2 = offsets_[best_oi][1];
            int sm = slot(o1 - (axis == 0), o2 - (axis == 1));
            int sp = slot(o1 + (axis == 0), o2 + (axis == 1));
            if (sm < 0 || sp < 0) continue;
            double fm = f[sm], fp = f[sp];
            double curv = fp + fm - 2 * best;
            if (neg ? curv <= 1e-300 : curv >= -1e-300) continue;
            double shift = (fm - fp) / (2 * curv);
            if (std::abs(shift) > 1.0) continue;
            out += (neg ? -1 : 1) * std::abs((fp - fm) * (fp - fm) / (8 * curv));
        }
        return out;
    }

    TonelliModel model_;
    double tau_, radius_;
    int m_, n_, box_r_ = 0;
    LaxConfig cfg_;
    std::vector<std::array<int, 2>> offsets_;
    std::vector<size_t> neg_index_;
    std::vector<int> offset_slot_;
    std::vector<double> table_;
};

namespace detail {

inline std::shared_ptr<const LaxOleinikOperator> cached_operator(const TonelliModel& m,
                                                                 double tau, int grid_m,
                                                                 const LaxConfig& cfg) {
    static std::map<std::string, std::shared_ptr<const LaxOleinikOperator>> cache;
    static std::mutex mtx;
    std::ostringstream key;
    key.precision(17);
    key << m.name;
    for (auto& [k, v] : m.parameters) key << ';' << k << '=' << v;
    key << '|' << tau << '|' << grid_m << '|' << cfg.sub_steps << '|' << cfg.window_radius
        << '|' << cfg.refine;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(key.str());
    if (it != cache.end()) return it->second;
    auto op = std::make_shared<const LaxOleinikOperator>(m, tau, grid_m, cfg);
    cache.emplace(key.str(), op);
    return op;
}

}  // namespace detail

inline GridFunction lax_oleinik(const TonelliModel& m, const GridFunction& u, double tau,
                                Sign sign, const LaxConfig& cfg = {}) {
    return detail::cached_operator(m, tau, u.m, cfg)->apply(u, sign);
}

// ---- weak KAM fixed points ---------------------------------------------

struct WeakKamSolution {
    GridFunction u;
    double c = 0;         // critical value estimate
    double residual = 0;  // sup-norm fixed-point defect at the returned (u, c)
    int iterations = 0;
    std::vector<double> history;  // sup-norm change per sweep
};

/// Value iteration u <- T u + c_k tau (negative) or u <- T^ u - c_k tau
/// (positive), with the critical value read off the mean defect and the
/// iterate pinned at min u = 0.
inline WeakKamSolution solve_weak_kam(const TonelliModel& m, Sign sign, int grid_m, double tau,
                                      double tol = 1e-6, int max_iter = 500,
                                      const LaxConfig& cfg = {}) {
    auto op = detail::cached_operator(m, tau, grid_m, cfg);
    WeakKamSolution sol;
    sol.u = GridFunction(m.n, grid_m);
    double dir = sign == Sign::Negative ? 1.0 : -1.0;
    for (int it = 1; it <= max_iter; ++it) {
        GridFunction tu = op->apply(sol.u, sign);
        double mean = 0;
        for (size_t i = 0; i < tu.size(); ++i) mean += tu.values[i] - sol.u.values[i];
        mean /= static_cast<double>(tu.size());
        sol.c = -dir * mean / tau;
        double shift = dir * sol.c * tau;
        for (double& v : tu.values) v += shift;
        double lo = tu.min_value();
        for (double& v : tu.values) v -= lo;
        double change = 0;
        for (size_t i = 0; i < tu.size(); ++i)
            change = std::max(change, std::abs(tu.values[i] - sol.u.values[i]));
        sol.u = std::move(tu);
        sol.history.push_back(change);
        sol.iterations = it;
        if (change <= tol) break;
        if (it == max_iter) {
            std::ostringstream os;
            os << m.name << ": weak KAM iteration did not reach " << tol << " in " << max_iter
               << " sweeps (last change " << change << ")";
            throw ConvergenceError(os.str());
        }
    }
    GridFunction check = op->apply(sol.u, sign);
    sol.residual = 0;
    for (size_t i = 0; i < check.size(); ++i)
        sol.residual = std::max(
            sol.residual, std::abs(check.values[i] + dir * sol.c * tau - sol.u.values[i]));
    return sol;
}

struct WeakKamPair {
    GridFunction u_minus, u_plus;
    double c = 0;
    double residual_minus = 0, residual_plus = 0;
    double eq_tol = 0;
    std::vector<bool> equality_set;  // nodes where u_minus - u_plus <= eq_tol
};

/// Conjugate solution: iterate u <- T^ u - c tau from u_minus, re-anchoring
/// each sweep so that max(u_plus - u_minus) = 0; the two then touch exactly
/// on the discrete equality set.
inline WeakKamPair conjugate_pair(const TonelliModel& m, const WeakKamSolution& minus,
                                  double tau, double tol = 1e-6, int max_iter = 500,
                                  const LaxConfig& cfg = {}, double eq_tol = 0) {
    auto op = detail::cached_operator(m, tau, minus.u.m, cfg);
    WeakKamPair pair;
    pair.c = minus.c;
    pair.u_minus = minus.u;
    pair.residual_minus = minus.residual;
    pair.eq_tol = eq_tol > 0 ? eq_tol : 5 * tol;

    GridFunction u = minus.u;
    for (int it = 1; it <= max_iter; ++it) {
        GridFunction v = op->apply(u, Sign::Positive);
        double anchor = -std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < v.size(); ++i) {
            v.values[i] -= pair.c * tau;
            anchor = std::max(anchor, v.values[i] - pair.u_minus.values[i]);
        }
        for (double& x : v.values) x -= anchor;
        double change = 0;
        for (size_t i = 0; i < v.size(); ++i)
            change = std::max(change, std::abs(v.values[i] - u.values[i]));
        u = std::move(v);
        if (change <= tol) break;
        if (it == max_iter)
            throw ConvergenceError(m.name + ": conjugate iteration did not converge");
    }
    pair.u_plus = std::move(u);

    GridFunction check = op->apply(pair.u_plus, Sign::Positive);
    for (size_t i = 0; i < check.size(); ++i)
        pair.residual_plus =
            std::max(pair.residual_plus,
                     std::abs(check.values[i] - pair.c * tau - pair.u_plus.values[i]));

    pair.equality_set.resize(pair.u_minus.size());
    size_t hits = 0;
    for (size_t i = 0; i < pair.u_minus.size(); ++i) {
        double gap = pair.u_minus.values[i] - pair.u_plus.values[i];
        if (gap < -pair.eq_tol)
            throw ModelDomainError(m.name + ": conjugate solution exceeds u_minus");
        pair.equality_set[i] = gap <= pair.eq_tol;
        hits += pair.equality_set[i];
    }
    if (hits == 0)
        throw ConvergenceError(m.name +
                               ": empty equality set (critical value or grid too coarse)");
    return pair;
}

// ---- differentiability structure ---------------------------------------

struct PseudographSample {
    Vec q, du;
    bool differentiable = true;
};

/// Samples (q, du(q)) at every node with a kink mask from the jump of the
/// one-sided derivatives, thresholded against the typical smooth-node jump.
inline std::vector<PseudographSample> pseudograph(const GridFunction& u) {
    double d = u.spacing();
    size_t nodes = u.size();
    std::vector<double> jumps;
    jumps.reserve(nodes * u.n);
    auto axis_jump = [&](size_t flat, int axis) {
        int i = u.n == 1 ? static_cast<int>(flat) : static_cast<int>(flat / u.m);
        int j = u.n == 1 ? 0 : static_cast<int>(flat % u.m);
        int di = axis == 0, dj = axis == 1;
        return std::abs(u.at(i + di, j + dj) - 2 * u.at(i, j) + u.at(i - di, j - dj)) / d;
    };
    for (size_t f = 0; f < nodes; ++f)
        for (int a = 0; a < u.n; ++a) jumps.push_back(axis_jump(f, a));
    std::vector<double> sorted = jumps;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    double kink_tol = std::max(10 * sorted[sorted.size() / 2], 1e-9);

    std::vector<PseudographSample> out(nodes);
    for (size_t f = 0; f < nodes; ++f) {
        out[f].q = u.node(f);
        out[f].du = u.gradient_at_node(f);
        bool smooth = true;
        for (int a = 0; a < u.n; ++a) smooth = smooth && jumps[f * u.n + a] <= kink_tol;
        out[f].differentiable = smooth;
    }
    return out;
}

/// Smallest K with u(x+h) - 2u(x) + u(x-h) <= 2 K |h|^2 over all nodes and
/// grid displacements h of norm up to 0.1.
inline double semiconcavity_constant(const GridFunction& u) {
    double d = u.spacing();
    int r = std::max(1, static_cast<int>(std::floor(0.1 * u.m + 1e-9)));
    double k = 0;
    if (u.n == 1) {
        for (int i = 0; i < u.m; ++i)
            for (int h = 1; h <= r; ++h) {
                double second = u.at(i + h) - 2 * u.at(i) + u.at(i - h);
                k = std::max(k, second / (2 * h * h * d * d));
            }
        return k;
    }
    for (int i = 0; i < u.m; ++i)
        for (int j = 0; j < u.m; ++j)
            for (int h1 = -r; h1 <= r; ++h1)
                for (int h2 = 0; h2 <= r; ++h2) {
                    if (h2 == 0 && h1 <= 0) continue;
                    double hn2 = (h1 * h1 + h2 * h2) * d * d;
                    if (hn2 > 0.01 + 1e-12) continue;
                    double second =
                        u.at(i + h1, j + h2) - 2 * u.at(i, j) + u.at(i - h1, j - h2);
                    k = std::max(k, second / (2 * hn2));
                }
    return k;
}

/// Worst |H(q, du(q)) - c| over the differentiable nodes of u.
inline double hamilton_jacobi_residual(const TonelliModel& m, const GridFunction& u, double c) {
    double worst = 0;
    for (const auto& s : pseudograph(u))
        if (s.differentiable) worst = std::max(worst, std::abs(m.H(s.q, s.du) - c));
    return worst;
}

struct MatherApprox {
    std::vector<PhasePoint> points;  // equality-set nodes lifted by du_minus
    double worst_du_mismatch = 0;    // ||du_minus - du_plus|| over those nodes
    bool derivative_warning = false;
};

/// Equality-set nodes lifted to T*T^n by the (shared) derivative of the pair.
inline MatherApprox mather_set_approx(const WeakKamPair& pair) {
    MatherApprox out;
    for (size_t f = 0; f < pair.u_minus.size(); ++f) {
        if (!pair.equality_set[f]) continue;
        Vec dm = pair.u_minus.gradient_at_node(f);
        Vec dp = pair.u_plus.gradient_at_node(f);
        out.worst_du_mismatch = std::max(out.worst_du_mismatch, (dm - dp).norm());
        out.points.emplace_back(pair.u_minus.node(f), dm);
    }
    // on the eq_tol-fattened set the pair's gradients may differ by up to
    // sqrt(8 K eq_tol) (touching semiconcave/semiconvex pair), not by eq_tol
    double k = semiconcavity_constant(pair.u_minus);
    out.derivative_warning =
        out.worst_du_mismatch > 2 * std::sqrt(8 * std::max(k, 0.0) * pair.eq_tol) +
                                    10 * pair.eq_tol;
    return out;
}

// ---- barrier functions --------------------------------------------------

struct BarrierFunction {
    Vec center;      // patch center (configuration of the anchoring phase point)
    Vec far_end;     // projected orbit endpoint the arcs connect to
    double t = 0;
    int sign = +1;   // +1: A_t(far_end, q); -1: -A_t(q, far_end)
    double patch_radius = 0;
    int half = 0;    // patch nodes per side of the center
    double spacing = 0;
    std::vector<Vec> points;      // lifted patch coordinates, row-major
    std::vector<double> values;
    std::vector<Vec> derivs;      // first derivative at each patch point
    Mat d2_center;                // from differencing the arc boundary momenta
    Mat pushed_graph;             // graph matrix of the time-t pushed vertical
    double d2_defect = 0;
    bool shrunk = false;
};

namespace detail {

// Action value and end derivative with one Richardson step in the segment
// count (the broken-path error is O(h^2) with a smooth leading term).
struct BarrierEval {
    double value;
    Vec deriv;
};

inline BarrierEval barrier_eval(const TonelliModel& m, const Vec& far_end, const Vec& q,
                                double t, int sign, int sub_steps, bool& certified) {
    auto eval = [&](int n) {
        MinimizingArc arc = sign > 0 ? action(m, far_end, q, t, n) : action(m, q, far_end, t, n);
        certified = certified && arc.certified;
        return arc;
    };
    MinimizingArc a1 = eval(sub_steps), a2 = eval(2 * sub_steps);
    BarrierEval out;
    out.value = (4 * a2.value - a1.value) / 3;
    Vec d1 = sign > 0 ? a1.p_end : a1.p_start;
    Vec d2 = sign > 0 ? a2.p_end : a2.p_start;
    out.deriv = (4 * d2 - d1) / 3;
    if (sign < 0) out.value = -out.value;
    // d(-A)/d(start) = +p_start, so the sign flip cancels for the derivative
    return out;
}

}  // namespace detail

/// a_t^+(q) = A_t(pi phi_{-t}(x0), q) (sign +) or a_t^-(q) = -A_t(q, pi
/// phi_t(x0)) (sign -) on a small patch around pi(x0), with derivatives from
/// the arc boundary momenta and the second derivative cross-checked against
/// the pushed vertical at the lifted center.
inline BarrierFunction barrier(const TonelliModel& m, const PhasePoint& x0, double t, int sign,
                               double patch_radius = 0.05, const FlowConfig& fcfg = {},
                               const GreenConfig& gcfg = {}, int half = 4, int sub_steps = 0) {
    if (t <= 0) throw ModelDomainError("barrier requires t > 0");
    if (sub_steps <= 0) sub_steps = std::max(4, static_cast<int>(std::ceil(t / 0.05)));
    int n = m.n;

    PhasePoint far = integrate(m, x0, sign > 0 ? -t : t, fcfg);

    for (int attempt = 0;; ++attempt) {
        BarrierFunction bf;
        bf.center = x0.q;
        bf.far_end = far.q;
        bf.t = t;
        bf.sign = sign;
        bf.patch_radius = patch_radius;
        bf.half = half;
        bf.spacing = patch_radius / half;
        bf.shrunk = attempt > 0;

        bool certified = true;
        int side = 2 * half + 1;
        int count = n == 1 ? side : side * side;
        for (int idx = 0; idx < count; ++idx) {
            Vec q = x0.q;
            q[0] += bf.spacing * ((n == 1 ? idx : idx / side) - half);
            if (n == 2) q[1] += bf.spacing * (idx % side - half);
            auto ev = detail::barrier_eval(m, far.q, q, t, sign, sub_steps, certified);
            bf.points.push_back(q);
            bf.values.push_back(ev.value);
            bf.derivs.push_back(ev.deriv);
        }
        if (!certified) {
            if (attempt >= 1)
                throw ConvergenceError(m.name + ": barrier arcs not certified on the patch");
            patch_radius /= 2;
            continue;
        }

        // second derivative at the center by differencing the momenta
        double hc = std::min(bf.spacing, 2e-3);
        bf.d2_center = Mat::Zero(n, n);
        Vec center_deriv = bf.derivs[n == 1 ? half : half * side + half];
        for (int a = 0; a < n; ++a) {
            Vec qp = x0.q, qm = x0.q;
            qp[a] += hc;
            qm[a] -= hc;
            bool cert2 = true;
            auto ep = detail::barrier_eval(m, far.q, qp, t, sign, sub_steps, cert2);
            auto em = detail::barrier_eval(m, far.q, qm, t, sign, sub_steps, cert2);
            if (!cert2)
                throw ConvergenceError(m.name + ": barrier stencil arcs not certified");
            bf.d2_center.col(a) = (ep.deriv - em.deriv) / (2 * hc);
        }
        bf.d2_center = symmetrize(bf.d2_center);

        PhasePoint lifted(x0.q, center_deriv);
        bf.pushed_graph = pushed_vertical(m, lifted, sign > 0 ? t : -t, fcfg, gcfg).S;
        bf.d2_defect = (bf.d2_center - bf.pushed_graph).norm();
        return bf;
    }
}

struct BarrierComparisonReport {
    bool pass = true;
    double min_slack_upper = 0;  // barrier above u_minus (after common affine part)
    double min_slack_lower = 0;  // u_plus above the lower barrier
    double tolerance = 0;
    BarrierFunction a_plus, a_minus;
};

/// At an equality-set point q0 with p0 = du_minus(q0): checks that, after
/// subtracting value and slope at q0, a_t^+ dominates u_minus and u_plus
/// dominates a_t^- on the patch.
inline BarrierComparisonReport barrier_comparison_check(const TonelliModel& m,
                                                        const WeakKamPair& pair, const Vec& q0,
                                                        double t, double patch_radius = 0.05,
                                                        const FlowConfig& fcfg = {},
                                                        const GreenConfig& gcfg = {}) {
    // snap to the nearest grid node and insist it lies in the equality set
    const GridFunction& um = pair.u_minus;
    size_t node = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (size_t f = 0; f < um.size(); ++f) {
        double d = torus_dist(um.node(f), q0);
        if (d < bestd) {
            bestd = d;
            node = f;
        }
    }
    if (!pair.equality_set[node])
        throw ModelDomainError("barrier comparison: base point not in the equality set");
    Vec qn = um.node(node);
    Vec pm = um.gradient_at_node(node);
    Vec pp = pair.u_plus.gradient_at_node(node);

    BarrierComparisonReport rep;
    rep.a_plus = barrier(m, PhasePoint(qn, pm), t, +1, patch_radius, fcfg, gcfg);
    rep.a_minus = barrier(m, PhasePoint(qn, pp), t, -1, patch_radius, fcfg, gcfg);

    int center = rep.a_plus.half;
    int side = 2 * center + 1;
    int cidx = m.n == 1 ? center : center * side + center;
    double ksum = semiconcavity_constant(pair.u_minus) + semiconcavity_constant(pair.u_plus);
    double interp_err = um.spacing() * um.spacing() * ksum / 4;
    rep.tolerance = 5 * (interp_err + pair.residual_minus + pair.residual_plus) + 1e-12;

    auto centered = [&](const GridFunction& u, const Vec& q, const Vec& slope) {
        Vec dq = q - qn;  // patch coordinates are a lift around qn
        return u.value(wrap01(q)) - u.value(wrap01(qn)) - slope.dot(dq);
    };

    rep.min_slack_upper = rep.min_slack_lower = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < rep.a_plus.points.size(); ++i) {
        const Vec& q = rep.a_plus.points[i];
        Vec dq = q - qn;
        double bar_up = rep.a_plus.values[i] - rep.a_plus.values[cidx] -
                        rep.a_plus.derivs[cidx].dot(dq);
        double bar_dn = rep.a_minus.values[i] - rep.a_minus.values[cidx] -
                        rep.a_minus.derivs[cidx].dot(dq);
        rep.min_slack_upper =
            std::min(rep.min_slack_upper, bar_up - centered(pair.u_minus, q, pm));
        rep.min_slack_lower =
            std::min(rep.min_slack_lower, centered(pair.u_plus, q, pp) - bar_dn);
    }
    rep.pass = rep.min_slack_upper >= -rep.tolerance && rep.min_slack_lower >= -rep.tolerance;
    return rep;
}

struct LipschitzReport {
    double k_fit = 0;
    double bound = 0;  // 6 x semiconcavity constant
    bool pass = true;
};

/// Fits the smallest Lipschitz constant of du_minus from equality-set nodes
/// to nearby differentiable nodes and compares against six times the
/// semiconcavity constant.
inline LipschitzReport lipschitz_graph_check(const WeakKamPair& pair, double radius = 0.2) {
    auto samples = pseudograph(pair.u_minus);
    LipschitzReport rep;
    rep.bound = 6 * semiconcavity_constant(pair.u_minus);
    double min_sep = 0.5 * pair.u_minus.spacing();
    for (size_t y = 0; y < samples.size(); ++y) {
        if (!pair.equality_set[y]) continue;
        for (size_t x = 0; x < samples.size(); ++x) {
            if (!samples[x].differentiable) continue;
            double d = torus_dist(samples[y].q, samples[x].q);
            if (d < min_sep || d > radius) continue;
            rep.k_fit = std::max(rep.k_fit, (samples[y].du - samples[x].du).norm() / d);
        }
    }
    rep.pass = rep.k_fit <= rep.bound + std::max(1e-9, 0.05 * (rep.bound + 1));
    return rep;
}

}  // namespace greenkam

#endif
