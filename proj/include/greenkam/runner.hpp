#ifndef GREENKAM_RUNNER_HPP
#define GREENKAM_RUNNER_HPP

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "greenkam/flow.hpp"
#include "greenkam/green.hpp"
#include "greenkam/lyapunov.hpp"
#include "greenkam/model.hpp"
#include "greenkam/regularity.hpp"
#include "greenkam/scenario.hpp"
#include "greenkam/weakkam.hpp"

namespace greenkam {

struct Report {
    std::string text;  // deterministic body; the wall-time line is appended on write
    std::map<std::string, std::string> files;
    double wall_time_ms = 0;
    int exit_code = 0;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class ReportBuilder {
  public:
    void section(const std::string& name) { os_ << "[" << name << "]\n"; }
    void kv(const std::string& k, const std::string& v) { os_ << k << " = " << v << "\n"; }
    void kv(const std::string& k, double v) { kv(k, fmt(v)); }
    void kv(const std::string& k, int v) { kv(k, std::to_string(v)); }
    void kv(const std::string& k, const Vec& v) {
        std::string s;
        for (int i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
        kv(k, s);
    }
    void kv(const std::string& k, const Mat& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j)
                kv(k + "_" + std::to_string(i) + std::to_string(j), m(i, j));
    }
    void verdict(const std::string& k, const std::string& v) {
        kv(k, v);
        if (v.find("INCONSISTENT") != std::string::npos ||
            v.find("VIOLATION") != std::string::npos || v.find("FAIL") != std::string::npos)
            failed_ = true;
    }
    bool failed() const { return failed_; }
    std::string str() const { return os_.str(); }

  private:
    std::ostringstream os_;
    bool failed_ = false;
};

inline void echo_scenario(ReportBuilder& rb, const Scenario& sc) {
    rb.section("scenario");
    rb.kv("model", sc.model);
    for (auto& [k, v] : sc.params) rb.kv("param_" + k, v);
    rb.kv("task", sc.task);
    rb.kv("seed", std::to_string(sc.seed));
    rb.kv("flow_h", sc.flow_h);
    rb.kv("flow_method", sc.flow_method);
    rb.kv("flow_t", sc.flow_t);
    rb.kv("green_T_max", sc.green_T_max);
    rb.kv("green_tol", sc.green_tol);
    rb.kv("lyapunov_T", sc.lyap_T);
    rb.kv("lyapunov_step", sc.lyap_step);
    rb.kv("grid", sc.grid);
    rb.kv("tau", sc.tau);
    rb.kv("weakkam_tol", sc.wk_tol);
    rb.kv("sub_steps", sc.sub_steps);
    rb.kv("side", sc.side);
    rb.kv("c1_bases", sc.c1_bases);
    rb.kv("c1_samples", sc.c1_samples);
}

inline std::string csv_grid_function(const GridFunction& u) {
    auto samples = pseudograph(u);
    std::ostringstream os;
    if (u.n == 1)
        os << "q,u,du,mask\n";
    else
        os << "q1,q2,u,du1,du2,mask\n";
    for (size_t f = 0; f < u.size(); ++f) {
        const auto& s = samples[f];
        for (int i = 0; i < u.n; ++i) os << fmt(s.q[i]) << ',';
        os << fmt(u.values[f]) << ',';
        for (int i = 0; i < u.n; ++i) os << fmt(s.du[i]) << ',';
        os << (s.differentiable ? 1 : 0) << "\n";
    }
    return os.str();
}

struct RunContext {
    const Scenario& sc;
    TonelliModel model;
    FlowConfig fcfg;
    GreenConfig gcfg;
    LaxConfig lax;
    PhasePoint x0;

    explicit RunContext(const Scenario& sc_)
        : sc(sc_), model(make_model(sc_.model, sc_.params)), x0(Vec(), Vec()) {
        fcfg.h = sc.flow_h;
        fcfg.method = sc.flow_method == "midpoint" ? FlowConfig::Method::ImplicitMidpoint
                                                   : FlowConfig::Method::SymplecticLeapfrog;
        gcfg.T_max = sc.green_T_max;
        gcfg.tol = sc.green_tol;
        lax.sub_steps = sc.sub_steps;
        lax.window_radius = sc.window_radius;
        lax.refine = sc.refine;
        Vec q = Vec::Zero(model.n), p = Vec::Zero(model.n);
        for (size_t i = 0; i < sc.q0.size(); ++i) q[static_cast<int>(i)] = sc.q0[i];
        for (size_t i = 0; i < sc.p0.size(); ++i) p[static_cast<int>(i)] = sc.p0[i];
        x0 = PhasePoint(q, p);
    }
};

inline void run_flow(RunContext& ctx, ReportBuilder& rb, Report&) {
    rb.section("flow");
    double e0 = ctx.model.energy(ctx.x0);
    PhasePoint x1 = integrate(ctx.model, ctx.x0, ctx.sc.flow_t, ctx.fcfg);
    rb.kv("q_final", x1.q);
    rb.kv("p_final", x1.p);
    rb.kv("energy_drift", std::abs(ctx.model.energy(x1) - e0));
    Mat d = linearized_flow(ctx.model, ctx.x0, ctx.sc.flow_t, ctx.fcfg).entries;
    rb.kv("symplectic_defect", symplectic_defect(d));
}

inline void run_green(RunContext& ctx, ReportBuilder& rb, Report&) {
    rb.section("green");
    GreenPair pair =
        green_bundles(ctx.model, ctx.x0, ctx.gcfg.T_max, ctx.gcfg.tol, ctx.fcfg, ctx.gcfg);
    rb.kv("s_minus", pair.s_minus.S);
    rb.kv("s_plus", pair.s_plus.S);
    rb.kv("delta", pair.delta);
    rb.kv("p_dim", pair.p_dim);
    rb.kv("lambda", pair.lambda);
    rb.kv("kernel_threshold", pair.kernel_threshold);
    rb.kv("T_used_minus", pair.T_used_minus);
    rb.kv("T_used_plus", pair.T_used_plus);
}

inline void run_lyapunov(RunContext& ctx, ReportBuilder& rb, Report& rep) {
    rb.section("lyapunov");
    auto spec =
        lyapunov_spectrum(ctx.model, ctx.x0, ctx.sc.lyap_T, ctx.sc.lyap_step, ctx.fcfg);
    for (size_t i = 0; i < spec.exponents.size(); ++i)
        rb.kv("lambda_" + std::to_string(i + 1), spec.exponents[i]);
    rb.kv("zero_tol", spec.zero_tol);
    rb.kv("pairing_defect", pairing_defect(spec));
    std::ostringstream csv;
    csv << "t";
    for (size_t i = 1; i <= spec.exponents.size(); ++i) csv << ",l" << i;
    csv << "\n";
    for (auto& [t, est] : spec.trace) {
        csv << fmt(t);
        for (double e : est) csv << ',' << fmt(e);
        csv << "\n";
    }
    rep.files["exponents.csv"] = csv.str();
}

inline WeakKamPair solve_pair(RunContext& ctx) {
    auto sol = solve_weak_kam(ctx.model, Sign::Negative, ctx.sc.grid, ctx.sc.tau,
                              ctx.sc.wk_tol, ctx.sc.max_iter, ctx.lax);
    return conjugate_pair(ctx.model, sol, ctx.sc.tau, ctx.sc.wk_tol, ctx.sc.max_iter,
                          ctx.lax);
}

inline void run_weakkam(RunContext& ctx, ReportBuilder& rb, Report& rep) {
    rb.section("weakkam");
    WeakKamPair pair = solve_pair(ctx);
    rb.kv("c", pair.c);
    rb.kv("residual_minus", pair.residual_minus);
    rb.kv("residual_plus", pair.residual_plus);
    int eq = 0;
    for (bool b : pair.equality_set) eq += b;
    rb.kv("equality_nodes", eq);
    rb.kv("eq_tol", pair.eq_tol);
    rb.kv("semiconcavity_K", semiconcavity_constant(pair.u_minus));
    rb.kv("hj_residual", hamilton_jacobi_residual(ctx.model, pair.u_minus, pair.c));
    auto mather = mather_set_approx(pair);
    rb.kv("mather_points", static_cast<int>(mather.points.size()));
    rb.kv("du_mismatch", mather.worst_du_mismatch);
    auto lip = lipschitz_graph_check(pair);
    rb.kv("lipschitz_k_fit", lip.k_fit);
    rb.kv("lipschitz_bound", lip.bound);
    rb.verdict("lipschitz_verdict", lip.pass ? "PASS" : "FAIL");
    rep.files["u_minus.csv"] = csv_grid_function(pair.u_minus);
    rep.files["u_plus.csv"] = csv_grid_function(pair.u_plus);
}

inline void run_thm2(RunContext& ctx, ReportBuilder& rb, Report&) {
    rb.section("thm2");
    auto rep2 = verify_theorem_two(ctx.model, ctx.x0, ctx.sc.lyap_T, ctx.fcfg, ctx.gcfg,
                                   ctx.sc.lyap_step);
    rb.kv("p_from_green", rep2.p_from_green);
    rb.kv("zero_count", rep2.counts.zero);
    rb.kv("positive_count", rep2.counts.pos);
    rb.kv("negative_count", rep2.counts.neg);
    rb.verdict("verdict", rep2.verdict);
}

inline void run_thm3(RunContext& ctx, ReportBuilder& rb, Report& rep) {
    rb.section("thm3");
    WeakKamPair pair = solve_pair(ctx);
    bool minus = ctx.sc.side != "plus";
    const GridFunction& u = minus ? pair.u_minus : pair.u_plus;
    auto samples = pseudograph(u);
    std::vector<PhasePoint> lifted;
    for (const auto& s : samples)
        if (s.differentiable) lifted.emplace_back(s.q, s.du);
    // base: the first equality-set node, lifted by the pair derivative
    size_t base_idx = 0;
    while (base_idx < pair.equality_set.size() && !pair.equality_set[base_idx]) ++base_idx;
    PhasePoint base(u.node(base_idx), u.gradient_at_node(base_idx));
    auto cone = contingent_cone(lifted, base, {0.4, 0.1, 0.025, 0.008, 0.004});
    rb.kv("cone_status", cone.status);
    rb.kv("cone_directions", static_cast<int>(cone.directions.size()));
    double sampling_error =
        ctx.sc.sampling_error > 0 ? ctx.sc.sampling_error : 20 * u.spacing();
    auto reg = theorem_three_check(ctx.model, base, cone,
                                   minus ? PairSide::Minus : PairSide::Plus, sampling_error,
                                   ctx.fcfg, ctx.gcfg);
    rb.kv("min_slack", reg.min_slack);
    rb.kv("lambda", reg.lambda);
    rb.verdict("verdict", reg.verdict);
    std::ostringstream csv;
    int n = ctx.model.n;
    for (int i = 0; i < n; ++i) csv << "dirX" << i << ',';
    for (int i = 0; i < n; ++i) csv << "dirY" << i << ',';
    csv << "lhs,rhs,slack\n";
    for (const auto& d : reg.directions) {
        for (int i = 0; i < n; ++i) csv << fmt(d.dir.X[i]) << ',';
        for (int i = 0; i < n; ++i) csv << fmt(d.dir.Y[i]) << ',';
        csv << fmt(d.lhs) << ',' << fmt(d.rhs) << ',' << fmt(d.slack) << "\n";
    }
    rep.files["slack.csv"] = csv.str();
}

inline void run_c1(RunContext& ctx, ReportBuilder& rb, Report& rep) {
    rb.section("c1");
    int n = ctx.model.n;
    Vec psup = Vec::Zero(n);
    if (!ctx.sc.support_p.empty())
        for (int i = 0; i < n; ++i) psup[i] = ctx.sc.support_p[i];
    else if (n == 1)
        psup[0] = 0.5;
    std::vector<PhasePoint> support;
    if (n == 1) {
        int cnt = ctx.sc.c1_samples;
        for (int i = 0; i < cnt; ++i)
            support.emplace_back(Vec::Constant(1, static_cast<double>(i) / cnt), psup);
    } else {
        int side = std::max(20, static_cast<int>(std::lround(std::sqrt(ctx.sc.c1_samples))));
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j) {
                Vec q(2);
                q << static_cast<double>(i) / side, static_cast<double>(j) / side;
                support.emplace_back(q, psup);
            }
    }
    std::mt19937_64 gen(ctx.sc.seed);
    std::uniform_int_distribution<size_t> pick(0, support.size() - 1);
    std::vector<PhasePoint> bases;
    for (int k = 0; k < ctx.sc.c1_bases; ++k) bases.push_back(support[pick(gen)]);

    auto diag = c1_diagnostic(ctx.model, support, bases, {0.1, 0.032, 0.01, 0.0032, 0.001},
                              0.05, ctx.sc.c1_T, ctx.fcfg, ctx.gcfg);
    rb.kv("bases", static_cast<int>(diag.bases.size()));
    rb.kv("applicable", diag.applicable);
    rb.kv("passed", diag.passed);
    rb.kv("pass_fraction", diag.pass_fraction);
    rb.verdict("verdict", diag.applicable == 0 ? "NOT-APPLICABLE"
                          : diag.pass_fraction >= 0.99 ? "PASS"
                                                       : "FAIL");
    std::ostringstream csv;
    for (int i = 0; i < n; ++i) csv << 'q' << i << ',';
    for (int i = 0; i < n; ++i) csv << 'p' << i << ',';
    csv << "directions,worst_angle,verdict\n";
    for (const auto& b : diag.bases) {
        for (int i = 0; i < n; ++i) csv << fmt(b.base.q[i]) << ',';
        for (int i = 0; i < n; ++i) csv << fmt(b.base.p[i]) << ',';
        csv << b.directions << ',' << fmt(b.worst_angle) << ',' << b.verdict << "\n";
    }
    rep.files["c1_bases.csv"] = csv.str();
}

}  // namespace detail

inline Report run(const Scenario& sc) {
    auto t_start = std::chrono::steady_clock::now();
    Report rep;
    detail::ReportBuilder rb;
    rb.kv("artifact", "greenkam");
    rb.kv("version", "0.1.0");
    detail::echo_scenario(rb, sc);
    try {
        detail::RunContext ctx(sc);
        rb.section("results");
        rb.kv("dimension", ctx.model.n);
        if (sc.task == "flow" || sc.task == "full") detail::run_flow(ctx, rb, rep);
        if (sc.task == "green" || sc.task == "full") detail::run_green(ctx, rb, rep);
        if (sc.task == "lyapunov" || sc.task == "full") detail::run_lyapunov(ctx, rb, rep);
        if (sc.task == "weakkam" || sc.task == "full") detail::run_weakkam(ctx, rb, rep);
        if (sc.task == "verify-thm2" || sc.task == "full") detail::run_thm2(ctx, rb, rep);
        if (sc.task == "verify-thm3") detail::run_thm3(ctx, rb, rep);
        if (sc.task == "c1-diagnostic") detail::run_c1(ctx, rb, rep);
    } catch (const std::exception& e) {
        rb.section("error");
        rb.kv("message", e.what());
        rep.text = rb.str();
        rep.exit_code = 2;
        return rep;
    }
    rep.text = rb.str();
    rep.exit_code = rb.failed() ? 1 : 0;
    rep.wall_time_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t_start)
                           .count();
    return rep;
}

/// Writes report.txt (body plus a trailing wall-time line) and the CSV set.
inline void emit_report(const Report& rep, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream f(fs::path(dir) / "report.txt", std::ios::binary);
        if (!f) throw ParseError("cannot write report to " + dir);
        f << rep.text;
        f << "wall_time_ms = " << rep.wall_time_ms << "\n";
    }
    for (const auto& [name, content] : rep.files) {
        std::ofstream f(fs::path(dir) / name, std::ios::binary);
        if (!f) throw ParseError("cannot write " + name + " to " + dir);
        f << content;
    }
}

}  // namespace greenkam

#endif
