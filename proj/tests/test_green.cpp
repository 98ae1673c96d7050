#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "greenkam/green.hpp"
#include "greenkam/lyapunov.hpp"
#include "greenkam/model.hpp"

using namespace greenkam;

namespace {
Vec vec1(double x) {
    Vec v(1);
    v[0] = x;
    return v;
}
Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

TEST_CASE("pushed vertical matches the closed forms") {
    auto rotor = make_model("FreeRotor");
    PhasePoint x(vec1(0.3), vec1(0.7));
    CHECK(pushed_vertical(rotor, x, 2.0).S(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(pushed_vertical(rotor, x, -2.0).S(0, 0) == doctest::Approx(-0.5).epsilon(1e-6));

    auto pend = make_model("Pendulum");
    PhasePoint fix(vec1(0), vec1(0));
    // scalar Riccati s' = 4 pi^2 - s^2 along the constant orbit
    for (double t : {0.5, 1.0, 10.0}) {
        double expect = kTwoPi / std::tanh(kTwoPi * t);
        CHECK(pushed_vertical(pend, fix, t).S(0, 0) == doctest::Approx(expect).epsilon(1e-5));
        CHECK(pushed_vertical(pend, fix, -t).S(0, 0) ==
              doctest::Approx(-expect).epsilon(1e-5));
    }
}

TEST_CASE("conjugate vector detection at the elliptic equilibrium") {
    auto pend = make_model("Pendulum");
    // s' = -4 pi^2 - s^2 from a 1/eps start blows up within a quarter period
    CHECK_THROWS_AS(pushed_vertical(pend, PhasePoint(vec1(0.5), vec1(0)), 1.0),
                    ConjugatePointError);
}

TEST_CASE("graph transform closed form on the free rotor") {
    auto rotor = make_model("FreeRotor");
    Mat d = linearized_flow(rotor, PhasePoint(vec1(0), vec1(0)), 2.0).entries;
    Mat s(1, 1);
    s << 0.25;
    CHECK(graph_transform(d, s)(0, 0) == doctest::Approx(0.25 / 1.5).epsilon(1e-9));
}

TEST_CASE("green bundles at the pendulum fixed point") {
    auto pend = make_model("Pendulum");
    GreenPair pair = green_bundles(pend, PhasePoint(vec1(0), vec1(0)), 1200, 1e-3);
    CHECK(pair.s_plus.S(0, 0) == doctest::Approx(kTwoPi).epsilon(1e-3 / kTwoPi));
    CHECK(pair.s_minus.S(0, 0) == doctest::Approx(-kTwoPi).epsilon(1e-3 / kTwoPi));
    CHECK(pair.delta(0, 0) == doctest::Approx(2 * kTwoPi).epsilon(1e-3));
    CHECK(pair.p_dim == 0);
    CHECK(pair.tilde_minus(0, 0) == doctest::Approx(-3 * kTwoPi).epsilon(1e-3));
    CHECK(pair.tilde_plus(0, 0) == doctest::Approx(3 * kTwoPi).epsilon(1e-3));
}

TEST_CASE("green bundles degenerate cases") {
    auto rotor = make_model("FreeRotor");
    GreenPair pr = green_bundles(rotor, PhasePoint(vec1(0.3), vec1(0.7)), 1200, 1e-3);
    CHECK(std::abs(pr.s_minus.S(0, 0)) <= 1e-6);
    CHECK(std::abs(pr.s_plus.S(0, 0)) <= 1e-6);
    CHECK(pr.p_dim == 1);

    auto mane = make_model("ManeRotor");
    GreenPair pm = green_bundles(mane, PhasePoint(vec2(0.1, 0.9), vec2(0, 0)), 1200, 1e-3);
    CHECK(pm.s_minus.S.norm() <= 1e-6);
    CHECK(pm.s_plus.S.norm() <= 1e-6);
    CHECK(pm.p_dim == 2);
}

TEST_CASE("order chain and symmetry of the green pair") {
    auto pend = make_model("Pendulum");
    GreenPair pair = green_bundles(pend, PhasePoint(vec1(0), vec1(0)), 1200, 1e-3);
    auto leq = [](const Mat& a, const Mat& b) {
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(b - a));
        return es.eigenvalues().minCoeff() >= -1e-7 * (1 + b.norm());
    };
    CHECK(leq(pair.tilde_minus, pair.s_minus.S));
    CHECK(leq(pair.s_minus.S, pair.s_plus.S));
    CHECK(leq(pair.s_plus.S, pair.tilde_plus));
    CHECK((pair.s_minus.S - pair.s_minus.S.transpose()).norm() <= 1e-9);
}

TEST_CASE("green bundles on an invariant circle carry the flow direction") {
    auto pend = make_model("Pendulum");
    PhasePoint x(vec1(0.25), vec1(2.0));  // rotational orbit, energy 2
    FlowConfig fc;
    fc.h = 1e-4;  // phase slip of the base orbit dominates the limit error
    GreenConfig gcfg;
    gcfg.rank_tol = 5e-2;
    GreenPair pair = green_bundles(pend, x, 1200, 2e-3, fc, gcfg);
    // both limits are tangent to the circle p(q) = sqrt(4 - 2 cos(2 pi q))
    TangentVector xh = flow_vector(pend, x);
    double slope = xh.Y[0] / xh.X[0];
    CHECK(pair.s_minus.S(0, 0) == doctest::Approx(slope).epsilon(3e-3));
    CHECK(pair.s_plus.S(0, 0) == doctest::Approx(slope).epsilon(3e-3));
    CHECK(pair.p_dim == 1);

    // equivariance of the finite-time family: D phi_s maps the time-t push
    // at x onto the time-(t+s) push at phi_s x
    double tp = 2.0, s = 0.5;
    Mat d = linearized_flow(pend, x, s, fc).entries;
    PhasePoint xs = integrate(pend, x, s, fc);
    Mat lhs = graph_transform(d, pushed_vertical(pend, x, tp, fc).S);
    Mat rhs = pushed_vertical(pend, xs, tp + s, fc).S;
    CHECK((lhs - rhs).norm() <= 1e-5);
}

TEST_CASE("dynamical criterion at the pendulum fixed point") {
    auto pend = make_model("Pendulum");
    PhasePoint x(vec1(0), vec1(0));
    GreenPair pair = green_bundles(pend, x, 1200, 1e-3);

    auto unstable = dynamical_criterion_check(pend, x, TangentVector{vec1(1), vec1(kTwoPi)},
                                              3.0, pair);
    CHECK(unstable.verdict == "DIVERGES");
    CHECK(unstable.in_plus);
    CHECK_FALSE(unstable.in_minus);

    auto stable = dynamical_criterion_check(pend, x, TangentVector{vec1(1), vec1(-kTwoPi)},
                                            3.0, pair);
    CHECK(stable.verdict == "BOUNDED");
    CHECK(stable.in_minus);
    CHECK(stable.diverges_backward);

    auto rotor = make_model("FreeRotor");
    PhasePoint xr(vec1(0.2), vec1(0));
    GreenPair pr = green_bundles(rotor, xr, 1200, 1e-3);
    auto vert = dynamical_criterion_check(rotor, xr, TangentVector{vec1(0), vec1(1)}, 10.0,
                                          pr, FlowConfig{}, 1e-3, 16);
    // horizontal part grows linearly: t = 10 at the end
    CHECK(vert.forward.back().horizontal_norm == doctest::Approx(10.0).epsilon(1e-6));
    CHECK_FALSE(vert.in_minus);
}

TEST_CASE("monotone ordering of the pushed-vertical family") {
    auto rotor = make_model("FreeRotor");
    auto rep = monotonicity_scan(rotor, PhasePoint(vec1(0.1), vec1(0.3)), {1.0, 2.0});
    CHECK(rep.pass);
    // family S(-1) = -1 < S(-2) = -0.5 < S(2) = 0.5 < S(1) = 1
    for (auto& [t, s] : rep.family)
        CHECK(s(0, 0) == doctest::Approx(1.0 / t).epsilon(1e-6));

    auto pend = make_model("Pendulum");
    CHECK(monotonicity_scan(pend, PhasePoint(vec1(0), vec1(0)), {1.0, 5.0}).pass);
    auto mane = make_model("ManeRotor");
    auto repm = monotonicity_scan(mane, PhasePoint(vec2(0.4, 0.2), vec2(0, 0)), {1.0, 2.0});
    CHECK(repm.pass);

    auto mech = make_model("MechanicalT2");
    CHECK(monotonicity_scan(mech, PhasePoint(vec2(0, 0), vec2(0, 0)), {0.5, 1.0}).pass);
}

TEST_CASE("lyapunov spectrum closed forms") {
    auto pend = make_model("Pendulum");
    auto spec = lyapunov_spectrum(pend, PhasePoint(vec1(0), vec1(0)), 50.0);
    REQUIRE(spec.exponents.size() == 2);
    CHECK(spec.exponents[0] == doctest::Approx(kTwoPi).epsilon(0.01));
    CHECK(spec.exponents[1] == doctest::Approx(-kTwoPi).epsilon(0.01));
    CHECK(pairing_defect(spec) <= 2 * spec.zero_tol);

    auto rotor = make_model("FreeRotor");
    auto szero = lyapunov_spectrum(rotor, PhasePoint(vec1(0.3), vec1(0.7)), 2000.0);
    for (double l : szero.exponents) CHECK(std::abs(l) <= 1e-3);

    auto mane = make_model("ManeRotor");
    auto sm = lyapunov_spectrum(mane, PhasePoint(vec2(0.1, 0.2), vec2(0, 0)), 2000.0);
    REQUIRE(sm.exponents.size() == 4);
    for (double l : sm.exponents) CHECK(std::abs(l) <= 1e-3);
    double sum = 0;
    for (double l : sm.exponents) sum += l;
    CHECK(std::abs(sum) <= 4 * sm.zero_tol);
}

TEST_CASE("spectrum classification") {
    LyapunovSpectrum s;
    s.zero_tol = 1e-2;
    s.exponents = {0.0, 0.0};
    auto c = classify_spectrum(s);
    CHECK(c.zero == 2);
    s.exponents = {6.283, -6.283};
    c = classify_spectrum(s);
    CHECK(c.pos == 1);
    CHECK(c.neg == 1);
    CHECK(c.zero == 0);
    s.exponents = {0.006, -0.006};
    c = classify_spectrum(s);
    CHECK(c.zero == 2);
    CHECK(c.indeterminate);  // within a factor 2 of the threshold
    s.exponents = {1.0, 0.5};  // pairing violated
    CHECK_THROWS(classify_spectrum(s));
}

TEST_CASE("backward stable direction lies in the minus bundle") {
    auto pend = make_model("Pendulum");
    PhasePoint x(vec1(0), vec1(0));
    FlowConfig cfg;
    FlowStepper st(pend, x, cfg);
    Vec v(2);
    v << 1, 1;
    for (int k = 0; k < 20000; ++k) {
        v = st.advance_tangent(-1e-3) * v;
        v.normalize();
    }
    GreenPair pair = green_bundles(pend, x, 1200, 1e-3);
    Vec graph_dir(2);
    graph_dir << 1, pair.s_minus.S(0, 0);
    graph_dir.normalize();
    double angle = std::acos(std::min(1.0, std::abs(graph_dir.dot(v))));
    CHECK(angle <= 1e-3);
}

TEST_CASE("theorem-2 cross-check verdicts") {
    auto rotor = make_model("FreeRotor");
    auto r1 = verify_theorem_two(rotor, PhasePoint(vec1(0.3), vec1(0.7)), 2000.0);
    CHECK(r1.p_from_green == 1);
    CHECK(r1.counts.zero == 2);
    CHECK(r1.verdict == "CONSISTENT");

    auto mane = make_model("ManeRotor");
    auto r2 = verify_theorem_two(mane, PhasePoint(vec2(0.1, 0.9), vec2(0, 0)), 2000.0);
    CHECK(r2.p_from_green == 2);
    CHECK(r2.counts.zero == 4);
    CHECK(r2.verdict == "CONSISTENT");

    auto pend = make_model("Pendulum");
    auto r3 = verify_theorem_two(pend, PhasePoint(vec1(0), vec1(0)), 50.0);
    CHECK(r3.p_from_green == 0);
    CHECK(r3.counts.pos == 1);
    CHECK(r3.counts.neg == 1);
    CHECK(r3.counts.zero == 0);
    CHECK(r3.verdict == "CONSISTENT-WITH-CAVEAT");
}
