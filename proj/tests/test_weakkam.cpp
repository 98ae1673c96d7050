#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "greenkam/action.hpp"
#include "greenkam/model.hpp"
#include "greenkam/regularity.hpp"
#include "greenkam/weakkam.hpp"

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
constexpr double kPi = 3.1415926535897932384626433832795;

double pendulum_u_minus(double q) {
    double w = wrap01(q);
    return w <= 0.5 ? (2 / kPi) * (1 - std::cos(kPi * w))
                    : (2 / kPi) * (1 + std::cos(kPi * w));
}
}  // namespace

TEST_CASE("action closed forms") {
    auto rotor = make_model("FreeRotor");
    auto arc = action(rotor, vec1(0.2), vec1(0.5), 1.0, 8);
    CHECK(arc.certified);
    CHECK(arc.value == doctest::Approx(0.045).epsilon(1e-10));
    CHECK(arc.p_start[0] == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(arc.p_end[0] == doctest::Approx(0.3).epsilon(1e-9));

    // minimizing lift goes through the seam
    auto lift = action(rotor, vec1(0.9), vec1(0.1), 1.0, 8);
    CHECK(lift.value == doctest::Approx(0.02).epsilon(1e-10));

    auto mane = make_model("ManeRotor");
    auto am = action(mane, vec2(0, 0), vec2(0, 0), 0.2, 8);
    double expect = (0.04 + 0.08) / 0.4;  // |t omega|^2 / 2t for the zero lift
    CHECK(am.value == doctest::Approx(expect).epsilon(1e-9));
    CHECK(am.p_start[0] == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(am.p_start[1] == doctest::Approx(-std::sqrt(2.0)).epsilon(1e-8));

    // resting at the potential maximum is the pendulum minimizer
    auto pend = make_model("Pendulum");
    auto ap = action(pend, vec1(0), vec1(0), 1.0, 8);
    CHECK(ap.certified);
    CHECK(ap.value == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(std::abs(ap.p_start[0]) <= 1e-10);

    CHECK_THROWS_AS(action(pend, vec1(0), vec1(0.3), -1.0, 8), ModelDomainError);
}

TEST_CASE("discretized action converges at second order") {
    auto pend = make_model("Pendulum");
    double a8 = action(pend, vec1(0.1), vec1(0.4), 0.7, 8).value;
    double a16 = action(pend, vec1(0.1), vec1(0.4), 0.7, 16).value;
    double a64 = action(pend, vec1(0.1), vec1(0.4), 0.7, 64).value;
    double e8 = a8 - a64, e16 = a16 - a64;
    CHECK(e8 / e16 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("lax-oleinik operator basics") {
    auto rotor = make_model("FreeRotor");
    GridFunction zero(1, 128);
    GridFunction tz = lax_oleinik(rotor, zero, 0.2, Sign::Negative);
    for (double v : tz.values) CHECK(std::abs(v) <= 1e-12);
    GridFunction tp = lax_oleinik(rotor, zero, 0.2, Sign::Positive);
    for (double v : tp.values) CHECK(std::abs(v) <= 1e-12);

    CHECK_THROWS_AS(LaxOleinikOperator(rotor, 0.7, 128), ModelDomainError);
    CHECK_THROWS_AS(LaxOleinikOperator(rotor, 0.02, 128), ModelDomainError);
    CHECK_THROWS_AS(LaxOleinikOperator(rotor, 0.2, 64), ModelDomainError);
    LaxConfig bad;
    bad.sub_steps = 2;
    CHECK_THROWS_AS(LaxOleinikOperator(rotor, 0.2, 128, bad), ModelDomainError);
}

TEST_CASE("semigroup duality on a reversible model") {
    // A(a, b) = A(b, a) for the pendulum, so T^ u = -T(-u) node by node
    auto pend = make_model("Pendulum");
    LaxConfig cfg;
    cfg.refine = false;
    std::mt19937_64 gen(4242);
    std::uniform_real_distribution<double> amp(-1, 1);
    GridFunction u(1, 128);
    for (auto& v : u.values) v = amp(gen);
    GridFunction a = lax_oleinik(pend, u, 0.2, Sign::Positive, cfg);
    GridFunction neg = u;
    for (auto& v : neg.values) v = -v;
    GridFunction b = lax_oleinik(pend, neg, 0.2, Sign::Negative, cfg);
    for (size_t i = 0; i < u.size(); ++i)
        CHECK(a.values[i] == doctest::Approx(-b.values[i]).epsilon(1e-12));
}

TEST_CASE("lax-oleinik properties at random data") {
    auto rotor = make_model("FreeRotor");
    LaxConfig cfg;
    cfg.refine = false;
    std::mt19937_64 gen(777);
    std::uniform_real_distribution<double> amp(-2, 2), pos(0, 1);
    for (int rep = 0; rep < 300; ++rep) {
        GridFunction u(1, 128), v(1, 128), w(1, 128);
        for (int i = 0; i < 128; ++i) {
            u.at(i) = amp(gen);
            v.at(i) = u.at(i) + pos(gen);  // u <= v
            w.at(i) = amp(gen);
        }
        for (Sign s : {Sign::Negative, Sign::Positive}) {
            GridFunction tu = lax_oleinik(rotor, u, 0.2, s, cfg);
            GridFunction tv = lax_oleinik(rotor, v, 0.2, s, cfg);
            GridFunction tw = lax_oleinik(rotor, w, 0.2, s, cfg);
            double worst = 0, bound = 0;
            for (size_t i = 0; i < u.size(); ++i) {
                // monotone
                CHECK(tu.values[i] <= tv.values[i] + 1e-12);
                worst = std::max(worst, std::abs(tu.values[i] - tw.values[i]));
                bound = std::max(bound, std::abs(u.values[i] - w.values[i]));
            }
            // non-expansive in the sup norm
            CHECK(worst <= bound + 1e-12);
        }
        // exact commutation with constants
        GridFunction shifted = u;
        for (auto& x : shifted.values) x += 5.0;
        GridFunction a = lax_oleinik(rotor, shifted, 0.2, Sign::Negative, cfg);
        GridFunction b = lax_oleinik(rotor, u, 0.2, Sign::Negative, cfg);
        for (size_t i = 0; i < u.size(); ++i)
            CHECK(a.values[i] == doctest::Approx(b.values[i] + 5.0).epsilon(1e-13));
    }
}

TEST_CASE("constant shift commutes with the refined operator too") {
    auto pend = make_model("Pendulum");
    GridFunction u(1, 128);
    for (int i = 0; i < 128; ++i) u.at(i) = std::sin(kTwoPi * i / 128.0);
    GridFunction shifted = u;
    for (auto& x : shifted.values) x += 3.0;
    GridFunction a = lax_oleinik(pend, shifted, 0.2, Sign::Negative);
    GridFunction b = lax_oleinik(pend, u, 0.2, Sign::Negative);
    for (size_t i = 0; i < u.size(); ++i)
        CHECK(a.values[i] == doctest::Approx(b.values[i] + 3.0).epsilon(1e-12));
}

TEST_CASE("weak KAM solution on the free rotor is trivial") {
    auto rotor = make_model("FreeRotor");
    auto sol = solve_weak_kam(rotor, Sign::Negative, 128, 0.2, 1e-6);
    CHECK(std::abs(sol.c) <= 1e-6);
    for (double v : sol.u.values) CHECK(std::abs(v) <= 1e-6);
    CHECK(sol.residual <= 1e-6);
}

TEST_CASE("weak KAM solution on the Mane rotor") {
    auto mane = make_model("ManeRotor");
    LaxConfig cfg;
    cfg.sub_steps = 4;
    cfg.window_radius = 0.4;
    auto sol = solve_weak_kam(mane, Sign::Negative, 64, 0.2, 1e-6, 500, cfg);
    CHECK(std::abs(sol.c) <= 1e-6);
    for (double v : sol.u.values) CHECK(std::abs(v) <= 1e-5);
}

TEST_CASE("pendulum weak KAM pair against the closed form") {
    auto pend = make_model("Pendulum");
    auto sol = solve_weak_kam(pend, Sign::Negative, 512, 0.2, 1e-5);
    CHECK(sol.c == doctest::Approx(1.0).epsilon(0.02));
    double sup = 0;
    for (int i = 0; i < 512; ++i)
        sup = std::max(sup, std::abs(sol.u.at(i) - pendulum_u_minus(i / 512.0)));
    CHECK(sup <= 0.02);

    auto pair = conjugate_pair(pend, sol, 0.2, 1e-5);
    CHECK(pair.c == doctest::Approx(sol.c));
    // reversibility forces the conjugate to be the reflection
    double mirror = 0;
    for (size_t i = 0; i < pair.u_plus.size(); ++i)
        mirror = std::max(mirror, std::abs(pair.u_plus.values[i] + pair.u_minus.values[i]));
    CHECK(mirror <= 1e-3);

    // contact happens only at the bottom of the well, within a cell of q = 0
    size_t hits = 0;
    for (size_t i = 0; i < pair.equality_set.size(); ++i) {
        if (!pair.equality_set[i]) continue;
        ++hits;
        CHECK(torus_dist(pair.u_minus.node(i), vec1(0)) <= 2.5 / 512);
    }
    CHECK(hits >= 1);
    CHECK(pair.equality_set[0]);

    // differentiability structure of u_minus
    auto samples = pseudograph(pair.u_minus);
    CHECK_FALSE(samples[256].differentiable);  // kink at q = 1/2
    CHECK(samples[128].differentiable);
    CHECK(samples[128].du[0] == doctest::Approx(std::sqrt(2.0)).epsilon(0.03));
    CHECK(samples[64].du[0] == doctest::Approx(2 * std::sin(kPi * 0.125)).epsilon(0.03));

    CHECK(semiconcavity_constant(pair.u_minus) == doctest::Approx(kPi).epsilon(0.05));
    CHECK(hamilton_jacobi_residual(pend, pair.u_minus, pair.c) <= 5e-2);

    auto mather = mather_set_approx(pair);
    CHECK(mather.points.size() == hits);
    for (const auto& pt : mather.points) {
        CHECK(torus_dist(pt.q, vec1(0)) <= 2.5 / 512);
        CHECK(pt.p.norm() <= 0.05);
    }
    CHECK_FALSE(mather.derivative_warning);

    auto lip = lipschitz_graph_check(pair);
    CHECK(lip.pass);
    CHECK(lip.k_fit > 0);
    CHECK(lip.bound == doctest::Approx(6 * kPi).epsilon(0.1));

    // barrier comparison at the contact point, and slack growth with t
    auto cmp1 = barrier_comparison_check(pend, pair, vec1(0), 1.0);
    CHECK(cmp1.pass);
    auto cmp10 = barrier_comparison_check(pend, pair, vec1(0), 10.0);
    CHECK(cmp10.pass);
    CHECK(cmp10.min_slack_upper >= cmp1.min_slack_upper - cmp1.tolerance);
    CHECK_THROWS_AS(barrier_comparison_check(pend, pair, vec1(0.25), 1.0), ModelDomainError);
}

TEST_CASE("semiconcavity constant closed forms") {
    GridFunction flat(1, 256);
    for (auto& v : flat.values) v = 3.7;
    CHECK(semiconcavity_constant(flat) <= 1e-12);

    GridFunction cosg(1, 256);
    for (int i = 0; i < 256; ++i) cosg.at(i) = std::cos(kTwoPi * i / 256.0);
    CHECK(semiconcavity_constant(cosg) == doctest::Approx(2 * kPi * kPi).epsilon(0.05));
}

TEST_CASE("barrier second derivative matches the pushed vertical") {
    auto rotor = make_model("FreeRotor");
    auto bf = barrier(rotor, PhasePoint(vec1(0.3), vec1(0.5)), 2.0, +1);
    CHECK(bf.d2_center(0, 0) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(bf.d2_defect <= 1e-3);
    CHECK_FALSE(bf.shrunk);

    auto pend = make_model("Pendulum");
    auto up = barrier(pend, PhasePoint(vec1(0), vec1(0)), 10.0, +1);
    CHECK(up.d2_center(0, 0) == doctest::Approx(kTwoPi).epsilon(1e-3));
    CHECK(up.d2_defect <= 1e-3);
    auto dn = barrier(pend, PhasePoint(vec1(0), vec1(0)), 10.0, -1);
    CHECK(dn.d2_center(0, 0) == doctest::Approx(-kTwoPi).epsilon(1e-3));
    CHECK(dn.d2_defect <= 1e-3);

    CHECK_THROWS_AS(barrier(pend, PhasePoint(vec1(0), vec1(0)), -1.0, +1), ModelDomainError);
}

TEST_CASE("contingent cone recovers invariant-manifold directions") {
    // synthetic samples along the pendulum unstable line p = 2 pi q
    PhasePoint base(vec1(0), vec1(0));
    std::vector<PhasePoint> samples;
    for (double s = 3e-4; s <= 0.35; s *= 1.25) {
        samples.emplace_back(vec1(s), vec1(kTwoPi * s));
        samples.emplace_back(vec1(-s), vec1(-kTwoPi * s));
    }
    std::vector<double> radii{0.4, 0.1, 0.025, 0.008, 0.002};
    auto cone = contingent_cone(samples, base, radii);
    REQUIRE(cone.status == "OK");
    REQUIRE(cone.directions.size() == 2);
    Vec expect(2);
    expect << 1.0, kTwoPi;
    expect.normalize();
    for (const auto& d : cone.directions) {
        double a = std::acos(std::clamp(std::abs(d.flat().dot(expect)), 0.0, 1.0));
        CHECK(a <= 0.02);
    }

    // stability under reshuffling
    std::mt19937_64 gen(11);
    std::shuffle(samples.begin(), samples.end(), gen);
    auto cone2 = contingent_cone(samples, base, radii);
    REQUIRE(cone2.directions.size() == 2);
    for (const auto& d : cone2.directions) {
        double best = 10;
        for (const auto& e : cone.directions)
            best = std::min(best,
                            std::acos(std::clamp(d.flat().dot(e.flat()), -1.0, 1.0)));
        CHECK(best <= 0.02);
    }

    // an isolated point supports no direction
    auto lonely = contingent_cone({PhasePoint(vec1(0.2), vec1(0.1))}, base, radii);
    CHECK(lonely.status == "INSUFFICIENT-SAMPLES");
    CHECK(lonely.directions.empty());

    // schedule validation
    CHECK_THROWS_AS(contingent_cone(samples, base, {0.4, 0.1}), ModelDomainError);
    CHECK_THROWS_AS(contingent_cone(samples, base, {0.4, 0.2, 0.1}), ModelDomainError);
}

TEST_CASE("tilted-bundle inequality saturates on the unstable direction") {
    auto pend = make_model("Pendulum");
    PhasePoint base(vec1(0), vec1(0));
    std::vector<PhasePoint> samples;
    for (double s = 3e-4; s <= 0.35; s *= 1.25) {
        samples.emplace_back(vec1(s), vec1(kTwoPi * s));
        samples.emplace_back(vec1(-s), vec1(-kTwoPi * s));
    }
    auto cone = contingent_cone(samples, base, {0.4, 0.1, 0.025, 0.008, 0.002});
    auto rep = theorem_three_check(pend, base, cone, PairSide::Minus, 5e-3);
    CHECK(rep.verdict == "C1-REGULAR-CONSISTENT");
    REQUIRE(rep.directions.size() == 2);
    CHECK(rep.lambda == doctest::Approx(2 * kTwoPi).epsilon(1e-3));
    for (const auto& ds : rep.directions) {
        // (1, 2 pi) saturates: lhs = rhs = 8 pi |X|
        double x = std::abs(ds.dir.X[0]);
        CHECK(ds.lhs == doctest::Approx(4 * kTwoPi * x).epsilon(0.02));
        CHECK(ds.rhs == doctest::Approx(4 * kTwoPi * x).epsilon(0.02));
        CHECK(std::abs(ds.slack) <= 0.05 * ds.rhs);
        CHECK(ds.rhs_proj == doctest::Approx(ds.rhs).epsilon(0.02));  // p = 0 here
    }

    // a vertical direction cannot satisfy the inequality
    ConeEstimate vertical{base, {TangentVector{vec1(0), vec1(1)}}, {0.1},
                          {0.4, 0.1, 0.004}, "OK"};
    auto bad = theorem_three_check(pend, base, vertical, PairSide::Minus, 5e-3);
    CHECK(bad.verdict == "INEQUALITY-VIOLATION");

    ConeEstimate empty{base, {}, {}, {0.4, 0.1, 0.004}, "INSUFFICIENT-SAMPLES"};
    auto none = theorem_three_check(pend, base, empty, PairSide::Minus, 5e-3);
    CHECK(none.verdict == "INSUFFICIENT-SAMPLES");
}

TEST_CASE("c1 diagnostic on flat and hyperbolic supports") {
    auto rotor = make_model("FreeRotor");
    std::vector<PhasePoint> support;
    for (int i = 0; i < 400; ++i) support.emplace_back(vec1(i / 400.0), vec1(0.7));
    std::vector<PhasePoint> bases{PhasePoint(vec1(0.0), vec1(0.7)),
                                  PhasePoint(vec1(0.37), vec1(0.7))};
    auto rep = c1_diagnostic(rotor, support, bases, {0.3, 0.1, 0.03, 0.01, 0.003});
    CHECK(rep.applicable == 2);
    CHECK(rep.passed == 2);
    CHECK(rep.pass_fraction == doctest::Approx(1.0));
    for (const auto& b : rep.bases) {
        CHECK(b.verdict == "PASS");
        CHECK(b.worst_angle <= 0.05);
        CHECK(b.directions >= 2);
    }

    // hyperbolic base is gated out by its nonzero exponents
    auto pend = make_model("Pendulum");
    auto hyp = c1_diagnostic(pend, support, {PhasePoint(vec1(0), vec1(0))},
                             {0.3, 0.1, 0.03, 0.01, 0.003}, 0.05, 50);
    CHECK(hyp.applicable == 0);
    CHECK(hyp.bases[0].verdict == "NOT-APPLICABLE");
    CHECK(hyp.pass_fraction == doctest::Approx(0.0));
}

TEST_CASE("c1 diagnostic on the two-dimensional flat support") {
    auto mane = make_model("ManeRotor");
    std::vector<PhasePoint> support;
    for (int i = 0; i < 100; ++i)
        for (int j = 0; j < 100; ++j)
            support.emplace_back(vec2(i / 100.0, j / 100.0), vec2(0, 0));
    std::vector<PhasePoint> bases{PhasePoint(vec2(0.5, 0.5), vec2(0, 0))};
    auto rep = c1_diagnostic(mane, support, bases, {0.3, 0.1, 0.03, 0.01, 0.003});
    CHECK(rep.applicable == 1);
    CHECK(rep.passed == 1);
    CHECK(rep.bases[0].directions >= 8);
    CHECK(rep.bases[0].worst_angle <= 0.05);
}
