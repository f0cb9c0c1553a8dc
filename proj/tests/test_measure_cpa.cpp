#include "metrograph/cpa.hpp"
#include "metrograph/measure.hpp"
#include "metrograph/model.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace metrograph;
using Catch::Matchers::WithinAbs;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}
} // namespace

TEST_CASE("dx_N puts 1/N on every vertex") {
    const auto path = interval_model(5);
    const auto mu = dx_model_measure(path);
    for (std::size_t i = 0; i < 5; ++i) CHECK_THAT(mu[i], WithinAbs(0.2, 1e-15));
    const auto cyc = build_model(graphs::circle(), 4);
    const auto nu = dx_model_measure(cyc);
    for (std::size_t i = 0; i < 4; ++i) CHECK_THAT(nu[i], WithinAbs(0.25, 1e-15));
    CHECK_THAT(nu.total_mass(), WithinAbs(1.0, 1e-15));
    CHECK(nu.is_probability_mass());
}

TEST_CASE("voronoi discretization of dx on the 5-vertex path") {
    const auto m = interval_model(5);
    const auto mu = voronoi_discretize(MeasureSpec::lebesgue(graphs::interval()), m);
    const double expect[] = {0.125, 0.25, 0.25, 0.25, 0.125};
    // vertex order: a, b, then interior points left to right
    CHECK_THAT(mu[0], WithinAbs(expect[0], 1e-15));
    CHECK_THAT(mu[1], WithinAbs(expect[4], 1e-15));
    for (std::size_t i = 2; i < 5; ++i) CHECK_THAT(mu[i], WithinAbs(0.25, 1e-15));
}

TEST_CASE("atom at an endpoint is captured whole") {
    const auto g = graphs::interval();
    const MeasureSpec delta(g, {}, {{0, 1.0}});
    const auto mu = voronoi_discretize(delta, interval_model(7));
    CHECK(mu[0] == 1.0);
    for (std::size_t i = 1; i < 7; ++i) CHECK(mu[i] == 0.0);
}

TEST_CASE("density 2x on the 3-vertex path against quadrature") {
    const auto g = graphs::interval();
    const MeasureSpec m(g, {{{0.0, 1.0, {0.0, 2.0}}}}, {});
    const auto mu = voronoi_discretize(m, interval_model(3));
    auto w = [](double x) { return 2.0 * x; };
    const double a = oracle::simpson(w, 0.0, 0.25), mid = oracle::simpson(w, 0.25, 0.75),
                 b = oracle::simpson(w, 0.75, 1.0);
    CHECK_THAT(mu[0], WithinAbs(a, 1e-12));
    CHECK_THAT(mu[2], WithinAbs(mid, 1e-12));
    CHECK_THAT(mu[1], WithinAbs(b, 1e-12));
    CHECK_THAT(mu[0], WithinAbs(1.0 / 16.0, 1e-15));
    CHECK_THAT(mu[2], WithinAbs(0.5, 1e-15));
    CHECK_THAT(mu[1], WithinAbs(7.0 / 16.0, 1e-15));
}

TEST_CASE("voronoi masses of a random polynomial density on the star") {
    const auto g = graphs::star3();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<std::vector<DensityPiece>> d(3);
    double total = 0.0;
    for (std::size_t e = 0; e < 3; ++e) {
        std::vector<double> c{u(rng), u(rng), u(rng)};
        total += oracle::simpson([&](double t) { return poly::eval(c, t); }, 0.0, g.segment(e).length);
        d[e].push_back({0.0, g.segment(e).length, c});
    }
    for (auto& p : d)
        for (double& c : p[0].coeffs) c /= total;
    const MeasureSpec m(g, d, {});
    const auto model = build_model(g, 22);
    const auto mu = voronoi_discretize(m, model);
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(22);
    for (const auto& ed : model->edges()) {
        const auto& c = d[ed.segment][0].coeffs;
        auto w = [&](double t) { return poly::eval(c, t); };
        const double mid = 0.5 * (ed.t0 + ed.t1);
        expect(static_cast<Eigen::Index>(ed.a)) += oracle::simpson(w, ed.t0, mid);
        expect(static_cast<Eigen::Index>(ed.b)) += oracle::simpson(w, mid, ed.t1);
    }
    CHECK((mu.mass() - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THAT(mu.total_mass(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("measure validation") {
    const auto g = graphs::interval();
    CHECK_THROWS_AS(MeasureSpec(g, {{{0.0, 1.0, {0.5}}}}, {}), ValidationError);
    CHECK_THROWS_AS(MeasureSpec(g, {{{0.0, 1.0, {1, 0, 0, 0, 0, 0, 0, 0}}}}, {}), ValidationError);
    CHECK_THROWS_AS(MeasureSpec(g, {{{0.0, 0.6, {1.0}}, {0.5, 1.0, {1.0}}}}, {}), ValidationError);
    CHECK_THROWS_AS(MeasureSpec(g, {}, {{5, 1.0}}), ValidationError);
    // signed measures are allowed
    const MeasureSpec s(g, {{{0.0, 1.0, {2.0}}}}, {{0, -1.0}});
    CHECK_THAT(s.total_mass(), WithinAbs(1.0, 1e-15));
    CHECK_THAT(s.total_variation(), WithinAbs(3.0, 1e-15));
}

TEST_CASE("polynomial helpers") {
    CHECK_THAT(poly::integral({1.0, 2.0, 3.0}, 0.0, 1.0), WithinAbs(3.0, 1e-15));
    const auto r = poly::roots_in({-0.25, 0.0, 1.0}, 0.0, 1.0);  // t^2 - 1/4
    REQUIRE(r.size() == 1);
    CHECK_THAT(r[0], WithinAbs(0.5, 1e-12));
    CHECK_THAT(poly::abs_integral({-0.5, 1.0}, 0.0, 1.0), WithinAbs(0.25, 1e-14));
}

TEST_CASE("cpa_eval interpolates linearly") {
    const auto seg = interval_model(2);
    const CpaFunction f(seg, vec({0.0, 1.0}));
    CHECK_THAT(cpa_eval(f, {0, 0.25}), WithinAbs(0.25, 1e-15));
    const auto c = CpaFunction::constant(build_model(graphs::star3(), 13), 3.0);
    CHECK_THAT(cpa_eval(c, {2, 0.123}), WithinAbs(3.0, 1e-15));
    // N = 3 path: vertices a, b, midpoint
    const auto p3 = interval_model(3);
    const CpaFunction hat(p3, vec({0.0, 0.0, 1.0}));
    CHECK_THAT(cpa_eval(hat, {0, 0.75}), WithinAbs(0.5, 1e-15));
    CHECK(cpa_eval(hat, {0, 0.5}) == 1.0);
}

TEST_CASE("weighted l2 inner products") {
    const auto m = interval_model(4);
    const auto one = CpaFunction::constant(m, 1.0);
    CHECK_THAT(inner_l2(one, one, dx_model_measure(m)), WithinAbs(1.0, 1e-15));
    const CpaFunction e0(m, vec({1, 0, 0, 0})), e1(m, vec({0, 1, 0, 0}));
    const DiscreteMeasure nu(m, vec({0.1, 0.2, 0.3, 0.4}));
    CHECK(inner_l2(e0, e1, nu) == 0.0);
    const auto two = interval_model(2);
    const CpaFunction f(two, vec({1.0, 2.0}));
    CHECK_THAT(inner_l2(f, f, DiscreteMeasure(two, vec({0.5, 0.5}))), WithinAbs(2.5, 1e-15));
    CHECK_THAT(inner_l2(f, f), WithinAbs(2.5, 1e-15));
    CHECK_THAT(norm_l2(f), WithinAbs(std::sqrt(2.5), 1e-15));
}

TEST_CASE("exact L2 inner product of CPA functions") {
    const auto seg = interval_model(2);
    const auto one = CpaFunction::constant(seg, 1.0);
    const CpaFunction t(seg, vec({0.0, 1.0}));
    CHECK_THAT(inner_L2_exact(one, one), WithinAbs(1.0, 1e-15));
    CHECK_THAT(inner_L2_exact(t, one), WithinAbs(0.5, 1e-15));
    CHECK_THAT(inner_L2_exact(t, t), WithinAbs(1.0 / 3.0, 1e-15));
    CHECK_THAT(integrate_dx(t), WithinAbs(0.5, 1e-15));
}

TEST_CASE("exact L2 inner product against quadrature on the theta graph") {
    const auto g = graphs::theta();
    const auto m = build_model(g, 17);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd a(17), b(17);
    for (int i = 0; i < 17; ++i) { a(i) = u(rng); b(i) = u(rng); }
    const CpaFunction f(m, a), h(m, b);
    double quad = 0.0;
    for (std::size_t e = 0; e < g.segment_count(); ++e) {
        const auto& c = m->chain(e);
        for (std::size_t j = 0; j + 1 < c.offsets.size(); ++j)
            quad += oracle::simpson(
                [&](double t) { return cpa_eval(f, {e, t}) * cpa_eval(h, {e, t}); }, c.offsets[j],
                c.offsets[j + 1], 20);
    }
    CHECK_THAT(inner_L2_exact(f, h), WithinAbs(quad, 1e-12));
}

TEST_CASE("functions on different models do not mix") {
    const auto a = interval_model(3), b = interval_model(3);
    CHECK_THROWS_AS(inner_l2(CpaFunction::constant(a, 1.0), CpaFunction::constant(b, 1.0)), ValidationError);
    CHECK_THROWS_AS(CpaFunction(a, Eigen::VectorXd::Zero(4)), ValidationError);
}
