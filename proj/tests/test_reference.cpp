#include "metrograph/reference.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace metrograph;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
constexpr double pi = oracle::pi;

// -f'' + lambda f by central differences at interior sample points
double ode_residual(const TrigEigenfunction& f, const MetrizedGraph& g) {
    double worst = 0.0;
    const double h = 1e-4;
    for (std::size_t e = 0; e < g.segment_count(); ++e) {
        const double len = g.segment(e).length;
        for (int i = 1; i < 10; ++i) {
            const double t = len * i / 10.0;
            const double d2 = (f({e, t + h}) - 2.0 * f({e, t}) + f({e, t - h})) / (h * h);
            worst = std::max(worst, std::abs(-d2 - f.k * f.k * f({e, t})) / (f.k * f.k));
        }
    }
    return worst;
}

void check_orthonormal(const MetrizedGraph& g, const ContinuousSpectrum& s) {
    for (std::size_t a = 0; a < s.eigenvalues.size(); ++a) {
        const auto& ea = s.eigenvalues[a];
        REQUIRE(ea.eigenfunctions.size() == ea.multiplicity);
        for (std::size_t i = 0; i < ea.multiplicity; ++i) {
            CHECK(std::abs(integrate_dx(g, ea.eigenfunctions[i])) < 1e-8);
            const auto r = vertex_residuals(g, ea.eigenfunctions[i]);
            CHECK(r.continuity < 1e-8);
            CHECK(r.kirchhoff < 1e-8);
            for (std::size_t j = 0; j < ea.multiplicity; ++j)
                CHECK_THAT(inner_L2(g, ea.eigenfunctions[i], ea.eigenfunctions[j]),
                           WithinAbs(i == j ? 1.0 : 0.0, 1e-8));
        }
        // across clusters by midpoint quadrature (frequencies differ)
        for (std::size_t b = a + 1; b < s.eigenvalues.size(); ++b) {
            double ip = 0.0;
            for (std::size_t e = 0; e < g.segment_count(); ++e) {
                const double len = g.segment(e).length;
                const int m = 4000;
                for (int t = 0; t < m; ++t) {
                    const GraphPoint p{e, len * (t + 0.5) / m};
                    ip += ea.eigenfunctions[0](p) * s.eigenvalues[b].eigenfunctions[0](p) * len / m;
                }
            }
            CHECK(std::abs(ip) < 1e-5);
        }
    }
}
} // namespace

TEST_CASE("interval closed form") {
    const auto s = interval_spectrum(3);
    CHECK(s.provenance == Provenance::closed_form);
    CHECK_THAT(s.eigenvalues[0].lambda, WithinAbs(9.8696, 1e-4));
    CHECK(s.eigenvalues[0].lambda == pi * pi);
    CHECK_THAT(s.eigenvalues[1].lambda, WithinRel(4.0 * pi * pi, 1e-15));
    CHECK_THAT(s.eigenvalues[0].alpha * s.eigenvalues[0].lambda, WithinAbs(1.0, 1e-15));
    const auto g = graphs::interval();
    for (const auto& ev : s.eigenvalues) {
        const auto& f = ev.eigenfunctions[0];
        CHECK(ode_residual(f, g) < 1e-5);
        CHECK(std::abs(f.derivative({0, 0.0})) < 1e-12);
        CHECK(std::abs(f.derivative({0, 1.0})) < 1e-12);
        CHECK(std::abs(f({0, 0.0}) - std::sqrt(2.0)) < 1e-15);
    }
    check_orthonormal(g, s);
}

TEST_CASE("circle closed form") {
    const auto s = circle_spectrum(3);
    CHECK_THAT(s.eigenvalues[0].lambda, WithinAbs(39.478, 1e-3));
    CHECK(s.eigenvalues[0].multiplicity == 2);
    check_orthonormal(graphs::circle(), s);
}

TEST_CASE("secular roots on the interval are n pi") {
    const auto g = graphs::interval();
    const auto s = secular_spectrum(g, 30.0 * 30.0, 5);
    CHECK(s.provenance == Provenance::secular);
    REQUIRE(s.eigenvalues.size() == 5);
    for (std::size_t n = 1; n <= 5; ++n) {
        const double k = std::sqrt(s.eigenvalues[n - 1].lambda);
        CHECK_THAT(k, WithinRel(n * pi, 1e-8));
        CHECK(s.eigenvalues[n - 1].multiplicity == 1);
    }
    check_orthonormal(g, s);
}

TEST_CASE("secular roots on the circle are double at 2 pi n") {
    const auto g = graphs::circle();
    const auto s = secular_spectrum(g, std::pow(2.0 * pi * 3.5, 2));
    REQUIRE(s.eigenvalues.size() == 3);
    for (std::size_t n = 1; n <= 3; ++n) {
        CHECK_THAT(std::sqrt(s.eigenvalues[n - 1].lambda), WithinRel(2.0 * pi * n, 1e-8));
        CHECK(s.eigenvalues[n - 1].multiplicity == 2);
    }
    check_orthonormal(g, s);
}

TEST_CASE("equal-leg star: cos(kL) = 0 roots are double, sin(kL) = 0 roots simple") {
    const auto g = graphs::star3();
    const auto s = secular_spectrum_first(g, 4);
    REQUIRE(s.eigenvalues.size() >= 4);
    const double leg = 1.0 / 3.0;
    const double expect_k[] = {pi / (2 * leg), pi / leg, 3 * pi / (2 * leg), 2 * pi / leg};
    const std::size_t expect_m[] = {2, 1, 2, 1};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK_THAT(std::sqrt(s.eigenvalues[i].lambda), WithinRel(expect_k[i], 1e-8));
        CHECK(s.eigenvalues[i].multiplicity == expect_m[i]);
    }
    CHECK_THAT(s.eigenvalues[0].lambda, WithinRel(9.0 * pi * pi / 4.0, 1e-8));
    check_orthonormal(g, s);
}

TEST_CASE("theta graph eigenfunctions satisfy the vertex conditions") {
    const auto g = graphs::theta();
    const auto s = secular_spectrum_first(g, 5);
    REQUIRE(s.eigenvalues.size() == 5);
    for (std::size_t i = 1; i < 5; ++i) CHECK(s.eigenvalues[i].lambda > s.eigenvalues[i - 1].lambda);
    check_orthonormal(g, s);
    for (const auto& ev : s.eigenvalues)
        for (const auto& f : ev.eigenfunctions) CHECK(ode_residual(f, g) < 1e-5);
}

TEST_CASE("reference_spectrum dispatch") {
    CHECK(reference_spectrum(graphs::interval(), 2).provenance == Provenance::closed_form);
    CHECK(reference_spectrum(graphs::circle(), 2).provenance == Provenance::closed_form);
    CHECK(reference_spectrum(graphs::star3(), 2).provenance == Provenance::secular);
    CHECK(std::string(to_string(Provenance::extrapolated)) == "extrapolated");
    CHECK(std::string(to_string(Provenance::closed_form)) == "closed-form");
}

TEST_CASE("secular solver validation") {
    CHECK_THROWS_AS(secular_spectrum(graphs::interval(), -1.0), ValidationError);
    CHECK_THROWS_AS(secular_spectrum(graphs::interval(), 1.0), NumericalError);
}

TEST_CASE("extrapolation of an exact L - c/N sequence") {
    std::vector<std::pair<double, double>> pts;
    for (double n : {100.0, 200.0, 300.0, 400.0, 500.0}) pts.emplace_back(n, 5.0 - 3.0 / n);
    const auto e = extrapolate_reference(pts);
    CHECK_THAT(e.limit, WithinAbs(5.0, 1e-6));
    CHECK_THAT(e.exponent, WithinAbs(1.0, 1e-4));
    CHECK_FALSE(e.low_confidence);
}

TEST_CASE("extrapolation of the closed-form path sequence") {
    std::vector<std::pair<double, double>> pts;
    for (int n : {5, 10, 50, 100, 200, 500}) pts.emplace_back(n, n * oracle::path_lambda1(n));
    const auto e = extrapolate_reference(pts);
    CHECK_THAT(e.limit, WithinAbs(pi * pi, 1e-3));
}

TEST_CASE("extrapolation of a constant sequence is flagged") {
    const auto e = extrapolate_reference({{10, 2.0}, {20, 2.0}, {40, 2.0}});
    CHECK(e.limit == 2.0);
    CHECK(e.low_confidence);
    CHECK(std::isnan(e.exponent));
    CHECK_THROWS_AS(extrapolate_reference({{10, 1.0}, {20, 2.0}}), ValidationError);
    CHECK_THROWS_AS(extrapolate_reference({{20, 1.0}, {10, 2.0}, {30, 2.0}}), ValidationError);
}

TEST_CASE("noisy extrapolation input is low-confidence") {
    const auto e = extrapolate_reference({{10, 1.0}, {20, 3.0}, {40, 2.0}, {80, 2.9}});
    CHECK(e.low_confidence);
}
