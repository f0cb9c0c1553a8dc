#include "metrograph/kernel.hpp"
#include "metrograph/selftest.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace metrograph;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

DiscreteMeasure random_discrete(const MetrizedGraph& g, const ModelPtr& m, std::mt19937_64& rng) {
    return voronoi_discretize(detail::random_measure(g, rng), m);
}
} // namespace

TEST_CASE("j-function on the unit interval is the distance from the pin") {
    // N = 3 by hand: pinned rows (b, m) give [[2, -2], [-2, 4]] u = (1, 0)
    const auto m3 = interval_model(3);
    const auto j3 = j_function(m3, 0, 1);
    CHECK_THAT(j3[2], WithinAbs(0.5, 1e-14));
    CHECK_THAT(j3[1], WithinAbs(1.0, 1e-14));
    CHECK(j3[0] == 0.0);

    const auto m = interval_model(17);
    const auto j = j_function(m, 0, 1);
    for (std::size_t v = 0; v < m->size(); ++v) CHECK_THAT(j[v], WithinAbs(m->vertices()[v].point.offset, 1e-12));
    CHECK_THAT(cpa_eval(j, {0, 0.3}), WithinAbs(0.3, 1e-12));
}

TEST_CASE("j_z(., z) vanishes") {
    const auto m = build_model(graphs::theta(), 20);
    CHECK(j_function(m, 7, 7).values().cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(j_function(m, 20, 1), ValidationError);
}

TEST_CASE("j is bounded by 0 and 1 on unit-length graphs") {
    std::mt19937_64 rng(21);
    for (const auto& name : graphs::names()) {
        const auto m = build_model(*graphs::by_name(name), 35);
        for (int t = 0; t < 10; ++t) {
            const std::size_t z = rng() % 35, y = rng() % 35;
            const auto j = j_function(m, z, y);
            CHECK(j.values().minCoeff() >= -1e-12);
            CHECK(j.values().maxCoeff() <= 1.0 + 1e-12);
            CHECK_THAT(j[y], WithinAbs(j.values().maxCoeff(), 1e-12));
        }
    }
}

TEST_CASE("pseudoinverse route agrees with pinned solves") {
    std::mt19937_64 rng(22);
    const auto m = build_model(graphs::star3(), 40);
    const auto q = kirchhoff_matrix(m);
    const auto lp = pseudoinverse_kernel(q);
    CHECK((lp * Eigen::VectorXd::Ones(40)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((lp - lp.transpose()).cwiseAbs().maxCoeff() == 0.0);
    // Q L+ = I - 11^T / N
    const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(40, 40) - Eigen::MatrixXd::Constant(40, 40, 1.0 / 40);
    CHECK((q.dense() * lp - proj).cwiseAbs().maxCoeff() < 1e-10);
    for (int t = 0; t < 50; ++t) {
        const std::size_t z = rng() % 40, y = rng() % 40;
        const auto j = j_function(q, z, y);
        for (std::size_t x = 0; x < 40; ++x) CHECK_THAT(j_from_pseudoinverse(lp, z, x, y), WithinAbs(j[x], 1e-9));
    }
}

TEST_CASE("kernel for a point mass at the endpoint is min(x, y)") {
    const auto g = graphs::interval();
    const auto m = interval_model(11);
    const auto nu = voronoi_discretize(MeasureSpec(g, {}, {{0, 1.0}}), m);
    const auto t = kernel_table(m, nu);
    CHECK_THAT(t.c_nu, WithinAbs(0.0, 1e-12));
    for (std::size_t x = 0; x < 11; ++x)
        for (std::size_t y = 0; y < 11; ++y) {
            const double expect = std::min(m->vertices()[x].point.offset, m->vertices()[y].point.offset);
            CHECK_THAT(t.g(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)), WithinAbs(expect, 1e-12));
        }
    CHECK_THAT(t.eval({0, 0.25}, {0, 0.75}), WithinAbs(0.25, 1e-12));
}

TEST_CASE("kernel table against sums of pinned j-functions") {
    std::mt19937_64 rng(23);
    const auto g = graphs::theta();
    const auto m = build_model(g, 25);
    const auto nu = random_discrete(g, m, rng);
    const auto q = kirchhoff_matrix(m);
    const auto t = kernel_table(q, nu);
    // C_nu = sum_{x,z} nu(x) nu(z) j_z(x, y) for any y
    for (std::size_t y : {0u, 9u, 24u}) {
        Eigen::VectorXd jnu = Eigen::VectorXd::Zero(25);
        for (std::size_t z = 0; z < 25; ++z) jnu += nu[z] * j_function(q, z, y).values();
        CHECK_THAT(jnu.dot(nu.mass()), WithinAbs(t.c_nu, 1e-10));
        const Eigen::VectorXd col = jnu.array() - t.c_nu;
        CHECK((col - t.g.col(static_cast<Eigen::Index>(y))).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK(t.c_spread < 1e-12);
}

TEST_CASE("kernel symmetry and nu-orthogonality") {
    std::mt19937_64 rng(24);
    for (const auto& name : graphs::names()) {
        const auto g = *graphs::by_name(name);
        const auto m = build_model(g, 60);
        const auto nu = random_discrete(g, m, rng);
        const auto t = kernel_table(m, nu);
        CHECK((t.g - t.g.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((t.g * nu.mass()).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("kernel_table requires unit mass") {
    const auto m = interval_model(6);
    CHECK_THROWS_AS(kernel_table(m, DiscreteMeasure(m, Eigen::VectorXd::Constant(6, 0.5))), ValidationError);
}

TEST_CASE("phi_N") {
    std::mt19937_64 rng(25);
    const auto m = build_model(graphs::star3(), 30);
    const auto dx = dx_model_measure(m);
    const auto tdx = kernel_table(m, dx);
    CHECK(phi_N(tdx, dx, CpaFunction::constant(m, 2.0)).values().cwiseAbs().maxCoeff() < 1e-12);

    const auto nu = random_discrete(graphs::star3(), m, rng);
    const auto t = kernel_table(m, nu);
    const CpaFunction f(m, random_vector(30, rng)), h(m, random_vector(30, rng));
    CHECK_THAT(inner_l2(phi_N(t, nu, f), h), WithinAbs(inner_l2(f, phi_N(t, nu, h)), 1e-10));
    CHECK(phi_N(t, nu, CpaFunction(m, nu.mass())).values().cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(phi_N(t, dx, f), ValidationError);
}

TEST_CASE("phi_N inverts Q up to the measure correction") {
    std::mt19937_64 rng(26);
    const auto m = interval_model(20);
    const auto q = kirchhoff_matrix(m);
    const auto dx = dx_model_measure(m);
    const auto t = kernel_table(q, dx);
    const CpaFunction f(m, random_vector(20, rng));
    CHECK(verify_laplacian_inverse(q, t, dx, f) < 1e-9);

    Eigen::VectorXd z = random_vector(20, rng);
    z.array() -= z.mean();
    const Eigen::VectorXd qphi = q * phi_N(t, dx, CpaFunction(m, z)).values();
    CHECK((qphi - z / 20.0).cwiseAbs().maxCoeff() < 1e-9);

    const auto nu = random_discrete(graphs::interval(), m, rng);
    const auto tn = kernel_table(q, nu);
    const Eigen::VectorXd qc = q * phi_N(tn, nu, CpaFunction::constant(m, 3.0)).values();
    CHECK((qc - (Eigen::VectorXd::Constant(20, 3.0 / 20.0) - 3.0 * nu.mass())).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("eigen_phi and reciprocity") {
    const auto m5 = interval_model(5);
    const auto dx5 = dx_model_measure(m5);
    const auto a5 = eigen_phi(kernel_table(m5, dx5), dx5, 1);
    CHECK_THAT(a5.cluster(1).value, WithinAbs(0.130901, 1e-6));
    CHECK_THAT(a5.cluster(1).value, WithinRel(1.0 / 7.6393202250021, 1e-12));

    std::mt19937_64 rng(27);
    for (const auto& name : graphs::names()) {
        const auto g = *graphs::by_name(name);
        const auto m = build_model(g, 48);
        const auto q = kirchhoff_matrix(m);
        const auto nu = random_discrete(g, m, rng);
        const auto t = kernel_table(q, nu);
        const auto alpha = eigen_phi(t, nu, 47);
        const auto lam = eigen_mu(q, nu, 6);
        for (const auto& c : alpha.clusters) CHECK(c.value > 0.0);
        for (std::size_t i = 1; i <= 6; ++i) {
            CAPTURE(name, i);
            CHECK(std::abs(alpha.cluster(i).value * lam.cluster(i).scaled - 1.0) < 1e-8);
            CHECK(alpha.cluster(i).multiplicity == lam.cluster(i).multiplicity);
            for (const auto& f : lam.cluster(i).eigenfunctions) {
                const auto pf = phi_N(t, nu, f);
                CHECK((pf.values() - f.values() / lam.cluster(i).scaled).cwiseAbs().maxCoeff() < 1e-8);
            }
        }
    }
}
