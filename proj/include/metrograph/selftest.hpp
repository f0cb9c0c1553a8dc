#pragma once

#include "metrograph/cpa.hpp"
#include "metrograph/graph.hpp"
#include "metrograph/kernel.hpp"
#include "metrograph/laplacian.hpp"
#include "metrograph/measure.hpp"
#include "metrograph/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace metrograph {

/// Exact identities checked on randomized models. Tolerances are absolute
/// except where noted.
struct IdentityTolerances {
    double laplacian_inverse = 1e-9;
    double reciprocity = 1e-8;           // |alpha N lambda - 1|
    double kernel_symmetry = 1e-9;
    double kernel_orthogonality = 1e-9;
    double zhang = 1e-10;
    double rayleigh = 1e-8;              // relative
    double equivalent_laplacian = 1e-8;  // relative to |Q|
};

struct SelftestOptions {
    std::size_t trials = 200;
    std::size_t max_n = 200;
    std::uint64_t seed = 0;
    std::optional<double> tol_override;
    bool inject_weight_fault = false;
    std::vector<std::string> graphs{"interval", "circle", "star3", "theta"};
};

struct SuiteResult {
    std::string name;
    double worst = 0.0;
    double tolerance = 0.0;
    std::size_t checks = 0;
    bool passed = true;
};

namespace detail {

/// Random signed measure: positive polynomial densities rescaled to leave
/// room for atoms of either sign; total mass 1.
inline MeasureSpec random_measure(const MetrizedGraph& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coef(0.2, 1.0), atom(-0.1, 0.2);
    std::uniform_int_distribution<int> deg(0, 3);
    std::vector<Atom> atoms;
    double atom_mass = 0.0;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        if (rng() % 2 == 0) continue;
        const double c = atom(rng);
        atoms.push_back({v, c});
        atom_mass += c;
    }
    std::vector<std::vector<DensityPiece>> density(g.segment_count());
    double raw = 0.0;
    for (std::size_t e = 0; e < g.segment_count(); ++e) {
        const double len = g.segment(e).length;
        DensityPiece p{0.0, len, {}};
        const int d = deg(rng);
        for (int j = 0; j <= d; ++j) p.coeffs.push_back(coef(rng) / std::pow(len, j));
        raw += poly::integral(p.coeffs, 0.0, len);
        density[e].push_back(std::move(p));
    }
    const double scale = (1.0 - atom_mass) / raw;
    double placed = 0.0;
    for (auto& pieces : density)
        for (auto& p : pieces) {
            for (double& c : p.coeffs) c *= scale;
        }
    for (std::size_t e = 0; e < g.segment_count(); ++e)
        placed += poly::integral(density[e][0].coeffs, 0.0, g.segment(e).length);
    // absorb rounding in the first atom or the first density constant
    const double fix = 1.0 - atom_mass - placed;
    density[0][0].coeffs[0] += fix / g.segment(0).length;
    return MeasureSpec(g, std::move(density), std::move(atoms));
}

/// Integral of f' g' dx along each segment, slopes read off cpa_eval at
/// interior points of every piece.
inline double zhang_integral(const CpaFunction& f, const CpaFunction& g) {
    const auto& model = *f.model();
    double r = 0.0;
    for (std::size_t e = 0; e < model.graph().segment_count(); ++e) {
        const auto& c = model.chain(e);
        for (std::size_t j = 0; j + 1 < c.offsets.size(); ++j) {
            const double a = c.offsets[j], b = c.offsets[j + 1], h = b - a;
            const GraphPoint p{e, a + 0.25 * h}, q{e, a + 0.75 * h};
            const double fs = (cpa_eval(f, q) - cpa_eval(f, p)) / (0.5 * h);
            const double gs = (cpa_eval(g, q) - cpa_eval(g, p)) / (0.5 * h);
            r += fs * gs * h;
        }
    }
    return r;
}

/// Random low-frequency CPA function: constant plus a mix of the first
/// eigenfunctions.
inline CpaFunction smooth_random(const SpectralResult& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const auto& model = spec.model;
    Eigen::VectorXd v = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(model->size()), uni(rng));
    for (const auto& c : spec.clusters)
        for (const auto& f : c.eigenfunctions) v += uni(rng) * f.values();
    return {model, std::move(v)};
}

} // namespace detail

/// Runs the identity suites; the first entry is always laplacian_inverse.
inline std::vector<SuiteResult> run_identity_suites(const SelftestOptions& opt = {}) {
    IdentityTolerances tol;
    if (opt.tol_override) {
        const double t = *opt.tol_override;
        tol = {t, t, t, t, t, t, t};
    }
    std::vector<SuiteResult> suites{
        {"laplacian_inverse", 0.0, tol.laplacian_inverse},
        {"reciprocity", 0.0, tol.reciprocity},
        {"kernel_symmetry", 0.0, tol.kernel_symmetry},
        {"kernel_orthogonality", 0.0, tol.kernel_orthogonality},
        {"zhang_identity", 0.0, tol.zhang},
        {"rayleigh_min", 0.0, tol.rayleigh},
        {"equivalent_laplacian", 0.0, tol.equivalent_laplacian},
    };
    auto record = [&](std::size_t s, double v) {
        suites[s].worst = std::max(suites[s].worst, v);
        ++suites[s].checks;
    };

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (std::size_t t = 0; t < opt.trials; ++t) {
        const auto graph = *graphs::by_name(opt.graphs[t % opt.graphs.size()]);
        const std::size_t lo = std::max<std::size_t>(8, graph.vertex_count() + 2 * graph.segment_count());
        std::uniform_int_distribution<std::size_t> pick_n(lo, std::max(lo, opt.max_n));
        const auto model = build_model(graph, pick_n(rng));
        const std::size_t n = model->size();
        const bool voronoi = rng() % 2 == 1;
        const DiscreteMeasure mu = voronoi ? voronoi_discretize(detail::random_measure(graph, rng), model)
                                           : dx_model_measure(model);
        const auto q_true = kirchhoff_matrix(model);
        const auto q = opt.inject_weight_fault ? q_true.with_perturbed_edge(0, 1.01) : q_true;
        const auto table = kernel_table(q_true, mu);

        Eigen::VectorXd fv(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < fv.size(); ++i) fv(i) = uni(rng);
        const CpaFunction f(model, fv);
        record(0, verify_laplacian_inverse(q, table, mu, f));

        const std::size_t k = std::min<std::size_t>(5, n - 1);
        const auto lam = eigen_mu(q, mu, k);
        const auto alpha = eigen_phi(table, mu, k);
        const std::size_t kk = std::min(lam.clusters.size(), alpha.clusters.size());
        for (std::size_t c = 0; c < kk; ++c)
            record(1, std::abs(alpha.clusters[c].value * lam.clusters[c].scaled - 1.0));

        record(2, (table.g - table.g.transpose()).cwiseAbs().maxCoeff());
        // second route: g(x, y) = sum_z nu(z) j_z(x, y) - C with pinned solves
        const std::size_t y = static_cast<std::size_t>(rng() % n);
        Eigen::VectorXd jnu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        for (std::size_t z = 0; z < n; ++z) jnu += mu[z] * j_function(q_true, z, y).values();
        const Eigen::VectorXd col = jnu.array() - table.c_nu;
        record(2, (col - table.g.col(static_cast<Eigen::Index>(y))).cwiseAbs().maxCoeff());
        record(3, (table.g * mu.mass()).cwiseAbs().maxCoeff());

        const auto g1 = detail::smooth_random(lam, rng);
        const auto g2 = detail::smooth_random(lam, rng);
        record(4, std::abs(dirichlet_inner(g1, g2) - detail::zhang_integral(g1, g2)));

        const std::size_t m = 1 + static_cast<std::size_t>(rng() % std::min<std::size_t>(3, lam.clusters.size()));
        const auto rc = rayleigh_min_check(lam, q, mu, m, 20, rng(), tol.rayleigh);
        record(5, std::max(rc.equality_error, std::max(0.0, (rc.target - rc.min_quotient) / rc.target)));

        record(6, verify_equivalent_laplacian(lam, q, mu).max_residual / q.norm_bound());
    }
    for (auto& s : suites) s.passed = s.worst < s.tolerance;
    return suites;
}

} // namespace metrograph
