// Green's kernel on the three-star with a Voronoi-discretized measure, and
// the residual of Q phi_N against the identity it should invert.
#include "metrograph/metrograph.hpp"

#include <cstdio>

int main() {
    using namespace metrograph;
    const auto graph = graphs::star3();
    const auto model = build_model(graph, 40);
    const auto mu = voronoi_discretize(MeasureSpec::lebesgue(graph), model);
    const auto q = kirchhoff_matrix(model);
    const auto table = kernel_table(q, mu);

    const auto f = CpaFunction::sample(model, [](const GraphPoint& p) { return p.offset * (1.0 + p.segment); });
    std::printf("C_nu = %.12f\n", table.c_nu);
    std::printf("residual = %.3e\n", verify_laplacian_inverse(q, table, mu, f));

    const auto lam = eigen_mu(q, mu, 3);
    const auto alpha = eigen_phi(table, mu, 3);
    for (std::size_t i = 1; i <= lam.clusters.size(); ++i)
        std::printf("N lambda_%zu = %.8f   1/alpha = %.8f\n", i, lam.cluster(i).scaled, alpha.cluster(i).scaled);
}
