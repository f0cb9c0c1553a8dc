// Scaled first eigenvalue of the unit interval under the dx_N convention.
#include "metrograph/metrograph.hpp"

#include <cstdio>

int main() {
    using namespace metrograph;
    const auto report = run_schedule(graphs::interval(), std::nullopt, Convention::dxN, 1,
                                     {5, 10, 50, 100, 200, 500});
    std::printf("%6s %12s %6s\n", "N", "N*lambda", "mult");
    for (const auto& r : report.records)
        std::printf("%6zu %12.6f %6zu\n", r.n, r.scaled, r.multiplicity);
    std::printf("limit %s = %.10f\n", to_string(report.provenance), report.reference_value);
    if (report.extrapolation) std::printf("extrapolated    = %.10f\n", report.extrapolation->limit);
}
