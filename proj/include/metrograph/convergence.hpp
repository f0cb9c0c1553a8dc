#pragma once

#include "metrograph/cpa.hpp"
#include "metrograph/error.hpp"
#include "metrograph/graph.hpp"
#include "metrograph/laplacian.hpp"
#include "metrograph/measure.hpp"
#include "metrograph/model.hpp"
#include "metrograph/reference.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace metrograph {

/// dxN: mu_N = dx_N, the ordinary eigenvectors of Q_N. voronoi: mu_N(p) = mu(A_p).
enum class Convention { dxN, voronoi };

inline const char* to_string(Convention c) { return c == Convention::dxN ? "dxN" : "voronoi"; }

struct ConvergenceRecord {
    std::size_t n = 0;                       ///< actual |V_N|
    double scaled = 0.0;                     ///< N lambda_{i,N}
    std::size_t multiplicity = 0;            ///< d_{i,N}
    std::size_t effective_multiplicity = 0;  ///< after near-degenerate merging
    std::optional<double> sup_distance;
    std::vector<double> angles;
    double seconds = 0.0;
    std::string note;
};

struct RateFit {
    double p = 0.0;  ///< error ~ M N^{-p}
    double m = 0.0;
    double r_squared = 1.0;
    double max_log_residual = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;
    std::string note;
};

struct MonotoneCheck {
    bool monotone = true;
    std::optional<std::size_t> first_violation;  ///< index of the first decreasing record
    bool has_ties = false;
};

struct ConvergenceReport {
    std::string graph_id;
    std::string measure_id;
    Convention convention = Convention::dxN;
    std::size_t index = 1;
    std::vector<ConvergenceRecord> records;
    Provenance provenance = Provenance::closed_form;
    double reference_value = 0.0;
    std::size_t reference_multiplicity = 0;  ///< 0 when unknown (extrapolated)
    std::optional<double> reference_uncertainty;
    std::optional<Extrapolation> extrapolation;  ///< fitted limit of the scaled values, >= 3 records
    std::optional<RateFit> rate;
    MonotoneCheck monotone;
    std::optional<std::size_t> stabilization_n0;
    std::vector<std::string> notes;
};

/// log|limit - scaled| against log N by least squares; p = -slope.
inline RateFit fit_rate(const std::vector<ConvergenceRecord>& records, double limit) {
    std::vector<double> xs, ys;
    RateFit out;
    for (const auto& r : records) {
        const double err = std::abs(limit - r.scaled);
        if (err == 0.0) { ++out.excluded; continue; }
        xs.push_back(std::log(static_cast<double>(r.n)));
        ys.push_back(std::log(err));
    }
    if (out.excluded > 0) out.note = std::to_string(out.excluded) + " exact record(s) excluded";
    if (xs.size() < 3) throw ValidationError("rate fit needs at least 3 records with nonzero error");
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = xs[static_cast<std::size_t>(i)];
        b(i) = ys[static_cast<std::size_t>(i)];
    }
    const Eigen::Vector2d sol = a.colPivHouseholderQr().solve(b);
    const Eigen::VectorXd res = b - a * sol;
    out.p = -sol(1);
    out.m = std::exp(sol(0));
    out.used = xs.size();
    out.max_log_residual = res.cwiseAbs().maxCoeff();
    const double tss = (b.array() - b.mean()).square().sum();
    out.r_squared = tss > 0.0 ? 1.0 - res.squaredNorm() / tss : 1.0;
    return out;
}

/// Strict increase along the schedule; differences within 1e-12 are ties.
inline MonotoneCheck check_monotone(const std::vector<double>& values) {
    if (values.size() < 2) throw ValidationError("monotonicity check needs at least 2 values");
    MonotoneCheck out;
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double d = values[i] - values[i - 1];
        const double tol = 1e-12 * std::max(1.0, std::abs(values[i]));
        if (std::abs(d) <= tol) {
            out.has_ties = true;
        } else if (d < 0.0 && out.monotone) {
            out.monotone = false;
            out.first_violation = i;
        }
    }
    return out;
}

inline MonotoneCheck check_monotone(const std::vector<ConvergenceRecord>& records) {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.scaled);
    return check_monotone(v);
}

struct Alignment {
    double sup_distance = 0.0;
    std::vector<double> angles;  ///< principal angles, radians, ascending
    bool dimension_mismatch = false;
};

namespace detail {

/// Max of |f| over 10 evenly spaced points per model edge (endpoints included).
inline double dense_sup(const CpaFunction& f) {
    double m = 0.0;
    for (const auto& ed : f.model()->edges()) {
        for (int s = 0; s <= 10; ++s) {
            const double t = ed.t0 + (ed.t1 - ed.t0) * s / 10.0;
            m = std::max(m, std::abs(cpa_eval(f, {ed.segment, t})));
        }
    }
    return m;
}

inline Eigen::MatrixXd gram(const std::vector<CpaFunction>& a, const std::vector<CpaFunction>& b) {
    Eigen::MatrixXd g(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = inner_L2_exact(a[i], b[j]);
    return g;
}

/// G^{-1/2} for a symmetric positive definite Gram matrix.
inline Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& g) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    if (es.eigenvalues().minCoeff() <= 0.0) throw NumericalError("degenerate function set in alignment");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

} // namespace detail

/// Compares a discrete eigenspace with reference eigenfunctions restricted to
/// the model (CPA interpolants). One-dimensional spaces are sign-aligned;
/// larger ones use principal angles and least-squares projection in exact L2.
inline Alignment align_subspace(const std::vector<CpaFunction>& discrete,
                                const std::vector<CpaFunction>& reference) {
    if (discrete.empty() || reference.empty()) throw ValidationError("alignment needs nonempty sets");
    const auto& model = discrete.front().model();
    for (const auto& f : reference) require_same_model(model, f.model());
    Alignment out;
    out.dimension_mismatch = discrete.size() != reference.size();

    if (discrete.size() == 1 && reference.size() == 1) {
        const double s = inner_L2_exact(discrete[0], reference[0]) >= 0.0 ? 1.0 : -1.0;
        const CpaFunction diff(model, s * discrete[0].values() - reference[0].values());
        out.sup_distance = detail::dense_sup(diff);
        const double c = std::abs(inner_L2_exact(discrete[0], reference[0])) /
                         std::sqrt(inner_L2_exact(discrete[0], discrete[0]) *
                                   inner_L2_exact(reference[0], reference[0]));
        out.angles.push_back(std::acos(std::min(1.0, c)));
        return out;
    }

    const Eigen::MatrixXd gd = detail::gram(discrete, discrete);
    const Eigen::MatrixXd gr = detail::gram(reference, reference);
    const Eigen::MatrixXd cross = detail::gram(discrete, reference);
    const Eigen::MatrixXd m = detail::inverse_sqrt(gd) * cross * detail::inverse_sqrt(gr);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) out.angles.push_back(std::acos(std::min(1.0, sv(i))));
    std::sort(out.angles.begin(), out.angles.end());

    const Eigen::MatrixXd coef = gd.ldlt().solve(cross);  // projection coefficients per reference
    for (std::size_t j = 0; j < reference.size(); ++j) {
        Eigen::VectorXd proj = Eigen::VectorXd::Zero(reference[j].values().size());
        for (std::size_t i = 0; i < discrete.size(); ++i)
            proj += coef(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * discrete[i].values();
        out.sup_distance = std::max(out.sup_distance,
                                    detail::dense_sup(CpaFunction(model, reference[j].values() - proj)));
    }
    return out;
}

/// Smallest schedule N after which the multiplicity never changes again
/// (the constant tail must span at least two records) and, for exact
/// references, equals the reference multiplicity.
inline std::optional<std::size_t> stabilization_scan(const ConvergenceReport& report) {
    const auto& r = report.records;
    if (r.size() < 2) throw ValidationError("stabilization scan needs at least 2 records");
    const std::size_t d = r.back().effective_multiplicity;
    std::size_t start = r.size() - 1;
    while (start > 0 && r[start - 1].effective_multiplicity == d) --start;
    if (r.size() - start < 2) return std::nullopt;
    const bool exact = report.provenance != Provenance::extrapolated;
    if (exact && report.reference_multiplicity != 0 && d != report.reference_multiplicity)
        return std::nullopt;
    return r[start].n;
}

struct ScheduleOptions {
    std::string graph_id = "graph";
    std::string measure_id = "dx";
    std::size_t jobs = 1;
    double merge_tolerance = 1e-4;
    EigenOptions eigen;
};

/// Reference spectrum for mu = dx normalized by total length T: eigenvalues
/// scale by T and eigenfunctions by sqrt(T).
inline ContinuousSpectrum normalized_dx_reference(const MetrizedGraph& g, std::size_t count) {
    auto s = reference_spectrum(g, count);
    const double t = g.total_length();
    if (std::abs(t - 1.0) > 1e-14) {
        for (auto& ev : s.eigenvalues) {
            ev.lambda *= t;
            ev.alpha = 1.0 / ev.lambda;
            for (auto& f : ev.eigenfunctions)
                for (auto& ab : f.coeffs) { ab[0] *= std::sqrt(t); ab[1] *= std::sqrt(t); }
        }
    }
    return s;
}

namespace detail {

struct PointResult {
    std::optional<ConvergenceRecord> record;
    std::string note;
};

inline PointResult run_point(const MetrizedGraph& graph, const std::optional<MeasureSpec>& measure,
                             Convention convention, std::size_t index, std::size_t n_target,
                             const ContinuousEigenvalue* ref, const ScheduleOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<GraphPoint> must;
    if (convention == Convention::voronoi && measure) must = measure->breakpoints();
    const auto model = build_model(graph, n_target, must);
    const std::size_t n = model->size();
    if (index >= n)
        return {std::nullopt, "N=" + std::to_string(n) + ": cluster " + std::to_string(index) +
                                  " not resolvable, record skipped"};
    const auto q = kirchhoff_matrix(model);
    const DiscreteMeasure mu = convention == Convention::dxN
                                   ? dx_model_measure(model)
                                   : voronoi_discretize(measure ? *measure : MeasureSpec::lebesgue(graph), model);
    const std::size_t want = std::min(index + 1, n - 1);
    const auto spec = eigen_mu(q, mu, want, opt.eigen);
    if (spec.clusters.size() < index)
        return {std::nullopt, "N=" + std::to_string(n) + ": fewer than " + std::to_string(index) +
                                  " distinct eigenvalues, record skipped"};
    const auto& c = spec.cluster(index);
    ConvergenceRecord rec;
    rec.n = n;
    rec.scaled = c.scaled;
    rec.multiplicity = c.multiplicity;
    rec.effective_multiplicity = c.multiplicity;
    std::vector<CpaFunction> discrete = c.eigenfunctions;
    if (ref && ref->multiplicity > c.multiplicity) {
        // asymptotically merging neighbours count toward the same eigenvalue
        for (std::size_t j : {index - 1, index + 1}) {
            if (j < 1 || j > spec.clusters.size()) continue;
            const auto& other = spec.cluster(j);
            if (std::abs(other.scaled - c.scaled) <= opt.merge_tolerance * c.scaled) {
                rec.effective_multiplicity += other.multiplicity;
                discrete.insert(discrete.end(), other.eigenfunctions.begin(), other.eigenfunctions.end());
                rec.note = "merged near-degenerate cluster " + std::to_string(j);
            }
        }
    }
    if (ref && !ref->eigenfunctions.empty()) {
        std::vector<CpaFunction> sampled;
        for (const auto& f : ref->eigenfunctions) sampled.push_back(CpaFunction::sample(model, f));
        const auto al = align_subspace(discrete, sampled);
        rec.sup_distance = al.sup_distance;
        rec.angles = al.angles;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(rec), {}};
}

} // namespace detail

/// Runs the schedule and assembles a report in schedule order. The reference
/// is closed-form or secular for mu = dx, otherwise extrapolated from the
/// records themselves.
inline ConvergenceReport run_schedule(const MetrizedGraph& graph,
                                      const std::optional<MeasureSpec>& measure,
                                      Convention convention, std::size_t index,
                                      const std::vector<std::size_t>& schedule,
                                      const ScheduleOptions& opt = {}) {
    if (index < 1) throw ValidationError("eigen index must be at least 1");
    if (schedule.empty()) throw ValidationError("schedule is empty");
    for (std::size_t j = 1; j < schedule.size(); ++j)
        if (schedule[j] <= schedule[j - 1]) throw ValidationError("schedule must be strictly increasing");

    ConvergenceReport rep;
    rep.graph_id = opt.graph_id;
    rep.measure_id = opt.measure_id;
    rep.convention = convention;
    rep.index = index;

    const bool dx_limit = convention == Convention::dxN || !measure;
    std::optional<ContinuousEigenvalue> ref;
    if (dx_limit) {
        const auto spec = normalized_dx_reference(graph, index);
        ref = spec.eigenvalues.at(index - 1);
        rep.provenance = spec.provenance;
        rep.reference_value = ref->lambda;
        rep.reference_multiplicity = ref->multiplicity;
        rep.notes.insert(rep.notes.end(), spec.notes.begin(), spec.notes.end());
    } else {
        rep.provenance = Provenance::extrapolated;
    }

    std::vector<detail::PointResult> results(schedule.size());
    const ContinuousEigenvalue* refp = ref ? &*ref : nullptr;
    const std::size_t jobs = std::max<std::size_t>(1, opt.jobs);
    for (std::size_t start = 0; start < schedule.size(); start += jobs) {
        std::vector<std::future<detail::PointResult>> batch;
        const std::size_t end = std::min(schedule.size(), start + jobs);
        for (std::size_t j = start; j < end; ++j) {
            batch.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                       [&, j] {
                                           return detail::run_point(graph, measure, convention, index,
                                                                    schedule[j], refp, opt);
                                       }));
        }
        for (std::size_t j = start; j < end; ++j) results[j] = batch[j - start].get();
    }
    for (auto& r : results) {
        if (r.record) rep.records.push_back(std::move(*r.record));
        else rep.notes.push_back(r.note);
    }
    if (rep.records.empty()) throw NumericalError("no schedule point resolved the requested cluster");

    if (rep.records.size() >= 3) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : rep.records) pts.emplace_back(static_cast<double>(r.n), r.scaled);
        rep.extrapolation = extrapolate_reference(pts);
        if (rep.extrapolation->low_confidence)
            rep.notes.push_back("extrapolation low-confidence: " + rep.extrapolation->note);
    }
    if (rep.provenance == Provenance::extrapolated) {
        if (rep.extrapolation) {
            rep.reference_value = rep.extrapolation->limit;
            rep.reference_uncertainty = rep.extrapolation->uncertainty;
        } else {
            rep.reference_value = rep.records.back().scaled;
            rep.notes.push_back("fewer than 3 records: reference is the last scaled value");
        }
    }
    if (rep.records.size() >= 3) {
        try {
            rep.rate = fit_rate(rep.records, rep.reference_value);
        } catch (const ValidationError& e) {
            rep.notes.push_back(std::string("rate fit skipped: ") + e.what());
        }
    }
    if (rep.records.size() >= 2) {
        rep.monotone = check_monotone(rep.records);
        rep.stabilization_n0 = stabilization_scan(rep);
    }
    return rep;
}

} // namespace metrograph
