#pragma once

#include "metrograph/error.hpp"
#include "metrograph/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace metrograph {

enum class Provenance { closed_form, secular, extrapolated };

inline const char* to_string(Provenance p) {
    switch (p) {
    case Provenance::closed_form: return "closed-form";
    case Provenance::secular: return "secular";
    case Provenance::extrapolated: return "extrapolated";
    }
    return "unknown";
}

/// Eigenfunction of the continuous Laplacian (mu = dx): on segment e,
/// f(t) = a_e cos(k t) + b_e sin(k t).
struct TrigEigenfunction {
    double k = 0.0;
    std::vector<std::array<double, 2>> coeffs;

    [[nodiscard]] double operator()(const GraphPoint& x) const {
        const auto& c = coeffs.at(x.segment);
        return c[0] * std::cos(k * x.offset) + c[1] * std::sin(k * x.offset);
    }

    [[nodiscard]] double derivative(const GraphPoint& x) const {
        const auto& c = coeffs.at(x.segment);
        return k * (-c[0] * std::sin(k * x.offset) + c[1] * std::cos(k * x.offset));
    }
};

namespace trig {

/// Closed-form integral over [0, L] of (a1 cos + b1 sin)(a2 cos + b2 sin) at frequency k.
inline double product_integral(const std::array<double, 2>& f, const std::array<double, 2>& g,
                               double k, double len) {
    const double s2 = std::sin(2.0 * k * len) / (4.0 * k);
    const double cc = 0.5 * len + s2;
    const double ss = 0.5 * len - s2;
    const double sk = std::sin(k * len);
    const double cs = sk * sk / (2.0 * k);
    return f[0] * g[0] * cc + (f[0] * g[1] + f[1] * g[0]) * cs + f[1] * g[1] * ss;
}

inline double integral(const std::array<double, 2>& f, double k, double len) {
    return f[0] * std::sin(k * len) / k + f[1] * (1.0 - std::cos(k * len)) / k;
}

} // namespace trig

inline double inner_L2(const MetrizedGraph& g, const TrigEigenfunction& f, const TrigEigenfunction& h) {
    if (std::abs(f.k - h.k) > 1e-12 * std::max(1.0, f.k))
        throw ValidationError("closed-form L2 product needs equal frequencies");
    double r = 0.0;
    for (std::size_t e = 0; e < g.segment_count(); ++e)
        r += trig::product_integral(f.coeffs[e], h.coeffs[e], f.k, g.segment(e).length);
    return r;
}

inline double integrate_dx(const MetrizedGraph& g, const TrigEigenfunction& f) {
    double r = 0.0;
    for (std::size_t e = 0; e < g.segment_count(); ++e)
        r += trig::integral(f.coeffs[e], f.k, g.segment(e).length);
    return r;
}

/// Continuity mismatch and Kirchhoff (sum of outgoing derivatives) residual,
/// maximized over vertices.
struct VertexResidual {
    double continuity = 0.0;
    double kirchhoff = 0.0;
};

inline VertexResidual vertex_residuals(const MetrizedGraph& g, const TrigEigenfunction& f) {
    VertexResidual r;
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        std::optional<double> first;
        double flux = 0.0;
        for (std::size_t e = 0; e < g.segment_count(); ++e) {
            const auto& s = g.segment(e);
            for (int side = 0; side < 2; ++side) {
                if ((side == 0 ? s.u : s.v) != v) continue;
                const GraphPoint p{e, side == 0 ? 0.0 : s.length};
                const double val = f(p);
                if (!first) first = val;
                r.continuity = std::max(r.continuity, std::abs(val - *first));
                flux += side == 0 ? f.derivative(p) : -f.derivative(p);
            }
        }
        r.kirchhoff = std::max(r.kirchhoff, std::abs(flux) / std::max(1.0, f.k));
    }
    return r;
}

struct ContinuousEigenvalue {
    double lambda = 0.0;
    double alpha = 0.0;  ///< eigenvalue 1/lambda of the continuous integral operator
    std::size_t multiplicity = 0;
    std::vector<TrigEigenfunction> eigenfunctions;  ///< L2-orthonormal
};

struct ContinuousSpectrum {
    Provenance provenance = Provenance::closed_form;
    std::vector<ContinuousEigenvalue> eigenvalues;
    std::optional<double> uncertainty;  ///< set for extrapolated entries
    std::vector<std::string> notes;
};

/// Unit interval: lambda_n = n^2 pi^2, simple, eigenfunction sqrt(2) cos(n pi x).
inline ContinuousSpectrum interval_spectrum(std::size_t count) {
    ContinuousSpectrum s;
    for (std::size_t n = 1; n <= count; ++n) {
        const double k = static_cast<double>(n) * std::numbers::pi;
        s.eigenvalues.push_back({k * k, 1.0 / (k * k), 1, {{k, {{std::numbers::sqrt2, 0.0}}}}});
    }
    return s;
}

/// Unit circle: lambda_n = 4 pi^2 n^2, double, with sqrt(2) cos and sqrt(2) sin.
inline ContinuousSpectrum circle_spectrum(std::size_t count) {
    ContinuousSpectrum s;
    for (std::size_t n = 1; n <= count; ++n) {
        const double k = 2.0 * std::numbers::pi * static_cast<double>(n);
        s.eigenvalues.push_back({k * k, 1.0 / (k * k), 2,
                                 {{k, {{std::numbers::sqrt2, 0.0}}}, {k, {{0.0, std::numbers::sqrt2}}}}});
    }
    return s;
}

struct SecularOptions {
    double grid_factor = 0.01;       ///< scan step = grid_factor * pi / longest segment
    double root_tolerance = 1e-8;    ///< sigma_min accepted as a root
    double null_tolerance = 1e-6;    ///< singular values counted toward multiplicity
    int max_refinements = 3;
};

namespace detail {

struct VertexEnd {
    std::size_t segment;
    int side;  // 0: t = 0, 1: t = L
};

/// Secular matrix of the trig ansatz: continuity and Kirchhoff rows at every
/// vertex, unknowns (a_e, b_e). Square of size 2E.
inline Eigen::MatrixXd secular_matrix(const MetrizedGraph& g, double k) {
    const auto ne = static_cast<Eigen::Index>(g.segment_count());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * ne, 2 * ne);
    Eigen::Index row = 0;
    auto value_row = [&](const VertexEnd& end, Eigen::Index r, double sign) {
        const auto e = static_cast<Eigen::Index>(end.segment);
        const double len = g.segment(end.segment).length;
        if (end.side == 0) {
            m(r, 2 * e) += sign;
        } else {
            m(r, 2 * e) += sign * std::cos(k * len);
            m(r, 2 * e + 1) += sign * std::sin(k * len);
        }
    };
    for (std::size_t v = 0; v < g.vertex_count(); ++v) {
        std::vector<VertexEnd> ends;
        for (std::size_t e = 0; e < g.segment_count(); ++e) {
            if (g.segment(e).u == v) ends.push_back({e, 0});
            if (g.segment(e).v == v) ends.push_back({e, 1});
        }
        for (std::size_t j = 1; j < ends.size(); ++j) {
            value_row(ends[j], row, 1.0);
            value_row(ends[0], row, -1.0);
            ++row;
        }
        // outgoing derivatives divided by k
        for (const auto& end : ends) {
            const auto e = static_cast<Eigen::Index>(end.segment);
            const double len = g.segment(end.segment).length;
            if (end.side == 0) {
                m(row, 2 * e + 1) += 1.0;
            } else {
                m(row, 2 * e) += std::sin(k * len);
                m(row, 2 * e + 1) -= std::cos(k * len);
            }
        }
        ++row;
    }
    return m;
}

inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
}

/// Absolute smallest singular value. The entries are bounded trig terms, so no
/// k-dependent normalization is needed; a relative measure would miss roots
/// where the whole matrix vanishes (the circle).
inline double sigma_min(const MetrizedGraph& g, double k) {
    const auto sv = singular_values(secular_matrix(g, k));
    return sv(sv.size() - 1);
}

/// Golden-section minimization of sigma_min on [lo, hi].
inline double golden_refine(const MetrizedGraph& g, double lo, double hi) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = sigma_min(g, x1), f2 = sigma_min(g, x2);
    for (int it = 0; it < 200 && (hi - lo) > 4e-16 * hi; ++it) {
        if (f1 <= f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - phi * (hi - lo); f1 = sigma_min(g, x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + phi * (hi - lo); f2 = sigma_min(g, x2);
        }
    }
    return f1 <= f2 ? x1 : x2;
}

inline void scan_window(const MetrizedGraph& g, double lo, double hi, double step,
                        const SecularOptions& opt, int depth, std::vector<double>& roots,
                        std::vector<std::string>& notes) {
    std::vector<double> ks, s;
    for (double k = lo; k <= hi + 0.5 * step; k += step) {
        ks.push_back(k);
        s.push_back(sigma_min(g, k));
    }
    for (std::size_t i = 1; i + 1 < ks.size(); ++i) {
        if (!(s[i] <= s[i - 1] && s[i] <= s[i + 1])) continue;
        if (s[i] == s[i - 1] && i > 1) continue;  // plateau already handled
        const double k = golden_refine(g, ks[i - 1], ks[i + 1]);
        const double val = sigma_min(g, k);
        if (val <= opt.root_tolerance) {
            if (roots.empty() || std::abs(k - roots.back()) > 1e-9 * k) roots.push_back(k);
        } else if (val < 1e-3 && depth < opt.max_refinements) {
            // shallow dip: two roots may share a grid cell
            notes.push_back("grid refined near k=" + std::to_string(k));
            scan_window(g, ks[i - 1], ks[i + 1], step / 50.0, opt, depth + 1, roots, notes);
        }
    }
}

/// L2-orthonormalize eigenfunctions sharing one frequency.
inline void orthonormalize(const MetrizedGraph& g, std::vector<TrigEigenfunction>& fs) {
    const auto d = static_cast<Eigen::Index>(fs.size());
    Eigen::MatrixXd gram(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            gram(i, j) = inner_L2(g, fs[static_cast<std::size_t>(i)], fs[static_cast<std::size_t>(j)]);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("eigenfunction Gram matrix is singular");
    const Eigen::MatrixXd rinv =
        llt.matrixU().solve(Eigen::MatrixXd::Identity(d, d));  // C R^{-1}
    std::vector<TrigEigenfunction> out;
    for (Eigen::Index j = 0; j < d; ++j) {
        TrigEigenfunction f{fs[0].k, std::vector<std::array<double, 2>>(g.segment_count(), {0.0, 0.0})};
        for (Eigen::Index i = 0; i <= j; ++i)
            for (std::size_t e = 0; e < g.segment_count(); ++e)
                for (int c = 0; c < 2; ++c)
                    f.coeffs[e][static_cast<std::size_t>(c)] +=
                        rinv(i, j) * fs[static_cast<std::size_t>(i)].coeffs[e][static_cast<std::size_t>(c)];
        double big = 0.0;
        for (const auto& ab : f.coeffs)
            for (double c : ab)
                if (std::abs(c) > std::abs(big) * (1.0 + 1e-9)) big = c;
        if (big < 0.0)
            for (auto& ab : f.coeffs) { ab[0] = -ab[0]; ab[1] = -ab[1]; }
        out.push_back(std::move(f));
    }
    fs = std::move(out);
}

} // namespace detail

/// Eigenvalues of the continuous Laplacian (mu = dx) below lambda_max, at
/// most `count` distinct ones, located as minima of the smallest singular
/// value of the secular matrix over k = sqrt(lambda).
inline ContinuousSpectrum secular_spectrum(const MetrizedGraph& g, double lambda_max,
                                           std::size_t count = std::numeric_limits<std::size_t>::max(),
                                           const SecularOptions& opt = {}) {
    if (!(lambda_max > 0.0) || !std::isfinite(lambda_max))
        throw ValidationError("lambda_max must be positive and finite");
    const double step = opt.grid_factor * std::numbers::pi / g.max_segment_length();
    const double kmax = std::sqrt(lambda_max);
    ContinuousSpectrum s;
    s.provenance = Provenance::secular;
    std::vector<double> roots;
    detail::scan_window(g, step, kmax + step, step, opt, 0, roots, s.notes);
    std::sort(roots.begin(), roots.end());
    for (double k : roots) {
        if (k * k > lambda_max || s.eigenvalues.size() >= count) break;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(detail::secular_matrix(g, k), Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const Eigen::Index n = sv.size();
        Eigen::Index mult = 0;
        while (mult < n && sv(n - 1 - mult) <= opt.null_tolerance) ++mult;
        ContinuousEigenvalue ev{k * k, 1.0 / (k * k), static_cast<std::size_t>(mult), {}};
        for (Eigen::Index j = 0; j < mult; ++j) {
            const Eigen::VectorXd v = svd.matrixV().col(n - 1 - j);
            TrigEigenfunction f{k, {}};
            for (std::size_t e = 0; e < g.segment_count(); ++e)
                f.coeffs.push_back({v(2 * static_cast<Eigen::Index>(e)), v(2 * static_cast<Eigen::Index>(e) + 1)});
            ev.eigenfunctions.push_back(std::move(f));
        }
        detail::orthonormalize(g, ev.eigenfunctions);
        s.eigenvalues.push_back(std::move(ev));
    }
    if (s.eigenvalues.empty())
        throw NumericalError("no secular roots below lambda_max = " + std::to_string(lambda_max));
    return s;
}

/// First `count` distinct eigenvalues, widening lambda_max as needed.
inline ContinuousSpectrum secular_spectrum_first(const MetrizedGraph& g, std::size_t count,
                                                 const SecularOptions& opt = {}) {
    const double t = g.total_length();
    double lambda_max = std::pow(std::numbers::pi * static_cast<double>(count + 1) / t, 2);
    for (int attempt = 0; attempt < 12; ++attempt, lambda_max *= 4.0) {
        try {
            auto s = secular_spectrum(g, lambda_max, count, opt);
            if (s.eigenvalues.size() >= count) return s;
        } catch (const NumericalError&) {
        }
    }
    throw NumericalError("secular solver could not resolve " + std::to_string(count) + " eigenvalues");
}

/// Closed form when the shape allows it, otherwise the secular solver.
inline ContinuousSpectrum reference_spectrum(const MetrizedGraph& g, std::size_t count) {
    switch (classify(g)) {
    case Shape::interval: return interval_spectrum(count);
    case Shape::circle: return circle_spectrum(count);
    case Shape::general: break;
    }
    return secular_spectrum_first(g, count);
}

struct Extrapolation {
    double limit = 0.0;
    double uncertainty = 0.0;
    double exponent = 0.0;     ///< p in L - c N^{-p}
    double coefficient = 0.0;  ///< c
    bool low_confidence = false;
    std::string note;
};

/// Fits value = L - c N^{-p} with p in [0.5, 3] by weighted least squares
/// (weights N^2), linear in (L, c) for fixed p and minimized over p.
inline Extrapolation extrapolate_reference(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw ValidationError("extrapolation needs at least 3 points");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i].first > points[i - 1].first))
            throw ValidationError("extrapolation points must have increasing N");
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::VectorXd y(n), w(n), nn(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        nn(i) = points[static_cast<std::size_t>(i)].first;
        y(i) = points[static_cast<std::size_t>(i)].second;
        w(i) = nn(i) * nn(i);
    }
    w /= w.maxCoeff();
    struct Fit { double rss; double l; double c; Eigen::Matrix2d normal; };
    auto fit = [&](double p) {
        Eigen::MatrixXd a(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            a(i, 0) = w(i);
            a(i, 1) = -w(i) * std::pow(nn(i), -p);
        }
        const Eigen::VectorXd wy = w.cwiseProduct(y);
        const Eigen::Vector2d sol = a.colPivHouseholderQr().solve(wy);
        return Fit{(wy - a * sol).squaredNorm(), sol(0), sol(1), a.transpose() * a};
    };

    Extrapolation out;
    const double spread = y.maxCoeff() - y.minCoeff();
    if (spread <= 1e-14 * std::max(1.0, y.cwiseAbs().maxCoeff())) {
        out.limit = y.mean();
        out.exponent = std::numeric_limits<double>::quiet_NaN();
        out.low_confidence = true;
        out.note = "constant sequence: exponent unidentifiable";
        return out;
    }
    // coarse grid then golden refinement on p
    double best_p = 0.5, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 250; ++i) {
        const double p = 0.5 + 2.5 * i / 250.0;
        const double r = fit(p).rss;
        if (r < best) { best = r; best_p = p; }
    }
    double lo = std::max(0.5, best_p - 0.01), hi = std::min(3.0, best_p + 0.01);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = fit(x1).rss, f2 = fit(x2).rss;
    for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
        if (f1 <= f2) { hi = x2; x2 = x1; f2 = f1; x1 = hi - gr * (hi - lo); f1 = fit(x1).rss; }
        else { lo = x1; x1 = x2; f1 = f2; x2 = lo + gr * (hi - lo); f2 = fit(x2).rss; }
    }
    const double p = f1 <= f2 ? x1 : x2;
    const Fit f = fit(p);
    out.limit = f.l;
    out.exponent = p;
    out.coefficient = f.c;
    const double dof = std::max<double>(1.0, static_cast<double>(n) - 3.0);
    const double sigma2 = f.rss / dof;
    const Eigen::Matrix2d cov = sigma2 * f.normal.inverse();
    out.uncertainty = std::sqrt(std::max(0.0, cov(0, 0)));

    bool monotone = true;
    for (Eigen::Index i = 1; i < n; ++i)
        if ((y(i) - y(i - 1)) * (y(n - 1) - y(0)) < 0.0) monotone = false;
    if (!monotone) {
        out.low_confidence = true;
        out.note = "sequence is not monotone";
    } else if (p <= 0.5 + 1e-6 || p >= 3.0 - 1e-6) {
        out.low_confidence = true;
        out.note = "exponent at the edge of [0.5, 3]";
    } else if (std::sqrt(f.rss / static_cast<double>(n)) > 1e-3 * spread) {
        out.low_confidence = true;
        out.note = "fit residuals exceed tolerance";
    }
    return out;
}

} // namespace metrograph
