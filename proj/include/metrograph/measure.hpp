#pragma once

#include "metrograph/error.hpp"
#include "metrograph/graph.hpp"
#include "metrograph/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace metrograph {

inline constexpr double kMassTolerance = 1e-10;
inline constexpr std::size_t kMaxDensityDegree = 6;

namespace poly {

/// Coefficients low to high degree.
inline double eval(const std::vector<double>& c, double t) {
    double r = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * t + *it;
    return r;
}

inline double integral(const std::vector<double>& c, double a, double b) {
    double r = 0.0;
    for (std::size_t d = 0; d < c.size(); ++d) {
        const double p = static_cast<double>(d + 1);
        r += c[d] * (std::pow(b, p) - std::pow(a, p)) / p;
    }
    return r;
}

/// Real roots strictly inside (a, b), sorted.
inline std::vector<double> roots_in(std::vector<double> c, double a, double b) {
    while (!c.empty() && c.back() == 0.0) c.pop_back();
    std::vector<double> out;
    if (c.size() < 2) return out;
    const Eigen::Index deg = static_cast<Eigen::Index>(c.size()) - 1;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    for (Eigen::Index i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < deg; ++i)
        companion(i, deg - 1) = -c[static_cast<std::size_t>(i)] / c.back();
    const Eigen::VectorXcd ev = companion.eigenvalues();
    const double scale = std::max(1.0, std::max(std::abs(a), std::abs(b)));
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (std::abs(ev(i).imag()) > 1e-9 * scale) continue;
        const double r = ev(i).real();
        if (r > a && r < b) out.push_back(r);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline double abs_integral(const std::vector<double>& c, double a, double b) {
    auto cuts = roots_in(c, a, b);
    cuts.insert(cuts.begin(), a);
    cuts.push_back(b);
    double r = 0.0;
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j) r += std::abs(integral(c, cuts[j], cuts[j + 1]));
    return r;
}

} // namespace poly

/// Polynomial density on [from, to] in segment-local arclength.
struct DensityPiece {
    double from = 0.0;
    double to = 0.0;
    std::vector<double> coeffs;
};

/// Point mass at a branch vertex.
struct Atom {
    std::size_t vertex = 0;
    double mass = 0.0;
};

/// Signed measure  omega dx + sum_j c_j delta_{p_j}  of total mass 1, with a
/// piecewise polynomial density and atoms at branch vertices.
class MeasureSpec {
public:
    MeasureSpec(const MetrizedGraph& graph, std::vector<std::vector<DensityPiece>> density,
                std::vector<Atom> atoms)
        : segment_lengths_(graph.segment_count()), vertex_count_(graph.vertex_count()),
          density_(std::move(density)), atoms_(std::move(atoms)) {
        for (std::size_t e = 0; e < graph.segment_count(); ++e)
            segment_lengths_[e] = graph.segment(e).length;
        density_.resize(graph.segment_count());
        validate();
    }

    /// Normalized Lebesgue measure dx / total_length.
    static MeasureSpec lebesgue(const MetrizedGraph& graph) {
        const double w = 1.0 / graph.total_length();
        std::vector<std::vector<DensityPiece>> d(graph.segment_count());
        for (std::size_t e = 0; e < graph.segment_count(); ++e)
            d[e].push_back({0.0, graph.segment(e).length, {w}});
        return MeasureSpec(graph, std::move(d), {});
    }

    [[nodiscard]] const std::vector<std::vector<DensityPiece>>& density() const noexcept {
        return density_;
    }
    [[nodiscard]] const std::vector<Atom>& atoms() const noexcept { return atoms_; }

    /// Integral of omega over [a, b] on segment e.
    [[nodiscard]] double density_integral(std::size_t e, double a, double b) const {
        double r = 0.0;
        for (const auto& p : density_.at(e)) {
            const double lo = std::max(a, p.from);
            const double hi = std::min(b, p.to);
            if (hi > lo) r += poly::integral(p.coeffs, lo, hi);
        }
        return r;
    }

    [[nodiscard]] double density_value(std::size_t e, double t) const {
        for (const auto& p : density_.at(e))
            if (t >= p.from && t <= p.to) return poly::eval(p.coeffs, t);
        return 0.0;
    }

    [[nodiscard]] double total_mass() const {
        double m = 0.0;
        for (std::size_t e = 0; e < density_.size(); ++e)
            m += density_integral(e, 0.0, segment_lengths_[e]);
        for (const auto& a : atoms_) m += a.mass;
        return m;
    }

    /// Integral of |omega| plus the sum of |c_j|.
    [[nodiscard]] double total_variation() const {
        double m = 0.0;
        for (const auto& pieces : density_)
            for (const auto& p : pieces) m += poly::abs_integral(p.coeffs, p.from, p.to);
        for (const auto& a : atoms_) m += std::abs(a.mass);
        return m;
    }

    /// Interior density breakpoints; models must contain them.
    [[nodiscard]] std::vector<GraphPoint> breakpoints() const {
        std::vector<GraphPoint> out;
        for (std::size_t e = 0; e < density_.size(); ++e) {
            std::vector<double> ts;
            for (const auto& p : density_[e]) {
                for (double t : {p.from, p.to})
                    if (t > 0.0 && t < segment_lengths_[e]) ts.push_back(t);
            }
            std::sort(ts.begin(), ts.end());
            // adjacent pieces share a boundary
            const double eps = 1e-14 * segment_lengths_[e];
            ts.erase(std::unique(ts.begin(), ts.end(), [eps](double a, double b) { return b - a <= eps; }),
                     ts.end());
            for (double t : ts) out.push_back({e, t});
        }
        return out;
    }

    [[nodiscard]] bool compatible_with(const MetrizedGraph& g) const {
        if (g.segment_count() != segment_lengths_.size() || g.vertex_count() != vertex_count_)
            return false;
        for (std::size_t e = 0; e < segment_lengths_.size(); ++e)
            if (std::abs(g.segment(e).length - segment_lengths_[e]) > 1e-12 * segment_lengths_[e])
                return false;
        return true;
    }

private:
    void validate() {
        for (std::size_t e = 0; e < density_.size(); ++e) {
            auto& pieces = density_[e];
            std::sort(pieces.begin(), pieces.end(),
                      [](const auto& x, const auto& y) { return x.from < y.from; });
            const std::string where = "measure.density[segment " + std::to_string(e) + "]";
            for (std::size_t j = 0; j < pieces.size(); ++j) {
                const auto& p = pieces[j];
                if (!(p.from >= 0.0 && p.to <= segment_lengths_[e] * (1.0 + 1e-12) && p.from < p.to))
                    throw ValidationError(where + ": piece outside segment or empty");
                if (p.coeffs.size() > kMaxDensityDegree + 1)
                    throw ValidationError(where + ": density degree exceeds 6");
                if (j > 0 && p.from < pieces[j - 1].to)
                    throw ValidationError(where + ": overlapping pieces");
            }
        }
        for (std::size_t j = 0; j < atoms_.size(); ++j) {
            if (atoms_[j].vertex >= vertex_count_)
                throw ValidationError("measure.atoms[" + std::to_string(j) +
                                      "]: not a branch vertex");
        }
        const double m = total_mass();
        if (std::abs(m - 1.0) > kMassTolerance)
            throw ValidationError("measure total mass is " + std::to_string(m) + ", expected 1");
    }

    std::vector<double> segment_lengths_;
    std::size_t vertex_count_;
    std::vector<std::vector<DensityPiece>> density_;
    std::vector<Atom> atoms_;
};

/// Signed measure supported on the vertices of a model.
class DiscreteMeasure {
public:
    DiscreteMeasure(ModelPtr model, Eigen::VectorXd mass)
        : model_(std::move(model)), mass_(std::move(mass)) {
        if (!model_) throw ValidationError("discrete measure without a model");
        if (static_cast<std::size_t>(mass_.size()) != model_->size())
            throw ValidationError("discrete measure size does not match model");
    }

    [[nodiscard]] const ModelPtr& model() const noexcept { return model_; }
    [[nodiscard]] const Eigen::VectorXd& mass() const noexcept { return mass_; }
    [[nodiscard]] double operator[](std::size_t i) const { return mass_(static_cast<Eigen::Index>(i)); }
    [[nodiscard]] double total_mass() const { return mass_.sum(); }
    [[nodiscard]] double total_variation() const { return mass_.cwiseAbs().sum(); }
    [[nodiscard]] bool is_probability_mass() const {
        return std::abs(total_mass() - 1.0) <= kMassTolerance;
    }

private:
    ModelPtr model_;
    Eigen::VectorXd mass_;
};

/// dx_N: mass 1/N at each model vertex.
inline DiscreteMeasure dx_model_measure(const ModelPtr& model) {
    const auto n = static_cast<Eigen::Index>(model->size());
    return DiscreteMeasure(model, Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

/// mu_N(p) = mu(A_p), A_p the Voronoi cell of p. Each model edge splits its
/// density integral at the midpoint; atoms go to their vertex.
inline DiscreteMeasure voronoi_discretize(const MeasureSpec& measure, const ModelPtr& model) {
    const auto& g = model->graph();
    if (!measure.compatible_with(g))
        throw ValidationError("measure was declared on a different graph than the model's");
    Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model->size()));
    for (const auto& ed : model->edges()) {
        const double mid = 0.5 * (ed.t0 + ed.t1);
        m(static_cast<Eigen::Index>(ed.a)) += measure.density_integral(ed.segment, ed.t0, mid);
        m(static_cast<Eigen::Index>(ed.b)) += measure.density_integral(ed.segment, mid, ed.t1);
    }
    for (const auto& a : measure.atoms()) {
        // branch vertices keep their graph index inside every model
        if (a.vertex >= g.vertex_count())
            throw ValidationError("measure atom is not at a model vertex");
        m(static_cast<Eigen::Index>(a.vertex)) += a.mass;
    }
    return DiscreteMeasure(model, std::move(m));
}

} // namespace metrograph
