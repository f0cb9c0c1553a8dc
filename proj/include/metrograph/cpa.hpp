#pragma once

#include "metrograph/error.hpp"
#include "metrograph/measure.hpp"
#include "metrograph/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

namespace metrograph {

/// Continuous piecewise affine function determined by its values on the
/// vertices of a model (an element of Funct(V)).
class CpaFunction {
public:
    CpaFunction(ModelPtr model, Eigen::VectorXd values)
        : model_(std::move(model)), values_(std::move(values)) {
        if (!model_) throw ValidationError("CPA function without a model");
        if (static_cast<std::size_t>(values_.size()) != model_->size())
            throw ValidationError("CPA value count does not match model size");
    }

    static CpaFunction constant(const ModelPtr& model, double c) {
        return {model, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(model->size()), c)};
    }

    /// Restriction to model vertices of a function given on graph points.
    template <typename F>
    static CpaFunction sample(const ModelPtr& model, F&& f) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(model->size()));
        for (std::size_t i = 0; i < model->size(); ++i)
            v(static_cast<Eigen::Index>(i)) = f(model->vertices()[i].point);
        return {model, std::move(v)};
    }

    [[nodiscard]] const ModelPtr& model() const noexcept { return model_; }
    [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }
    [[nodiscard]] Eigen::VectorXd& values() noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return model_->size(); }
    [[nodiscard]] double operator[](std::size_t i) const {
        return values_(static_cast<Eigen::Index>(i));
    }

private:
    ModelPtr model_;
    Eigen::VectorXd values_;
};

inline void require_same_model(const ModelPtr& a, const ModelPtr& b) {
    if (a.get() != b.get()) throw ValidationError("operands live on different models");
}

/// Affine interpolation between the model vertices bracketing x.
inline double cpa_eval(const CpaFunction& f, const GraphPoint& x) {
    const auto& model = *f.model();
    if (x.segment >= model.graph().segment_count())
        throw ValidationError("graph point on unknown segment");
    const auto& c = model.chain(x.segment);
    if (const auto v = model.vertex_at(x)) return f[*v];
    auto it = std::upper_bound(c.offsets.begin(), c.offsets.end(), x.offset);
    std::size_t j = static_cast<std::size_t>(it - c.offsets.begin());
    j = std::clamp<std::size_t>(j, 1, c.offsets.size() - 1);
    const double t0 = c.offsets[j - 1];
    const double t1 = c.offsets[j];
    const double s = (x.offset - t0) / (t1 - t0);
    return (1.0 - s) * f[c.vertices[j - 1]] + s * f[c.vertices[j]];
}

/// Sum over vertices of f(q) g(q) nu(q).
inline double inner_l2(const CpaFunction& f, const CpaFunction& g, const DiscreteMeasure& nu) {
    require_same_model(f.model(), g.model());
    require_same_model(f.model(), nu.model());
    return (f.values().array() * g.values().array() * nu.mass().array()).sum();
}

/// l2 product against dx_N.
inline double inner_l2(const CpaFunction& f, const CpaFunction& g) {
    require_same_model(f.model(), g.model());
    return f.values().dot(g.values()) / static_cast<double>(f.size());
}

inline double norm_l2(const CpaFunction& f) { return std::sqrt(inner_l2(f, f)); }

/// Integral of f against a discrete measure.
inline double integrate(const CpaFunction& f, const DiscreteMeasure& nu) {
    require_same_model(f.model(), nu.model());
    return f.values().dot(nu.mass());
}

/// Exact integral of f g dx; the integrand is quadratic on each edge.
inline double inner_L2_exact(const CpaFunction& f, const CpaFunction& g) {
    require_same_model(f.model(), g.model());
    double r = 0.0;
    for (const auto& ed : f.model()->edges()) {
        const double fa = f[ed.a], fb = f[ed.b], ga = g[ed.a], gb = g[ed.b];
        r += ed.length / 6.0 * (2.0 * fa * ga + fa * gb + fb * ga + 2.0 * fb * gb);
    }
    return r;
}

/// Exact integral of f dx.
inline double integrate_dx(const CpaFunction& f) {
    double r = 0.0;
    for (const auto& ed : f.model()->edges()) r += 0.5 * ed.length * (f[ed.a] + f[ed.b]);
    return r;
}

} // namespace metrograph
