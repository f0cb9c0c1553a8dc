#pragma once

#include "metrograph/error.hpp"
#include "metrograph/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace metrograph {

struct ModelVertex {
    std::optional<std::size_t> branch;  ///< set for branch vertices of the graph
    GraphPoint point;                   ///< location; for branch vertices any incident end
    std::string id;
};

/// Edge of the weighted combinatorial graph G(V): a sub-segment [t0, t1] of
/// one graph segment, weight = 1 / length.
struct ModelEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t segment = 0;
    double t0 = 0.0;
    double t1 = 0.0;
    double length = 0.0;
    double weight = 0.0;
};

/// Model vertices along one segment, in increasing offset, endpoints included.
struct SegmentChain {
    std::vector<double> offsets;
    std::vector<std::size_t> vertices;
};

class Model;
using ModelPtr = std::shared_ptr<const Model>;

/// Vertex set V containing all branch vertices, with the induced weighted
/// graph. Branch vertices come first, then interior points segment by segment.
class Model {
public:
    Model(MetrizedGraph graph, std::vector<std::vector<double>> interior_offsets)
        : graph_(std::move(graph)) {
        const std::size_t nb = graph_.vertex_count();
        for (std::size_t v = 0; v < nb; ++v) {
            GraphPoint p{};
            for (std::size_t e = 0; e < graph_.segment_count(); ++e) {
                const auto& s = graph_.segment(e);
                if (s.u == v) { p = {e, 0.0}; break; }
                if (s.v == v) { p = {e, s.length}; break; }
            }
            vertices_.push_back({v, p, graph_.labels()[v]});
        }
        if (interior_offsets.size() != graph_.segment_count())
            throw ValidationError("interior offsets must be given for every segment");
        chains_.resize(graph_.segment_count());
        for (std::size_t e = 0; e < graph_.segment_count(); ++e) {
            const auto& s = graph_.segment(e);
            auto& pts = interior_offsets[e];
            std::sort(pts.begin(), pts.end());
            auto& chain = chains_[e];
            chain.offsets.push_back(0.0);
            chain.vertices.push_back(s.u);
            std::size_t k = 0;
            for (double t : pts) {
                if (!(t > 0.0 && t < s.length))
                    throw ValidationError("interior point outside segment " + std::to_string(e));
                if (t - chain.offsets.back() <= 1e-14 * s.length)
                    throw ValidationError("coincident model vertices on segment " +
                                          std::to_string(e));
                vertices_.push_back({std::nullopt, {e, t},
                                     "e" + std::to_string(e) + "#" + std::to_string(++k)});
                chain.offsets.push_back(t);
                chain.vertices.push_back(vertices_.size() - 1);
            }
            if (s.length - chain.offsets.back() <= 1e-14 * s.length)
                throw ValidationError("coincident model vertices on segment " + std::to_string(e));
            chain.offsets.push_back(s.length);
            chain.vertices.push_back(s.v);
            for (std::size_t j = 0; j + 1 < chain.offsets.size(); ++j) {
                const double t0 = chain.offsets[j];
                const double t1 = chain.offsets[j + 1];
                const double len = t1 - t0;
                edges_.push_back({chain.vertices[j], chain.vertices[j + 1], e, t0, t1, len, 1.0 / len});
            }
        }
        check_simple();
    }

    [[nodiscard]] const MetrizedGraph& graph() const noexcept { return graph_; }
    [[nodiscard]] std::size_t size() const noexcept { return vertices_.size(); }
    [[nodiscard]] const std::vector<ModelVertex>& vertices() const noexcept { return vertices_; }
    [[nodiscard]] const std::vector<ModelEdge>& edges() const noexcept { return edges_; }
    [[nodiscard]] const SegmentChain& chain(std::size_t e) const { return chains_.at(e); }

    [[nodiscard]] double mesh() const noexcept {
        double m = 0.0;
        for (const auto& ed : edges_) m = std::max(m, ed.length);
        return m;
    }

    /// Model vertex at a graph point, if there is one.
    [[nodiscard]] std::optional<std::size_t> vertex_at(const GraphPoint& p) const {
        if (const auto b = graph_.vertex_at(p)) return *b;
        const auto& c = chains_.at(p.segment);
        const double eps = 1e-14 * graph_.segment(p.segment).length;
        const auto it = std::lower_bound(c.offsets.begin(), c.offsets.end(), p.offset - eps);
        if (it != c.offsets.end() && std::abs(*it - p.offset) <= eps)
            return c.vertices[static_cast<std::size_t>(it - c.offsets.begin())];
        return std::nullopt;
    }

private:
    void check_simple() const {
        std::vector<std::pair<std::size_t, std::size_t>> seen;
        seen.reserve(edges_.size());
        for (const auto& ed : edges_) {
            if (ed.a == ed.b) throw ValidationError("model has a loop edge");
            seen.emplace_back(std::min(ed.a, ed.b), std::max(ed.a, ed.b));
        }
        std::sort(seen.begin(), seen.end());
        if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
            throw ValidationError("model has multiple edges between one vertex pair");
    }

    MetrizedGraph graph_;
    std::vector<ModelVertex> vertices_;
    std::vector<ModelEdge> edges_;
    std::vector<SegmentChain> chains_;
};

namespace detail {

/// Largest-remainder apportionment of `total` units by `weights`; ties go
/// to the lower index.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
    std::vector<std::size_t> out(weights.size(), 0);
    if (weights.empty() || total == 0) return out;
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double q = static_cast<double>(total) * weights[i] / wsum;
        const double fl = std::floor(q);
        out[i] = static_cast<std::size_t>(fl);
        used += out[i];
        rem.emplace_back(q - fl, i);
    }
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t j = 0; used < total && j < rem.size(); ++j, ++used) ++out[rem[j].second];
    return out;
}

} // namespace detail

/// Equal-subdivision model targeting `n_target` vertices. Interior points are
/// apportioned to segments by length; loops get at least 2 and parallel
/// segments at least 1 interior point so G(V) is simple. Points in
/// `must_include` become vertices and the neighbouring subdivision is spread
/// over the pieces they cut.
inline ModelPtr build_model(const MetrizedGraph& graph, std::size_t n_target,
                            const std::vector<GraphPoint>& must_include = {}) {
    const std::size_t nb = graph.vertex_count();
    const std::size_t ne = graph.segment_count();
    if (n_target < nb)
        throw ValidationError("n_target " + std::to_string(n_target) +
                              " is below the number of branch vertices " + std::to_string(nb));

    std::vector<std::vector<double>> forced(ne);
    for (const auto& p : must_include) {
        if (p.segment >= ne) throw ValidationError("must_include point on unknown segment");
        const double len = graph.segment(p.segment).length;
        if (p.offset < 0.0 || p.offset > len)
            throw ValidationError("must_include offset outside its segment");
        if (graph.vertex_at(p)) continue;
        auto& f = forced[p.segment];
        const bool dup = std::any_of(f.begin(), f.end(), [&](double t) {
            return std::abs(t - p.offset) <= 1e-14 * len;
        });
        if (!dup) f.push_back(p.offset);
    }
    std::size_t n_forced = 0;
    for (auto& f : forced) {
        std::sort(f.begin(), f.end());
        n_forced += f.size();
    }
    if (n_target < nb + n_forced)
        throw ValidationError("n_target " + std::to_string(n_target) +
                              " is below the number of mandatory points " +
                              std::to_string(nb + n_forced));

    std::vector<double> lengths(ne);
    for (std::size_t e = 0; e < ne; ++e) lengths[e] = graph.segment(e).length;
    auto counts = detail::apportion(n_target - nb, lengths);
    for (std::size_t e = 0; e < ne; ++e) {
        std::size_t minimum = graph.segment(e).is_loop() ? 2 : (graph.has_parallel(e) ? 1 : 0);
        counts[e] = std::max({counts[e], minimum, forced[e].size()});
    }

    std::vector<std::vector<double>> interior(ne);
    for (std::size_t e = 0; e < ne; ++e) {
        const double len = graph.segment(e).length;
        std::vector<double> cuts{0.0};
        cuts.insert(cuts.end(), forced[e].begin(), forced[e].end());
        cuts.push_back(len);
        std::vector<double> pieces;
        for (std::size_t j = 0; j + 1 < cuts.size(); ++j) pieces.push_back(cuts[j + 1] - cuts[j]);
        const auto extra = detail::apportion(counts[e] - forced[e].size(), pieces);
        for (std::size_t j = 0; j < pieces.size(); ++j) {
            if (j > 0) interior[e].push_back(cuts[j]);
            const std::size_t parts = extra[j] + 1;
            for (std::size_t k = 1; k < parts; ++k)
                interior[e].push_back(cuts[j] + pieces[j] * static_cast<double>(k) /
                                                    static_cast<double>(parts));
        }
    }
    return std::make_shared<const Model>(graph, std::move(interior));
}

/// Path model of the unit interval with exactly n vertices and n - 1 equal edges.
inline ModelPtr interval_model(std::size_t n) {
    if (n < 2) throw ValidationError("interval model needs at least 2 vertices");
    std::vector<std::vector<double>> interior(1);
    for (std::size_t j = 1; j + 1 < n; ++j)
        interior[0].push_back(static_cast<double>(j) / static_cast<double>(n - 1));
    return std::make_shared<const Model>(graphs::interval(), std::move(interior));
}

} // namespace metrograph
