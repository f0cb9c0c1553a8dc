#pragma once

#include "metrograph/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace metrograph {

/// A segment of a metrized graph, parametrized by arclength t in [0, length]
/// with t = 0 at vertex `u` and t = length at vertex `v`. u == v is a loop.
struct Segment {
    std::size_t u = 0;
    std::size_t v = 0;
    double length = 1.0;

    [[nodiscard]] bool is_loop() const noexcept { return u == v; }
};

/// A point of the metrized graph given as (segment, arclength offset).
struct GraphPoint {
    std::size_t segment = 0;
    double offset = 0.0;
};

/// Compact connected metric graph: branch vertices joined by segments of
/// positive length. Every endpoint of a segment is a listed vertex, so all
/// points of valence other than 2 are branch vertices.
class MetrizedGraph {
public:
    MetrizedGraph(std::vector<std::string> labels, std::vector<Segment> segments,
                  bool normalize = false)
        : labels_(std::move(labels)), segments_(std::move(segments)) {
        validate();
        if (normalize) {
            const double total = total_length();
            for (auto& s : segments_) s.length /= total;
            normalized_ = true;
        }
    }

    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
    [[nodiscard]] const std::vector<Segment>& segments() const noexcept { return segments_; }
    [[nodiscard]] std::size_t vertex_count() const noexcept { return labels_.size(); }
    [[nodiscard]] std::size_t segment_count() const noexcept { return segments_.size(); }
    [[nodiscard]] const Segment& segment(std::size_t e) const { return segments_.at(e); }
    [[nodiscard]] bool normalized() const noexcept { return normalized_; }

    [[nodiscard]] double total_length() const noexcept {
        return std::accumulate(segments_.begin(), segments_.end(), 0.0,
                               [](double acc, const Segment& s) { return acc + s.length; });
    }

    [[nodiscard]] double max_segment_length() const noexcept {
        double m = 0.0;
        for (const auto& s : segments_) m = std::max(m, s.length);
        return m;
    }

    [[nodiscard]] std::optional<std::size_t> vertex_index(std::string_view label) const {
        const auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - labels_.begin());
    }

    /// Number of segment ends at a vertex; a loop counts twice.
    [[nodiscard]] std::size_t valence(std::size_t vertex) const {
        std::size_t n = 0;
        for (const auto& s : segments_) n += (s.u == vertex) + (s.v == vertex);
        return n;
    }

    /// True when another non-loop segment joins the same pair of vertices.
    [[nodiscard]] bool has_parallel(std::size_t e) const {
        const auto& s = segments_.at(e);
        if (s.is_loop()) return false;
        for (std::size_t f = 0; f < segments_.size(); ++f) {
            if (f == e) continue;
            const auto& o = segments_[f];
            if ((o.u == s.u && o.v == s.v) || (o.u == s.v && o.v == s.u)) return true;
        }
        return false;
    }

    /// Branch vertex at a graph point, if the point is a segment endpoint.
    [[nodiscard]] std::optional<std::size_t> vertex_at(const GraphPoint& p) const {
        const auto& s = segments_.at(p.segment);
        const double eps = 1e-14 * s.length;
        if (std::abs(p.offset) <= eps) return s.u;
        if (std::abs(p.offset - s.length) <= eps) return s.v;
        return std::nullopt;
    }

    /// Points lying on the same segment with equal offsets, or canonicalizing
    /// to the same branch vertex, are the same point of the graph.
    [[nodiscard]] bool same_point(const GraphPoint& a, const GraphPoint& b) const {
        const auto va = vertex_at(a);
        const auto vb = vertex_at(b);
        if (va || vb) return va == vb;
        return a.segment == b.segment &&
               std::abs(a.offset - b.offset) <= 1e-14 * segments_.at(a.segment).length;
    }

private:
    void validate() const {
        if (labels_.empty()) throw ValidationError("graph has no vertices");
        if (segments_.empty()) throw ValidationError("graph has no segments");
        for (std::size_t e = 0; e < segments_.size(); ++e) {
            const auto& s = segments_[e];
            const std::string where = "segments[" + std::to_string(e) + "]";
            if (s.u >= labels_.size() || s.v >= labels_.size())
                throw ValidationError(where + ": endpoint is not a listed vertex");
            if (!std::isfinite(s.length)) throw ValidationError(where + ": non-finite length");
            if (s.length <= 0.0) throw ValidationError(where + ": nonpositive length");
        }
        // union-find over segment endpoints
        std::vector<std::size_t> parent(labels_.size());
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (const auto& s : segments_) parent[find(s.u)] = find(s.v);
        const std::size_t root = find(0);
        for (std::size_t v = 0; v < labels_.size(); ++v) {
            if (find(v) != root)
                throw ValidationError("disconnected graph: vertex '" + labels_[v] +
                                      "' is not reachable from '" + labels_[0] + "'");
        }
    }

    std::vector<std::string> labels_;
    std::vector<Segment> segments_;
    bool normalized_ = false;
};

enum class Shape { general, interval, circle };

/// Unit interval and unit circle have closed-form spectra; everything else
/// goes through the secular solver.
inline Shape classify(const MetrizedGraph& g) {
    if (g.segment_count() != 1) return Shape::general;
    const auto& s = g.segment(0);
    if (std::abs(s.length - 1.0) > 1e-12) return Shape::general;
    if (s.is_loop()) return g.vertex_count() == 1 ? Shape::circle : Shape::general;
    return g.vertex_count() == 2 ? Shape::interval : Shape::general;
}

namespace graphs {

inline MetrizedGraph interval() { return MetrizedGraph({"a", "b"}, {{0, 1, 1.0}}); }

inline MetrizedGraph circle() { return MetrizedGraph({"o"}, {{0, 0, 1.0}}); }

/// Star with three legs of length 1/3 joined at the center "o".
inline MetrizedGraph star3() {
    const double leg = 1.0 / 3.0;
    return MetrizedGraph({"o", "a", "b", "c"}, {{0, 1, leg}, {0, 2, leg}, {0, 3, leg}});
}

/// Two vertices joined by three parallel segments of unequal length.
inline MetrizedGraph theta() {
    return MetrizedGraph({"a", "b"}, {{0, 1, 0.5}, {0, 1, 0.3}, {0, 1, 0.2}});
}

inline std::optional<MetrizedGraph> by_name(std::string_view name) {
    if (name == "interval") return interval();
    if (name == "circle") return circle();
    if (name == "star3") return star3();
    if (name == "theta") return theta();
    return std::nullopt;
}

inline const std::vector<std::string>& names() {
    static const std::vector<std::string> n{"interval", "circle", "star3", "theta"};
    return n;
}

} // namespace graphs
} // namespace metrograph
