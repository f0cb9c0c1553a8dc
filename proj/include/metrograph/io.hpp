#pragma once

#include "metrograph/convergence.hpp"
#include "metrograph/error.hpp"
#include "metrograph/graph.hpp"
#include "metrograph/kernel.hpp"
#include "metrograph/laplacian.hpp"
#include "metrograph/measure.hpp"
#include "metrograph/reference.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace metrograph {

using json = nlohmann::json;

struct GraphDocument {
    MetrizedGraph graph;
    std::optional<MeasureSpec> measure;
    double scale = 1.0;  ///< document length units per graph unit (total length when normalized)
};

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key))
        throw ValidationError(where + ": missing \"" + key + "\"");
    return obj.at(key);
}

inline double require_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ValidationError(where + ": expected a number");
    return v.get<double>();
}

inline std::size_t require_vertex(const MetrizedGraph& g, const json& v, const std::string& where) {
    if (!v.is_string()) throw ValidationError(where + ": expected a vertex label");
    const auto idx = g.vertex_index(v.get<std::string>());
    if (!idx) throw ValidationError(where + ": unknown vertex '" + v.get<std::string>() + "'");
    return *idx;
}

} // namespace detail

/// Reads a measure object; `scale` divides arclength (document units are
/// rescaled along with a normalized graph so masses are preserved).
inline MeasureSpec parse_measure(const json& m, const MetrizedGraph& g, double scale = 1.0) {
    if (!m.is_object()) throw ValidationError("measure: expected an object");
    std::vector<std::vector<DensityPiece>> density(g.segment_count());
    std::vector<Atom> atoms;
    if (m.contains("atoms")) {
        const auto& arr = m.at("atoms");
        if (!arr.is_array()) throw ValidationError("measure.atoms: expected an array");
        for (std::size_t j = 0; j < arr.size(); ++j) {
            const std::string where = "measure.atoms[" + std::to_string(j) + "]";
            atoms.push_back({detail::require_vertex(g, detail::require(arr[j], "at", where), where + ".at"),
                             detail::require_number(detail::require(arr[j], "mass", where), where + ".mass")});
        }
    }
    if (m.contains("density")) {
        const auto& arr = m.at("density");
        if (!arr.is_array()) throw ValidationError("measure.density: expected an array");
        for (std::size_t j = 0; j < arr.size(); ++j) {
            const std::string where = "measure.density[" + std::to_string(j) + "]";
            const auto& seg = detail::require(arr[j], "segment", where);
            if (!seg.is_number_integer() || seg.get<long long>() < 0 ||
                static_cast<std::size_t>(seg.get<long long>()) >= g.segment_count())
                throw ValidationError(where + ".segment: not a segment index");
            const auto e = static_cast<std::size_t>(seg.get<long long>());
            const auto& pieces = detail::require(arr[j], "pieces", where);
            if (!pieces.is_array()) throw ValidationError(where + ".pieces: expected an array");
            for (std::size_t k = 0; k < pieces.size(); ++k) {
                const std::string pw = where + ".pieces[" + std::to_string(k) + "]";
                DensityPiece p;
                p.from = detail::require_number(detail::require(pieces[k], "from", pw), pw + ".from") / scale;
                p.to = detail::require_number(detail::require(pieces[k], "to", pw), pw + ".to") / scale;
                const auto& coeffs = detail::require(pieces[k], "coeffs", pw);
                if (!coeffs.is_array()) throw ValidationError(pw + ".coeffs: expected an array");
                for (std::size_t d = 0; d < coeffs.size(); ++d)
                    p.coeffs.push_back(detail::require_number(coeffs[d], pw + ".coeffs") *
                                       std::pow(scale, static_cast<double>(d + 1)));
                density[e].push_back(std::move(p));
            }
        }
    }
    return MeasureSpec(g, std::move(density), std::move(atoms));
}

inline GraphDocument parse_graph_document(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("parse error at byte ") + std::to_string(e.byte) + ": " + e.what());
    }
    if (!doc.is_object()) throw ValidationError("document: expected an object");
    const bool normalize = doc.value("normalize", false);
    const auto& vs = detail::require(doc, "vertices", "document");
    if (!vs.is_array()) throw ValidationError("vertices: expected an array");
    std::vector<std::string> labels;
    for (std::size_t j = 0; j < vs.size(); ++j) {
        if (!vs[j].is_string()) throw ValidationError("vertices[" + std::to_string(j) + "]: expected a string");
        labels.push_back(vs[j].get<std::string>());
    }
    const auto& ss = detail::require(doc, "segments", "document");
    if (!ss.is_array()) throw ValidationError("segments: expected an array");
    std::vector<Segment> segs;
    auto label_index = [&](const json& v, const std::string& where) -> std::size_t {
        if (!v.is_string()) throw ValidationError(where + ": expected a vertex label");
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == v.get<std::string>()) return i;
        throw ValidationError(where + ": unknown vertex '" + v.get<std::string>() + "'");
    };
    for (std::size_t j = 0; j < ss.size(); ++j) {
        const std::string where = "segments[" + std::to_string(j) + "]";
        segs.push_back({label_index(detail::require(ss[j], "u", where), where + ".u"),
                        label_index(detail::require(ss[j], "v", where), where + ".v"),
                        detail::require_number(detail::require(ss[j], "length", where), where + ".length")});
    }
    MetrizedGraph raw(labels, segs);
    const double scale = normalize ? raw.total_length() : 1.0;
    MetrizedGraph g(std::move(labels), std::move(segs), normalize);
    std::optional<MeasureSpec> measure;
    if (doc.contains("measure")) measure = parse_measure(doc.at("measure"), g, scale);
    return {std::move(g), std::move(measure), scale};
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline GraphDocument load_graph(const std::string& path) { return parse_graph_document(read_file(path)); }

inline json graph_to_json(const MetrizedGraph& g) {
    json segs = json::array();
    for (const auto& s : g.segments())
        segs.push_back({{"u", g.labels()[s.u]}, {"v", g.labels()[s.v]}, {"length", s.length}});
    return {{"normalize", false}, {"vertices", g.labels()}, {"segments", segs}};
}

inline json to_json(const SpectralResult& r) {
    const bool lap = r.kind == OperatorKind::laplacian;
    json clusters = json::array();
    for (const auto& c : r.clusters) {
        json fs = json::array();
        for (const auto& f : c.eigenfunctions)
            fs.push_back(std::vector<double>(f.values().data(), f.values().data() + f.values().size()));
        json cj;
        cj[lap ? "lambda" : "alpha"] = c.value;
        cj["scaled"] = c.scaled;
        cj["multiplicity"] = c.multiplicity;
        cj["eigenfunctions"] = std::move(fs);
        clusters.push_back(std::move(cj));
    }
    return {{"n", r.n}, {"operator", lap ? "q" : "phi"}, {"clusters", std::move(clusters)}};
}

inline json to_json(const ContinuousSpectrum& s) {
    json evs = json::array();
    for (const auto& ev : s.eigenvalues) {
        json fs = json::array();
        for (const auto& f : ev.eigenfunctions) {
            json coeffs = json::array();
            for (const auto& ab : f.coeffs) coeffs.push_back({ab[0], ab[1]});
            fs.push_back({{"k", f.k}, {"coeffs", std::move(coeffs)}});
        }
        evs.push_back({{"lambda", ev.lambda}, {"alpha", ev.alpha}, {"multiplicity", ev.multiplicity},
                       {"eigenfunctions", std::move(fs)}});
    }
    json out = {{"provenance", to_string(s.provenance)}, {"eigenvalues", std::move(evs)}};
    if (s.uncertainty) out["uncertainty"] = *s.uncertainty;
    if (!s.notes.empty()) out["notes"] = s.notes;
    return out;
}

inline json to_json(const ConvergenceReport& r, bool include_timing = false) {
    json recs = json::array();
    for (const auto& x : r.records) {
        json j = {{"n", x.n}, {"scaled", x.scaled}, {"multiplicity", x.multiplicity},
                  {"effective_multiplicity", x.effective_multiplicity}, {"angles", x.angles}};
        j["sup_distance"] = x.sup_distance ? json(*x.sup_distance) : json(nullptr);
        if (include_timing) j["seconds"] = x.seconds;
        if (!x.note.empty()) j["note"] = x.note;
        recs.push_back(std::move(j));
    }
    json out = {{"graph", r.graph_id},
                {"measure", r.measure_id},
                {"convention", to_string(r.convention)},
                {"index", r.index},
                {"records", std::move(recs)},
                {"reference", {{"provenance", to_string(r.provenance)},
                               {"value", r.reference_value},
                               {"multiplicity", r.reference_multiplicity}}},
                {"monotone", {{"monotone", r.monotone.monotone}, {"ties", r.monotone.has_ties}}},
                {"notes", r.notes}};
    if (r.reference_uncertainty) out["reference"]["uncertainty"] = *r.reference_uncertainty;
    out["monotone"]["first_violation"] =
        r.monotone.first_violation ? json(*r.monotone.first_violation) : json(nullptr);
    if (r.rate) {
        out["rate"] = {{"p", r.rate->p}, {"M", r.rate->m}, {"r_squared", r.rate->r_squared},
                       {"used", r.rate->used}, {"excluded", r.rate->excluded}};
    } else {
        out["rate"] = nullptr;
    }
    if (r.extrapolation) {
        out["extrapolation"] = {{"limit", r.extrapolation->limit},
                                {"uncertainty", r.extrapolation->uncertainty},
                                {"exponent", r.extrapolation->exponent},
                                {"low_confidence", r.extrapolation->low_confidence}};
    } else {
        out["extrapolation"] = nullptr;
    }
    out["stabilization_n0"] = r.stabilization_n0 ? json(*r.stabilization_n0) : json(nullptr);
    return out;
}

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// One row per record: N, scaled, multiplicity, sup_distance, seconds.
/// `seconds` is left empty unless timing is requested so reruns stay byte-identical.
inline std::string report_csv(const ConvergenceReport& r, const std::string& header = {},
                              bool include_timing = false) {
    std::ostringstream out;
    if (!header.empty()) out << "# config: " << header << "\n";
    out << "N,scaled,multiplicity,sup_distance,seconds\n";
    for (const auto& x : r.records) {
        out << x.n << ',' << format_number(x.scaled) << ',' << x.effective_multiplicity << ','
            << (x.sup_distance ? format_number(*x.sup_distance) : std::string()) << ','
            << (include_timing ? format_number(x.seconds) : std::string()) << "\n";
    }
    return out.str();
}

/// log N against log |reference - scaled| for external plotting.
inline std::string plot_csv(const ConvergenceReport& r, const std::string& header = {}) {
    std::ostringstream out;
    if (!header.empty()) out << "# config: " << header << "\n";
    out << "log_n,log_error\n";
    for (const auto& x : r.records) {
        const double err = std::abs(r.reference_value - x.scaled);
        if (err == 0.0) continue;
        out << format_number(std::log(static_cast<double>(x.n))) << ',' << format_number(std::log(err)) << "\n";
    }
    return out.str();
}

/// Kernel table with vertex ids on both axes; C_nu in the header.
inline std::string kernel_csv(const KernelTable& t, const std::string& header = {}) {
    std::ostringstream out;
    if (!header.empty()) out << "# config: " << header << "\n";
    out << "# C_nu=" << format_number(t.c_nu) << "\n";
    out << "id";
    for (const auto& v : t.model->vertices()) out << ',' << v.id;
    out << "\n";
    for (std::size_t i = 0; i < t.model->size(); ++i) {
        out << t.model->vertices()[i].id;
        for (std::size_t j = 0; j < t.model->size(); ++j)
            out << ',' << format_number(t.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        out << "\n";
    }
    return out.str();
}

} // namespace metrograph
