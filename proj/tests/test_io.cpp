#include "metrograph/io.hpp"

#include <catch_amalgamated.hpp>

#include <string>

using namespace metrograph;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {
const std::string data_dir = METROGRAPH_DATA_DIR;
}

TEST_CASE("sample documents load") {
    const auto iv = load_graph(data_dir + "/graphs/interval.json");
    CHECK(classify(iv.graph) == Shape::interval);
    CHECK_FALSE(iv.measure);
    const auto star = load_graph(data_dir + "/graphs/star3.json");
    CHECK(star.graph.normalized());
    CHECK_THAT(star.graph.segment(2).length, WithinAbs(1.0 / 3.0, 1e-15));
    CHECK(star.scale == 3.0);
}

TEST_CASE("measures are rescaled with a normalized graph") {
    const auto doc = load_graph(data_dir + "/graphs/star3_atoms.json");
    REQUIRE(doc.measure);
    CHECK_THAT(doc.measure->total_mass(), WithinAbs(1.0, 1e-12));
    CHECK_THAT(doc.measure->density_integral(0, 0.0, 1.0 / 6.0), WithinAbs(0.25, 1e-12));
    const auto bp = doc.measure->breakpoints();
    REQUIRE(bp.size() == 1);
    CHECK_THAT(bp[0].offset, WithinAbs(1.0 / 6.0, 1e-15));
}

TEST_CASE("ramp density document") {
    const auto doc = load_graph(data_dir + "/graphs/interval_ramp.json");
    REQUIRE(doc.measure);
    const auto mu = voronoi_discretize(*doc.measure, interval_model(3));
    CHECK_THAT(mu[0], WithinAbs(1.0 / 16.0, 1e-15));
}

TEST_CASE("document errors carry a location") {
    CHECK_THROWS_WITH(parse_graph_document("{\"vertices\": [\"a\"], "),
                      ContainsSubstring("parse error at byte"));
    CHECK_THROWS_WITH(parse_graph_document(R"({"vertices": ["a", "b"]})"), ContainsSubstring("segments"));
    CHECK_THROWS_WITH(parse_graph_document(R"({"vertices": ["a", "b"], "segments": [{"u": "a", "v": "z", "length": 1}]})"),
                      ContainsSubstring("segments[0].v"));
    CHECK_THROWS_WITH(parse_graph_document(R"({"vertices": ["a", "b"], "segments": [{"u": "a", "v": "b", "length": 0}]})"),
                      ContainsSubstring("nonpositive length"));
    CHECK_THROWS_WITH(
        parse_graph_document(R"({"vertices": ["a", "b"], "segments": [{"u": "a", "v": "b", "length": 1}],
                                 "measure": {"atoms": [{"at": "a", "mass": 0.5}]}})"),
        ContainsSubstring("mass"));
    CHECK_THROWS_AS(read_file(data_dir + "/graphs/missing.json"), ValidationError);
}

TEST_CASE("graph round trip") {
    const auto g = graphs::theta();
    const auto doc = parse_graph_document(graph_to_json(g).dump());
    REQUIRE(doc.graph.segment_count() == 3);
    for (std::size_t e = 0; e < 3; ++e) CHECK(doc.graph.segment(e).length == g.segment(e).length);
}

TEST_CASE("spectral JSON") {
    const auto m = interval_model(5);
    const auto r = eigen_mu(kirchhoff_matrix(m), dx_model_measure(m), 2);
    const auto j = to_json(r);
    CHECK(j["n"] == 5);
    CHECK(j["operator"] == "q");
    CHECK_THAT(j["clusters"][0]["scaled"].get<double>(), WithinAbs(7.6393, 1e-4));
    CHECK(j["clusters"][0]["eigenfunctions"][0].size() == 5);
    const auto s = to_json(circle_spectrum(1));
    CHECK(s["provenance"] == "closed-form");
    CHECK(s["eigenvalues"][0]["multiplicity"] == 2);
}

TEST_CASE("report CSV and JSON") {
    const auto rep = run_schedule(graphs::interval(), std::nullopt, Convention::dxN, 1, {5, 10, 50});
    const auto csv = report_csv(rep, "command=converge");
    CHECK_THAT(csv, ContainsSubstring("# config: command=converge\nN,scaled,multiplicity,sup_distance,seconds\n"));
    CHECK_THAT(csv, ContainsSubstring("5,7.63932022"));
    CHECK(csv == report_csv(rep, "command=converge"));
    CHECK_FALSE(to_json(rep).contains("seconds"));
    CHECK(to_json(rep, true)["records"][0].contains("seconds"));
    const auto plot = plot_csv(rep);
    CHECK_THAT(plot, ContainsSubstring("log_n,log_error\n"));
    CHECK(to_json(rep)["reference"]["provenance"] == "closed-form");
}

TEST_CASE("kernel CSV") {
    const auto m = interval_model(3);
    const auto t = kernel_table(m, dx_model_measure(m));
    const auto csv = kernel_csv(t);
    CHECK_THAT(csv, ContainsSubstring("# C_nu="));
    CHECK_THAT(csv, ContainsSubstring("id,a,b,e0#1\n"));
}

TEST_CASE("format_number") {
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(7.6393202250021) == "7.639320225");
}
