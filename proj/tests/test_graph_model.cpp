#include "metrograph/graph.hpp"
#include "metrograph/model.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace metrograph;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

TEST_CASE("single segment is the unit interval") {
    const MetrizedGraph g({"a", "b"}, {{0, 1, 1.0}});
    CHECK(g.total_length() == 1.0);
    CHECK(classify(g) == Shape::interval);
    CHECK(g.valence(0) == 1);
}

TEST_CASE("normalize rescales to total length 1") {
    const MetrizedGraph g({"a", "b"}, {{0, 1, 2.0}, {0, 1, 2.0}}, true);
    CHECK(g.segment(0).length == 0.5);
    CHECK(g.segment(1).length == 0.5);
    CHECK(g.normalized());
    CHECK(g.has_parallel(0));
}

TEST_CASE("graph validation") {
    CHECK_THROWS_WITH(MetrizedGraph({"a", "b"}, {{0, 1, 0.0}}), ContainsSubstring("nonpositive length"));
    CHECK_THROWS_WITH(MetrizedGraph({"a", "b"}, {{0, 1, -1.0}}), ContainsSubstring("segments[0]"));
    CHECK_THROWS_WITH(MetrizedGraph({"a", "b", "c"}, {{0, 1, 1.0}}), ContainsSubstring("disconnected"));
    CHECK_THROWS_AS(MetrizedGraph({"a"}, {{0, 1, 1.0}}), ValidationError);
    CHECK_THROWS_AS(MetrizedGraph({"a", "b"}, {{0, 1, NAN}}), ValidationError);
}

TEST_CASE("built-in graphs") {
    CHECK(classify(graphs::circle()) == Shape::circle);
    CHECK(graphs::circle().valence(0) == 2);
    CHECK(classify(graphs::star3()) == Shape::general);
    CHECK(graphs::star3().valence(0) == 3);
    CHECK_THAT(graphs::star3().total_length(), WithinAbs(1.0, 1e-15));
    CHECK_THAT(graphs::theta().total_length(), WithinAbs(1.0, 1e-15));
    CHECK_FALSE(graphs::by_name("moebius").has_value());
    for (const auto& n : graphs::names()) CHECK(graphs::by_name(n).has_value());
}

TEST_CASE("endpoint canonicalization") {
    const auto g = graphs::star3();
    CHECK(g.vertex_at({0, 0.0}) == g.segment(0).u);
    CHECK(g.same_point({0, 0.0}, {1, 0.0}));
    CHECK_FALSE(g.same_point({0, 0.1}, {1, 0.1}));
}

TEST_CASE("interval model with five vertices") {
    const auto m = build_model(graphs::interval(), 5);
    REQUIRE(m->size() == 5);
    REQUIRE(m->edges().size() == 4);
    for (const auto& e : m->edges()) {
        CHECK_THAT(e.length, WithinAbs(0.25, 1e-15));
        CHECK_THAT(e.weight, WithinAbs(4.0, 1e-12));
    }
}

TEST_CASE("circle model with four vertices is a 4-cycle") {
    const auto m = build_model(graphs::circle(), 4);
    REQUIRE(m->size() == 4);
    REQUIRE(m->edges().size() == 4);
    for (const auto& e : m->edges()) CHECK_THAT(e.length, WithinAbs(0.25, 1e-15));
}

TEST_CASE("loops and parallel segments stay simple at the minimum size") {
    const auto c = build_model(graphs::circle(), 1);
    CHECK(c->size() == 3);
    const auto t = build_model(graphs::theta(), 2);
    CHECK(t->size() == 2 + 3);  // each parallel arc gets an interior point
}

TEST_CASE("must_include points become vertices") {
    const auto m = build_model(graphs::interval(), 3, {{0, 1.0 / 3.0}});
    REQUIRE(m->size() == 3);
    CHECK(m->vertex_at({0, 1.0 / 3.0}).has_value());

    const auto big = build_model(graphs::interval(), 11, {{0, 0.3}});
    CHECK(big->size() == 11);
    CHECK(big->vertex_at({0, 0.3}).has_value());
}

TEST_CASE("build_model rejects impossible targets") {
    CHECK_THROWS_AS(build_model(graphs::star3(), 3), ValidationError);
    CHECK_THROWS_AS(build_model(graphs::interval(), 2, {{0, 0.25}, {0, 0.5}}), ValidationError);
}

TEST_CASE("model invariants across the corpus") {
    for (const auto& name : graphs::names()) {
        const auto g = *graphs::by_name(name);
        for (std::size_t n : {10u, 37u, 120u}) {
            const auto m = build_model(g, n);
            CAPTURE(name, n);
            CHECK(m->size() == n);
            // branch vertices first
            for (std::size_t v = 0; v < g.vertex_count(); ++v) CHECK(m->vertices()[v].branch == v);
            std::vector<double> covered(g.segment_count(), 0.0);
            for (const auto& e : m->edges()) {
                CHECK(e.length > 0.0);
                CHECK_THAT(e.weight * e.length, WithinAbs(1.0, 1e-12));
                covered[e.segment] += e.length;
            }
            for (std::size_t s = 0; s < g.segment_count(); ++s)
                CHECK_THAT(covered[s], WithinAbs(g.segment(s).length, 1e-12));
            CHECK(m->edges().size() == n - g.vertex_count() + g.segment_count());
        }
    }
}

TEST_CASE("interval_model spacing") {
    const auto m = interval_model(6);
    CHECK(m->size() == 6);
    CHECK_THAT(m->mesh(), WithinAbs(0.2, 1e-15));
    CHECK_THROWS_AS(interval_model(1), ValidationError);
}

TEST_CASE("apportion by largest remainder") {
    const auto c = detail::apportion(10, {1.0, 1.0, 1.0});
    CHECK(c[0] + c[1] + c[2] == 10);
    CHECK(c[0] == 4);
    CHECK(c[1] == 3);
}
