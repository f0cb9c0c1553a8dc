// metrograph: spectra, kernels and convergence studies on metrized graphs.
//
// Exit codes: 0 ok, 1 numerical failure (or failed self-test), 2 usage or
// validation error.

#include "metrograph/metrograph.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace metrograph;

namespace {

struct RunConfig {
    std::string command;
    std::string graph;
    std::string measure = "dx";
    std::string convention = "dxN";
    std::size_t n = 0;
    std::string schedule;
    std::string index = "1";
    std::size_t k = 1;
    std::string op = "q";
    std::string out;
    std::optional<double> tol;
    std::size_t jobs = 1;
    std::uint64_t seed = 0;
    std::size_t trials = 200;
    std::size_t max_n = 200;
    bool timing = false;
    bool inject_fault = false;
};

struct Loaded {
    MetrizedGraph graph;
    std::optional<MeasureSpec> measure;  // empty means mu = dx
    std::string graph_id;
    std::string measure_id;
};

std::string config_line(const RunConfig& c) {
    std::ostringstream s;
    s << "command=" << c.command << " graph=" << c.graph << " measure=" << c.measure
      << " convention=" << c.convention;
    if (c.command == "spectrum" || c.command == "kernel") s << " n=" << c.n;
    if (c.command == "spectrum") s << " k=" << c.k << " operator=" << c.op;
    if (c.command == "reference") s << " k=" << c.k;
    if (c.command == "converge") s << " schedule=" << c.schedule << " index=" << c.index << " jobs=" << c.jobs;
    if (c.tol) s << " tol=" << format_number(*c.tol);
    s << " seed=" << c.seed;
    return s.str();
}

json config_json(const RunConfig& c) {
    json j = {{"command", c.command}, {"graph", c.graph},     {"measure", c.measure},
              {"convention", c.convention}, {"seed", c.seed}};
    if (c.command == "spectrum" || c.command == "kernel") j["n"] = c.n;
    if (c.command == "spectrum") { j["k"] = c.k; j["operator"] = c.op; }
    if (c.command == "reference") j["k"] = c.k;
    if (c.command == "converge") { j["schedule"] = c.schedule; j["index"] = c.index; j["jobs"] = c.jobs; }
    if (c.tol) j["tol"] = *c.tol;
    return j;
}

Loaded load(const RunConfig& c) {
    if (c.graph.empty()) throw ValidationError("--graph is required");
    std::optional<GraphDocument> doc;
    std::string id = c.graph;
    if (auto named = graphs::by_name(c.graph)) {
        doc = GraphDocument{*named, std::nullopt, 1.0};
    } else {
        doc = load_graph(c.graph);
        id = fs::path(c.graph).stem().string();
    }
    Loaded out{doc->graph, std::nullopt, id, "dx"};
    if (c.measure != "dx") {
        const json m = json::parse(read_file(c.measure), nullptr, false);
        if (m.is_discarded()) throw ValidationError("measure file '" + c.measure + "' is not valid JSON");
        out.measure = parse_measure(m.contains("measure") ? m.at("measure") : m, out.graph, doc->scale);
        out.measure_id = fs::path(c.measure).stem().string();
    } else if (doc->measure) {
        out.measure = doc->measure;
        out.measure_id = id + ":measure";
    }
    return out;
}

Convention parse_convention(const std::string& s) {
    if (s == "dxN") return Convention::dxN;
    if (s == "voronoi") return Convention::voronoi;
    throw ValidationError("--convention must be dxN or voronoi");
}

std::vector<std::size_t> parse_schedule(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(tok, &pos);
        } catch (const std::exception&) {
            throw ValidationError("schedule entry '" + tok + "' is not an integer");
        }
        if (pos != tok.size() || v <= 0) throw ValidationError("schedule entry '" + tok + "' is not a positive integer");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ValidationError("schedule is empty");
    return out;
}

std::pair<std::size_t, std::size_t> parse_index(const std::string& s) {
    auto num = [&](const std::string& t) {
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(t, &pos);
        } catch (const std::exception&) {
            throw ValidationError("--index '" + s + "' is not i or i..j");
        }
        if (pos != t.size() || v < 1) throw ValidationError("--index entries must be positive integers");
        return static_cast<std::size_t>(v);
    };
    const auto dots = s.find("..");
    if (dots == std::string::npos) {
        const auto i = num(s);
        return {i, i};
    }
    const auto lo = num(s.substr(0, dots)), hi = num(s.substr(dots + 2));
    if (hi < lo) throw ValidationError("--index range is empty");
    return {lo, hi};
}

std::optional<fs::path> out_dir(const RunConfig& c) {
    std::string dir = c.out;
    if (dir.empty())
        if (const char* env = std::getenv("METROGRAPH_OUT")) dir = env;
    if (dir.empty()) return std::nullopt;
    fs::create_directories(dir);
    return fs::path(dir);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + path.string() + "'");
    f << text;
    std::cout << "wrote " << path.string() << "\n";
}

std::pair<ModelPtr, DiscreteMeasure> discretize(const Loaded& in, Convention conv, std::size_t n) {
    std::vector<GraphPoint> must;
    if (conv == Convention::voronoi && in.measure) must = in.measure->breakpoints();
    auto model = build_model(in.graph, n, must);
    if (conv == Convention::dxN) return {model, dx_model_measure(model)};
    return {model, voronoi_discretize(in.measure ? *in.measure : MeasureSpec::lebesgue(in.graph), model)};
}

EigenOptions eigen_options(const RunConfig& c) {
    EigenOptions o;
    if (c.tol) o.cluster_tolerance = *c.tol;
    return o;
}

int cmd_spectrum(const RunConfig& c) {
    const auto in = load(c);
    if (c.n == 0) throw ValidationError("--n is required");
    const auto [model, mu] = discretize(in, parse_convention(c.convention), c.n);
    const auto q = kirchhoff_matrix(model);
    const auto lam = eigen_mu(q, mu, c.k, eigen_options(c));
    std::ostringstream csv;
    csv << "# config: " << config_line(c) << "\n";
    json doc = {{"config", config_json(c)}, {"graph", graph_to_json(in.graph)}};
    std::printf("graph %s, N = %zu, convention %s\n", in.graph_id.c_str(), model->size(), c.convention.c_str());
    if (c.op == "q") {
        doc["spectrum"] = to_json(lam);
        csv << "index,lambda,scaled,multiplicity\n";
        std::printf("%5s %20s %20s %5s\n", "i", "lambda", "N*lambda", "mult");
        for (std::size_t i = 1; i <= lam.clusters.size(); ++i) {
            const auto& cl = lam.cluster(i);
            csv << i << ',' << format_number(cl.value) << ',' << format_number(cl.scaled) << ','
                << cl.multiplicity << "\n";
            std::printf("%5zu %20s %20s %5zu\n", i, format_number(cl.value).c_str(),
                        format_number(cl.scaled).c_str(), cl.multiplicity);
        }
    } else if (c.op == "phi") {
        const auto table = kernel_table(q, mu);
        const auto alpha = eigen_phi(table, mu, c.k, eigen_options(c));
        doc["spectrum"] = to_json(alpha);
        doc["laplacian"] = to_json(lam);
        csv << "index,alpha,inv_n_lambda,multiplicity\n";
        std::printf("%5s %20s %20s %5s\n", "i", "alpha", "1/(N*lambda)", "mult");
        const std::size_t count = std::min(alpha.clusters.size(), lam.clusters.size());
        for (std::size_t i = 1; i <= count; ++i) {
            const auto& a = alpha.cluster(i);
            const double inv = 1.0 / lam.cluster(i).scaled;
            csv << i << ',' << format_number(a.value) << ',' << format_number(inv) << ',' << a.multiplicity << "\n";
            std::printf("%5zu %20s %20s %5zu\n", i, format_number(a.value).c_str(), format_number(inv).c_str(),
                        a.multiplicity);
        }
    } else {
        throw ValidationError("--operator must be q or phi");
    }
    if (const auto dir = out_dir(c)) {
        write_file(*dir / "spectrum.json", doc.dump(2) + "\n");
        write_file(*dir / "spectrum.csv", csv.str());
    }
    return 0;
}

int cmd_converge(const RunConfig& c) {
    const auto in = load(c);
    const auto schedule = parse_schedule(c.schedule);
    const auto [lo, hi] = parse_index(c.index);
    const auto conv = parse_convention(c.convention);
    ScheduleOptions opt;
    opt.graph_id = in.graph_id;
    opt.measure_id = in.measure_id;
    opt.jobs = c.jobs;
    opt.eigen = eigen_options(c);
    const auto dir = out_dir(c);
    for (std::size_t i = lo; i <= hi; ++i) {
        const auto rep = run_schedule(in.graph, in.measure, conv, i, schedule, opt);
        std::printf("graph %s, measure %s, convention %s, index %zu\n", rep.graph_id.c_str(),
                    rep.measure_id.c_str(), to_string(rep.convention), i);
        std::printf("%8s %20s %5s %14s\n", "N", "N*lambda", "mult", "sup_distance");
        for (const auto& r : rep.records)
            std::printf("%8zu %20s %5zu %14s\n", r.n, format_number(r.scaled).c_str(), r.effective_multiplicity,
                        r.sup_distance ? format_number(*r.sup_distance).c_str() : "-");
        std::printf("limit (%s): %s\n", to_string(rep.provenance), format_number(rep.reference_value).c_str());
        if (rep.extrapolation)
            std::printf("extrapolated limit: %s +- %s\n", format_number(rep.extrapolation->limit).c_str(),
                        format_number(rep.extrapolation->uncertainty).c_str());
        std::printf("last error: %s\n",
                    format_number(std::abs(rep.reference_value - rep.records.back().scaled)).c_str());
        if (rep.rate) std::printf("rate: p = %.4f, M = %.4g\n", rep.rate->p, rep.rate->m);
        else std::printf("rate: not fitted\n");
        std::printf("monotone: %s%s\n", rep.monotone.monotone ? "yes" : "no",
                    rep.monotone.has_ties ? " (ties)" : "");
        if (rep.stabilization_n0) std::printf("multiplicity stable from N = %zu\n", *rep.stabilization_n0);
        else std::printf("multiplicity did not stabilize\n");
        for (const auto& note : rep.notes) std::printf("note: %s\n", note.c_str());
        if (dir) {
            const std::string stem = hi > lo ? "report_i" + std::to_string(i) : std::string("report");
            json doc = to_json(rep, c.timing);
            doc["config"] = config_json(c);
            write_file(*dir / (stem + ".json"), doc.dump(2) + "\n");
            write_file(*dir / (stem + ".csv"), report_csv(rep, config_line(c), c.timing));
            write_file(*dir / (stem + "_plot.csv"), plot_csv(rep, config_line(c)));
        }
    }
    return 0;
}

int cmd_kernel(const RunConfig& c) {
    const auto in = load(c);
    if (c.n == 0) throw ValidationError("--n is required");
    const auto [model, mu] = discretize(in, parse_convention(c.convention), c.n);
    const auto table = kernel_table(model, mu);
    std::printf("graph %s, N = %zu, C_nu = %s, anchor spread %s\n", in.graph_id.c_str(), model->size(),
                format_number(table.c_nu).c_str(), format_number(table.c_spread).c_str());
    const std::string csv = kernel_csv(table, config_line(c));
    if (const auto dir = out_dir(c)) write_file(*dir / "kernel.csv", csv);
    else std::cout << csv;
    return 0;
}

int cmd_reference(const RunConfig& c) {
    const auto in = load(c);
    const auto spec = reference_spectrum(in.graph, c.k);
    std::printf("graph %s, provenance %s\n", in.graph_id.c_str(), to_string(spec.provenance));
    std::printf("%5s %20s %20s %5s\n", "i", "lambda", "alpha", "mult");
    for (std::size_t i = 0; i < spec.eigenvalues.size(); ++i) {
        const auto& ev = spec.eigenvalues[i];
        std::printf("%5zu %20s %20s %5zu\n", i + 1, format_number(ev.lambda).c_str(),
                    format_number(ev.alpha).c_str(), ev.multiplicity);
    }
    for (const auto& note : spec.notes) std::printf("note: %s\n", note.c_str());
    if (const auto dir = out_dir(c)) {
        json doc = to_json(spec);
        doc["config"] = config_json(c);
        write_file(*dir / "reference.json", doc.dump(2) + "\n");
    }
    return 0;
}

int cmd_selftest(const RunConfig& c) {
    SelftestOptions opt;
    opt.trials = c.trials;
    opt.max_n = c.max_n;
    opt.seed = c.seed;
    opt.tol_override = c.tol;
    opt.inject_weight_fault = c.inject_fault;
    const auto suites = run_identity_suites(opt);
    std::printf("%-22s %8s %12s %12s  %s\n", "identity", "checks", "worst", "tolerance", "result");
    const SuiteResult* first_fail = nullptr;
    for (const auto& s : suites) {
        std::printf("%-22s %8zu %12.3e %12.3e  %s\n", s.name.c_str(), s.checks, s.worst, s.tolerance,
                    s.passed ? "pass" : "FAIL");
        if (!s.passed && !first_fail) first_fail = &s;
    }
    if (first_fail) {
        std::printf("first failing identity: %s\n", first_fail->name.c_str());
        return 1;
    }
    std::printf("all identities hold\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectra of metrized graphs and their discrete models"};
    app.require_subcommand(1);
    RunConfig c;

    auto graph_opts = [&](CLI::App* sub) {
        sub->add_option("--graph", c.graph, "Graph document path or built-in name (interval, circle, star3, theta)");
        sub->add_option("--measure", c.measure, "dx or a JSON measure document")->capture_default_str();
        sub->add_option("--convention", c.convention, "dxN or voronoi")->capture_default_str();
        sub->add_option("--out", c.out, "Output directory (default $METROGRAPH_OUT)");
        sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    };
    auto* spectrum = app.add_subcommand("spectrum", "Discrete spectrum of one model");
    graph_opts(spectrum);
    spectrum->add_option("--n", c.n, "Target vertex count");
    spectrum->add_option("-k", c.k, "Number of eigenvalue clusters")->capture_default_str();
    spectrum->add_option("--operator", c.op, "q (Laplacian) or phi (integral operator)")->capture_default_str();
    spectrum->add_option("--tol", c.tol, "Relative cluster tolerance");

    auto* converge = app.add_subcommand("converge", "Scaled eigenvalues along a schedule of models");
    graph_opts(converge);
    converge->add_option("--schedule", c.schedule, "Comma-separated target vertex counts");
    converge->add_option("--index", c.index, "Cluster index i or range i..j")->capture_default_str();
    converge->add_option("--jobs", c.jobs, "Concurrent schedule points")->capture_default_str();
    converge->add_option("--tol", c.tol, "Relative cluster tolerance");
    converge->add_flag("--timing", c.timing, "Record wall time per point in artifacts");

    auto* kernel = app.add_subcommand("kernel", "Green's kernel table as CSV");
    graph_opts(kernel);
    kernel->add_option("--n", c.n, "Target vertex count");

    auto* reference = app.add_subcommand("reference", "Continuous reference spectrum");
    graph_opts(reference);
    reference->add_option("-k", c.k, "Number of distinct eigenvalues")->capture_default_str();

    auto* selftest = app.add_subcommand("selftest", "Randomized exact-identity suites");
    selftest->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    selftest->add_option("--tol", c.tol, "Override every identity tolerance");
    selftest->add_option("--trials", c.trials, "Randomized trials")->capture_default_str();
    selftest->add_option("--max-n", c.max_n, "Largest target vertex count")->capture_default_str();
    selftest->add_flag("--inject-weight-fault", c.inject_fault, "Perturb one edge weight")->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*spectrum) { c.command = "spectrum"; return cmd_spectrum(c); }
        if (*converge) { c.command = "converge"; return cmd_converge(c); }
        if (*kernel) { c.command = "kernel"; return cmd_kernel(c); }
        if (*reference) { c.command = "reference"; return cmd_reference(c); }
        c.command = "selftest";
        return cmd_selftest(c);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 1;
    }
}
