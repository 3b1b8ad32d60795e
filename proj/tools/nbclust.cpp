// Command-line front end: ingest, synth, cluster, report, stability,
// benchmark and serve.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nbclust.hpp"
#include "nbclust/service.hpp"

namespace fs = std::filesystem;
using namespace nbclust;

namespace {

struct RunConfig {
    std::size_t k = 0;
    std::size_t min_codes = 3;
    EmConfig em;
    double lambda = default_lambda;
    std::size_t top_chart = default_top_chart;
    std::size_t top_heatmap = default_top_heatmap;
    std::size_t top_relevance = default_top_relevance;
    std::uint64_t seed = 0;
    std::string input;
    std::string output;
    char record_delim = ';';
    char code_delim = ',';
};

void add_input_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--input", cfg.input, "Records file, one `row_id;code,code,...` per line")->required();
    cmd->add_option("--min-codes", cfg.min_codes, "Drop records with fewer distinct codes")
        ->capture_default_str();
    cmd->add_option("--record-delim", cfg.record_delim, "Separator between row id and codes")->capture_default_str();
    cmd->add_option("--code-delim", cfg.code_delim, "Separator between codes")->capture_default_str();
}

void add_em_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--em-tol", cfg.em.omega_tol, "Stop EM when ||delta omega||_2 falls below this")
        ->capture_default_str();
    cmd->add_option("--max-iters", cfg.em.max_iters, "EM iteration cap")->capture_default_str();
    cmd->add_option("--prob-floor", cfg.em.prob_floor, "Keep means in [eps, 1 - eps]")->capture_default_str();
}

void add_report_flags(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--lambda", cfg.lambda, "Relevance weight in [0, 1]")->capture_default_str();
    cmd->add_option("--top-chart", cfg.top_chart, "Features in the frequency chart")->capture_default_str();
    cmd->add_option("--top-heatmap", cfg.top_heatmap, "Features in the heatmap")->capture_default_str();
    cmd->add_option("--top-relevance", cfg.top_relevance, "Codes per cluster in the relevance table")
        ->capture_default_str();
}

IngestResult read_input(const RunConfig& cfg) {
    std::ifstream in(cfg.input);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open input '" + cfg.input + "'");
    }
    const auto records = parse_records(in, {cfg.record_delim, cfg.code_delim});
    return ingest(records, cfg.min_codes);
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
    }
    return out;
}

std::string join_sizes(const std::vector<std::size_t>& sizes) {
    std::string s;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        s += (i ? "," : "") + std::to_string(sizes[i]);
    }
    return s;
}

int cmd_ingest(const RunConfig& cfg) {
    const auto data = read_input(cfg);
    auto out = open_output(cfg.output);
    save_snapshot(out, data.dataset, data.vocabulary);
    std::cout << "rows=" << data.dataset.rows() << " cols=" << data.dataset.cols() << " nnz=" << data.dataset.nnz()
              << '\n';
    return 0;
}

int cmd_cluster(const RunConfig& cfg) {
    const auto data = read_input(cfg);
    if (cfg.k > data.dataset.cols()) {
        throw Error(ErrorKind::rank_infeasible, "k=" + std::to_string(cfg.k) + " exceeds vocabulary size d=" +
                                                    std::to_string(data.dataset.cols()));
    }
    PipelineOptions options;
    options.em = cfg.em;
    const auto result = run_pipeline(data.dataset, cfg.k, options);

    const fs::path dir(cfg.output);
    fs::create_directories(dir);
    const ModelFile model{result.em.params, result.decomposition.anchor, data.vocabulary.codes()};
    open_output(dir / "model.json") << model_to_json(model).dump(2) << '\n';
    {
        auto out = open_output(dir / "assignments.csv");
        write_assignments(out, result.model, data.dataset);
    }
    const auto report = build_report(result.model, data.dataset, cfg.top_chart, cfg.top_heatmap);
    const auto table = relevance(result.model.params, cfg.lambda, cfg.em.prob_floor);
    open_output(dir / "report.json") << report_to_json(report, table, data.dataset, data.vocabulary,
                                                       cfg.top_relevance).dump(2)
                                     << '\n';
    open_output(dir / "trace.json") << trace_to_json(result.em.trace).dump(2) << '\n';

    std::printf("n=%zu d=%zu k=%zu\n", data.dataset.rows(), data.dataset.cols(), cfg.k);
    std::printf("sizes=%s\n", join_sizes(result.model.cluster_sizes).c_str());
    std::printf("anchor_feature=%s anchor_gap=%.6g\n", data.vocabulary.code(result.decomposition.anchor.feature).c_str(),
                result.decomposition.anchor.gap);
    std::printf("em_iterations=%zu converged=%s loglik=%.10g\n", result.em.trace.iterations,
                result.em.trace.converged ? "true" : "false", result.em.trace.loglik.back());
    std::printf("decomposition_seconds=%.4f em_seconds=%.4f\n", result.decomposition_seconds, result.em_seconds);
    return 0;
}

int cmd_report(const RunConfig& cfg, const std::string& model_path) {
    std::ifstream model_in(model_path);
    if (!model_in) {
        throw Error(ErrorKind::io, "cannot open model '" + model_path + "'");
    }
    const auto model = load_model(model_in);
    const auto data = read_input(cfg);
    // Align the input columns to the model's code order; unknown codes are ignored.
    const Vocabulary vocabulary(model.codes);
    std::vector<std::vector<std::uint32_t>> rows;
    for (std::size_t n = 0; n < data.dataset.rows(); ++n) {
        auto& row = rows.emplace_back();
        for (const auto c : data.dataset.row(n)) {
            if (const auto col = vocabulary.find(data.vocabulary.code(c))) {
                row.push_back(static_cast<std::uint32_t>(*col));
            }
        }
    }
    const BinaryDataset aligned(vocabulary.size(), rows, data.dataset.row_ids());
    const auto clusters = assign(model.params, aligned, cfg.em.prob_floor);
    const auto report = build_report(clusters, aligned, cfg.top_chart, cfg.top_heatmap);
    const auto table = relevance(model.params, cfg.lambda, cfg.em.prob_floor);
    open_output(cfg.output) << report_to_json(report, table, aligned, vocabulary, cfg.top_relevance).dump(2) << '\n';
    std::printf("sizes=%s\n", join_sizes(clusters.cluster_sizes).c_str());
    return 0;
}

int cmd_stability(const RunConfig& cfg, double overlap, bool duplicate) {
    const auto data = read_input(cfg);
    PipelineOptions options;
    options.em = cfg.em;
    const double ari = duplicate ? stability_check(data.dataset, duplicate_split(data.dataset), cfg.k, options)
                                 : stability_check(data.dataset, cfg.k, overlap, cfg.seed, options);
    std::printf("%.12g\n", ari);
    return 0;
}

GridPoint parse_grid_point(const std::string& text) {
    GridPoint p;
    char x1 = 0;
    char x2 = 0;
    std::istringstream in(text);
    if (!(in >> p.n >> x1 >> p.d >> x2 >> p.k) || x1 != 'x' || x2 != 'x' || !in.eof()) {
        throw Error(ErrorKind::parse, "grid point '" + text + "' is not NxDxK");
    }
    return p;
}

int cmd_benchmark(const std::vector<std::string>& grid, std::size_t seeds, std::uint64_t base_seed,
                  const RunConfig& cfg) {
    PipelineOptions options;
    options.em = cfg.em;
    std::vector<GridPoint> points;
    for (const auto& g : grid) {
        points.push_back(parse_grid_point(g));
    }
    auto out = open_output(cfg.output);
    write_benchmark_header(out);
    write_benchmark_header(std::cout);
    for (const auto& p : points) {
        const auto row = run_benchmark_point(p, seeds, base_seed, options);
        write_benchmark_row(out, row);
        write_benchmark_row(std::cout, row);
    }
    return 0;
}

int cmd_synth(std::size_t d, std::size_t k, std::size_t n, std::uint64_t seed, const std::string& out_path,
              const std::string& labels_path) {
    const auto sample = generate_synthetic(d, k, n, seed);
    const int width = static_cast<int>(std::to_string(d > 0 ? d - 1 : 0).size());
    auto out = open_output(out_path);
    char code[32];
    for (std::size_t r = 0; r < sample.dataset.rows(); ++r) {
        out << 'r' << r << ';';
        bool first = true;
        for (const auto c : sample.dataset.row(r)) {
            std::snprintf(code, sizeof code, "F%0*u", width, static_cast<unsigned>(c));
            out << (first ? "" : ",") << code;
            first = false;
        }
        out << '\n';
    }
    if (!labels_path.empty()) {
        auto labels = open_output(labels_path);
        for (std::size_t r = 0; r < sample.truth.labels.size(); ++r) {
            labels << 'r' << r << ',' << sample.truth.labels[r] << '\n';
        }
    }
    return 0;
}

int cmd_serve(const std::string& host, int port, std::size_t max_upload) {
    Service::Options options;
    options.max_upload_bytes = max_upload;
    Service service(options);
    httplib::Server server;
    service.mount(server);
    std::printf("listening on %s:%d\n", host.c_str(), port);
    std::fflush(stdout);
    if (!server.listen(host, port)) {
        throw Error(ErrorKind::io, "cannot listen on " + host + ":" + std::to_string(port));
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bernoulli-mixture clustering of sparse binary records via moment tensors"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto* ingest_cmd = app.add_subcommand("ingest", "Parse records into a dataset snapshot");
    add_input_flags(ingest_cmd, cfg);
    ingest_cmd->add_option("--out", cfg.output, "Snapshot JSON path")->required();

    auto* cluster_cmd = app.add_subcommand("cluster", "ASVTD + EM clustering with reports");
    cluster_cmd->add_option("--k", cfg.k, "Number of clusters")->required()->check(CLI::PositiveNumber);
    add_input_flags(cluster_cmd, cfg);
    add_em_flags(cluster_cmd, cfg);
    add_report_flags(cluster_cmd, cfg);
    cluster_cmd->add_option("--out", cfg.output, "Output directory")->required();

    std::string model_path;
    auto* report_cmd = app.add_subcommand("report", "Rebuild report.json from a saved model");
    report_cmd->add_option("--model", model_path, "model.json from a cluster run")->required();
    add_input_flags(report_cmd, cfg);
    add_report_flags(report_cmd, cfg);
    report_cmd->add_option("--prob-floor", cfg.em.prob_floor, "Keep means in [eps, 1 - eps]")->capture_default_str();
    report_cmd->add_option("--out", cfg.output, "Report JSON path")->required();

    double overlap = 0.5;
    bool duplicate = false;
    auto* stability_cmd = app.add_subcommand("stability", "Split-half stability (adjusted Rand index)");
    stability_cmd->add_option("--k", cfg.k, "Number of clusters")->required()->check(CLI::PositiveNumber);
    add_input_flags(stability_cmd, cfg);
    add_em_flags(stability_cmd, cfg);
    stability_cmd->add_option("--overlap", overlap, "Shared fraction of rows, in (0, 1)")->capture_default_str();
    stability_cmd->add_option("--seed", cfg.seed, "Split seed")->capture_default_str();
    stability_cmd->add_flag("--duplicate-split", duplicate, "Use the full dataset for both arms");

    std::vector<std::string> grid;
    std::size_t seeds = 5;
    std::uint64_t base_seed = 0;
    auto* bench_cmd = app.add_subcommand("benchmark", "Synthetic ARI benchmark against k-means");
    bench_cmd->add_option("--grid", grid, "Grid points NxDxK, e.g. 10000x99x12");
    bench_cmd->add_option("--seeds", seeds, "Seeds per grid point")->capture_default_str();
    bench_cmd->add_option("--base-seed", base_seed, "First seed")->capture_default_str();
    add_em_flags(bench_cmd, cfg);
    bench_cmd->add_option("--out", cfg.output, "CSV table path")->required();

    std::size_t synth_d = 99;
    std::size_t synth_k = 12;
    std::size_t synth_n = 10000;
    std::string labels_path;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic exponential mixture as records");
    synth_cmd->add_option("--d", synth_d, "Features")->capture_default_str();
    synth_cmd->add_option("--k", synth_k, "Components")->capture_default_str();
    synth_cmd->add_option("--n", synth_n, "Rows")->capture_default_str();
    synth_cmd->add_option("--seed", cfg.seed, "Seed")->capture_default_str();
    synth_cmd->add_option("--out", cfg.output, "Records path")->required();
    synth_cmd->add_option("--labels", labels_path, "Optional ground-truth labels CSV");

    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_upload = std::size_t{64} << 20;
    auto* serve_cmd = app.add_subcommand("serve", "HTTP service for the exploration frontend");
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--port", port)->capture_default_str();
    serve_cmd->add_option("--max-upload", max_upload, "Upload size cap in bytes")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        validate(cfg.em);
        if (*ingest_cmd) return cmd_ingest(cfg);
        if (*cluster_cmd) return cmd_cluster(cfg);
        if (*report_cmd) return cmd_report(cfg, model_path);
        if (*stability_cmd) return cmd_stability(cfg, overlap, duplicate);
        if (*bench_cmd) return cmd_benchmark(grid, seeds, base_seed, cfg);
        if (*synth_cmd) return cmd_synth(synth_d, synth_k, synth_n, cfg.seed, cfg.output, labels_path);
        if (*serve_cmd) return cmd_serve(host, port, max_upload);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
        return is_numerical(e.kind()) ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
        return 2;
    }
    return 0;
}
