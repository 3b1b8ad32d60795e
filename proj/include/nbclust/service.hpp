#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that breaks
// Eigen's kernels.
#include <Eigen/Dense>

#include "httplib.h"
#include "json.hpp"

#include "nbclust/analysis.hpp"
#include "nbclust/dataset.hpp"
#include "nbclust/error.hpp"
#include "nbclust/pipeline.hpp"
#include "nbclust/serialization.hpp"

namespace nbclust {

enum class RunStatus { queued, running, done, failed };

constexpr std::string_view to_string(RunStatus status) noexcept {
    switch (status) {
    case RunStatus::queued: return "queued";
    case RunStatus::running: return "running";
    case RunStatus::done: return "done";
    case RunStatus::failed: return "failed";
    }
    return "unknown";
}

/// Optional code include/exclude lists applied before clustering.
struct FeatureFilter {
    std::vector<std::string> include; ///< empty = keep all
    std::vector<std::string> exclude;
};

/// Rebuilds a dataset keeping only the codes the filter admits, then drops
/// rows with fewer than `min_codes` remaining codes.
inline IngestResult apply_filter(const BinaryDataset& data, const Vocabulary& vocabulary,
                                 const FeatureFilter& filter, std::size_t min_codes) {
    std::set<std::string> include;
    std::set<std::string> exclude;
    for (const auto& c : filter.include) {
        include.insert(normalize_code(c));
    }
    for (const auto& c : filter.exclude) {
        exclude.insert(normalize_code(c));
    }
    auto records = to_records(data, vocabulary);
    for (auto& record : records) {
        std::erase_if(record.codes, [&](const std::string& code) {
            return (!include.empty() && !include.contains(code)) || exclude.contains(code);
        });
    }
    return ingest(records, min_codes);
}

/**
 * @brief HTTP front end with an in-memory, append-only run store.
 *
 * Datasets are immutable once uploaded. Each clustering run executes on its
 * own worker thread over an immutable snapshot and is polled through its
 * handle; a finished run never changes.
 */
class Service {
  public:
    struct Options {
        std::size_t max_upload_bytes = std::size_t{64} << 20;
        std::size_t default_min_codes = 3;
    };

    Service() : Service(Options{}) {}
    explicit Service(Options options) : options_(options) {}

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    ~Service() {
        std::vector<std::thread> workers;
        {
            std::lock_guard lock(mutex_);
            workers.swap(workers_);
        }
        for (auto& w : workers) {
            w.join();
        }
    }

    void mount(httplib::Server& server) {
        server.set_payload_max_length(options_.max_upload_bytes);
        // Errors raised by httplib itself (oversized body, unknown route) carry no body.
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (!res.body.empty()) {
                return httplib::Server::HandlerResponse::Unhandled;
            }
            switch (res.status) {
            case 413: send_error(res, 413, "payload_too_large", "request body exceeds the upload limit"); break;
            case 404: send_error(res, 404, "not_found", "no such route"); break;
            default: send_error(res, res.status, "http", httplib::status_message(res.status)); break;
            }
            return httplib::Server::HandlerResponse::Handled;
        });
        server.Post("/datasets", [this](const auto& req, auto& res) { guarded(res, [&] { post_dataset(req, res); }); });
        server.Get("/datasets/:id", [this](const auto& req, auto& res) { guarded(res, [&] { get_dataset(req, res); }); });
        server.Post("/datasets/:id/cluster",
                    [this](const auto& req, auto& res) { guarded(res, [&] { post_cluster(req, res); }); });
        server.Post("/datasets/:id/stability",
                    [this](const auto& req, auto& res) { guarded(res, [&] { post_stability(req, res); }); });
        server.Get("/runs/:id", [this](const auto& req, auto& res) { guarded(res, [&] { get_run(req, res); }); });
        server.Get("/runs/:id/report", [this](const auto& req, auto& res) { guarded(res, [&] { get_report(req, res); }); });
        server.Post("/runs/:id/subcluster",
                    [this](const auto& req, auto& res) { guarded(res, [&] { post_subcluster(req, res); }); });
    }

    /// Blocks until no run is queued or running, or the timeout passes.
    bool wait_idle(std::chrono::milliseconds timeout) {
        std::unique_lock lock(mutex_);
        return idle_.wait_for(lock, timeout, [this] { return active_ == 0; });
    }

    /// Writes every dataset snapshot and every finished model under `dir`.
    void write_snapshot(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        std::lock_guard lock(mutex_);
        for (const auto& [id, entry] : datasets_) {
            std::ofstream out(dir / (id + ".dataset.json"));
            save_snapshot(out, entry->data.dataset, entry->data.vocabulary);
        }
        for (const auto& [id, run] : runs_) {
            if (run->status != RunStatus::done) {
                continue;
            }
            std::ofstream out(dir / (id + ".model.json"));
            out << model_to_json(model_file(*run->result)).dump() << '\n';
        }
    }

  private:
    struct HttpError {
        int status;
        std::string code;
        std::string message;
    };

    struct DatasetEntry {
        std::string id;
        IngestResult data;
        std::string created_at;
    };

    struct RunResult {
        IngestResult data;
        PipelineResult pipeline;
    };

    struct Run {
        std::string id;
        std::string dataset_id;
        std::optional<std::string> parent;
        std::optional<std::size_t> parent_cluster;
        std::size_t k = 0;
        double lambda = default_lambda;
        std::string created_at;
        RunStatus status = RunStatus::queued;
        std::string error;
        std::shared_ptr<const IngestResult> input;
        std::shared_ptr<const RunResult> result;
    };

    static std::string now_utc() {
        const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buffer[32];
        std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buffer;
    }

    static int status_for(ErrorKind kind) {
        switch (kind) {
        case ErrorKind::parse:
        case ErrorKind::invalid_code:
            return 400;
        case ErrorKind::io:
            return 500;
        default:
            return 422;
        }
    }

    static void send_json(httplib::Response& res, int status, const Json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
        send_json(res, status, Json{{"code", code}, {"message", message}});
    }

    template <typename Fn> static void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const HttpError& e) {
            send_error(res, e.status, e.code, e.message);
        } catch (const Error& e) {
            send_error(res, status_for(e.kind()), to_string(e.kind()), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    }

    static Json parse_body(const httplib::Request& req) {
        if (req.body.empty()) {
            return Json::object();
        }
        try {
            auto body = Json::parse(req.body);
            if (!body.is_object()) {
                throw HttpError{400, "parse", "request body must be a JSON object"};
            }
            return body;
        } catch (const nlohmann::json::exception& e) {
            throw HttpError{400, "parse", std::string("invalid JSON body: ") + e.what()};
        }
    }

    template <typename T> static T body_field(const Json& body, const char* key, T fallback) {
        if (!body.contains(key) || body.at(key).is_null()) {
            return fallback;
        }
        try {
            return body.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw HttpError{400, "parse", std::string("field '") + key + "' has the wrong type"};
        }
    }

    template <typename T> static T query_number(const httplib::Request& req, const char* key, T fallback) {
        if (!req.has_param(key)) {
            return fallback;
        }
        const auto text = req.get_param_value(key);
        try {
            std::size_t used = 0;
            T value;
            if constexpr (std::is_floating_point_v<T>) {
                value = static_cast<T>(std::stod(text, &used));
            } else {
                if (!text.empty() && text.front() == '-') {
                    throw std::invalid_argument("negative");
                }
                value = static_cast<T>(std::stoull(text, &used));
            }
            if (used != text.size()) {
                throw std::invalid_argument("trailing");
            }
            return value;
        } catch (const std::exception&) {
            throw HttpError{400, "parse", std::string("query parameter '") + key + "' is not a valid number"};
        }
    }

    static FeatureFilter filter_from(const Json& body) {
        FeatureFilter filter;
        if (body.contains("feature_filter") && body.at("feature_filter").is_object()) {
            const auto& f = body.at("feature_filter");
            filter.include = body_field<std::vector<std::string>>(f, "include", {});
            filter.exclude = body_field<std::vector<std::string>>(f, "exclude", {});
        }
        return filter;
    }

    static EmConfig em_from(const Json& body) {
        EmConfig em;
        em.omega_tol = body_field<double>(body, "em_tol", em.omega_tol);
        em.max_iters = body_field<std::size_t>(body, "max_iters", em.max_iters);
        em.prob_floor = body_field<double>(body, "prob_floor", em.prob_floor);
        validate(em);
        return em;
    }

    static ModelFile model_file(const RunResult& result) {
        return {result.pipeline.em.params, result.pipeline.decomposition.anchor, result.data.vocabulary.codes()};
    }

    static Json dataset_summary(const DatasetEntry& entry) {
        const auto& data = entry.data.dataset;
        const auto counts = data.column_counts();
        Json preview = Json::array();
        for (const auto c : most_frequent_features(data, 10)) {
            preview.push_back({{"code", entry.data.vocabulary.code(c)},
                               {"count", counts[c]},
                               {"frequency", round_significant(static_cast<double>(counts[c]) /
                                                               static_cast<double>(data.rows()))}});
        }
        return {{"dataset_id", entry.id},
                {"n", data.rows()},
                {"d", data.cols()},
                {"created_at", entry.created_at},
                {"preview", std::move(preview)}};
    }

    Json run_handle(const Run& run) const {
        Json j{{"run_id", run.id},
               {"dataset_id", run.dataset_id},
               {"status", to_string(run.status)},
               {"created_at", run.created_at},
               {"k", run.k}};
        j["parent_run"] = run.parent ? Json(*run.parent) : Json(nullptr);
        j["parent_cluster"] = run.parent_cluster ? Json(*run.parent_cluster) : Json(nullptr);
        if (run.input) {
            j["n"] = run.input->dataset.rows();
            j["d"] = run.input->dataset.cols();
        }
        if (run.status == RunStatus::failed) {
            j["error"] = run.error;
        }
        if (run.result) {
            j["sizes"] = run.result->pipeline.model.cluster_sizes;
            j["em"] = {{"iterations", run.result->pipeline.em.trace.iterations},
                       {"converged", run.result->pipeline.em.trace.converged}};
        }
        return j;
    }

    std::shared_ptr<const DatasetEntry> find_dataset(const std::string& id) const {
        std::lock_guard lock(mutex_);
        const auto it = datasets_.find(id);
        if (it == datasets_.end()) {
            throw HttpError{404, "not_found", "unknown dataset '" + id + "'"};
        }
        return it->second;
    }

    std::shared_ptr<Run> find_run(const std::string& id) const {
        std::lock_guard lock(mutex_);
        const auto it = runs_.find(id);
        if (it == runs_.end()) {
            throw HttpError{404, "not_found", "unknown run '" + id + "'"};
        }
        return it->second;
    }

    /// Validates k against the run input, registers the run and starts it.
    Json launch(std::shared_ptr<Run> run, IngestResult input, const EmConfig& em) {
        if (run->k < 1) {
            throw HttpError{422, "parameter", "k must be at least 1"};
        }
        if (run->k > input.dataset.cols()) {
            throw HttpError{422, "rank_infeasible", "k=" + std::to_string(run->k) + " exceeds filtered feature count d=" +
                                                        std::to_string(input.dataset.cols())};
        }
        run->input = std::make_shared<const IngestResult>(std::move(input));
        run->created_at = now_utc();
        Json handle;
        std::lock_guard lock(mutex_);
        run->id = "run-" + std::to_string(++run_counter_);
        runs_.emplace(run->id, run);
        ++active_;
        handle = run_handle(*run);
        workers_.emplace_back([this, run, em] { execute(run, em); });
        return handle;
    }

    void execute(const std::shared_ptr<Run>& run, EmConfig em) {
        {
            std::lock_guard lock(mutex_);
            run->status = RunStatus::running;
        }
        std::shared_ptr<const RunResult> result;
        std::string error;
        try {
            PipelineOptions options;
            options.em = em;
            auto pipeline = run_pipeline(run->input->dataset, run->k, options);
            result = std::make_shared<const RunResult>(RunResult{*run->input, std::move(pipeline)});
        } catch (const std::exception& e) {
            error = e.what();
        }
        std::lock_guard lock(mutex_);
        if (result) {
            run->result = std::move(result);
            run->status = RunStatus::done;
        } else {
            run->error = error;
            run->status = RunStatus::failed;
        }
        --active_;
        idle_.notify_all();
    }

    void post_dataset(const httplib::Request& req, httplib::Response& res) {
        if (req.body.size() > options_.max_upload_bytes) {
            throw HttpError{413, "payload_too_large", "upload exceeds " + std::to_string(options_.max_upload_bytes) + " bytes"};
        }
        if (detail::trim(req.body).empty()) {
            throw HttpError{400, "parse", "empty upload"};
        }
        RecordFormat format;
        if (req.has_param("record_delim") && req.get_param_value("record_delim").size() == 1) {
            format.record_delim = req.get_param_value("record_delim")[0];
        }
        if (req.has_param("code_delim") && req.get_param_value("code_delim").size() == 1) {
            format.code_delim = req.get_param_value("code_delim")[0];
        }
        const auto min_codes = query_number<std::size_t>(req, "min_codes", options_.default_min_codes);
        std::istringstream in(req.body);
        auto records = parse_records(in, format);
        std::shared_ptr<DatasetEntry> entry;
        try {
            entry = std::make_shared<DatasetEntry>(DatasetEntry{"", ingest(records, min_codes), now_utc()});
        } catch (const Error& e) {
            throw HttpError{400, std::string(to_string(e.kind())), e.what()};
        }
        {
            std::lock_guard lock(mutex_);
            entry->id = "ds-" + std::to_string(++dataset_counter_);
            datasets_.emplace(entry->id, entry);
        }
        send_json(res, 201, dataset_summary(*entry));
    }

    void get_dataset(const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, dataset_summary(*find_dataset(req.path_params.at("id"))));
    }

    void post_cluster(const httplib::Request& req, httplib::Response& res) {
        const auto dataset = find_dataset(req.path_params.at("id"));
        const auto body = parse_body(req);
        auto run = std::make_shared<Run>();
        run->dataset_id = dataset->id;
        run->k = body_field<std::size_t>(body, "k", 0);
        run->lambda = body_field<double>(body, "lambda", default_lambda);
        if (!(run->lambda >= 0.0 && run->lambda <= 1.0)) {
            throw HttpError{422, "parameter", "lambda must lie in [0, 1]"};
        }
        const auto em = em_from(body);
        auto input = apply_filter(dataset->data.dataset, dataset->data.vocabulary, filter_from(body),
                                  body_field<std::size_t>(body, "min_codes", 0));
        send_json(res, 202, launch(std::move(run), std::move(input), em));
    }

    void get_run(const httplib::Request& req, httplib::Response& res) {
        const auto run = find_run(req.path_params.at("id"));
        std::lock_guard lock(mutex_);
        send_json(res, 200, run_handle(*run));
    }

    std::shared_ptr<const RunResult> finished(const Run& run) const {
        std::lock_guard lock(mutex_);
        if (run.status != RunStatus::done) {
            throw HttpError{409, "conflict", "run '" + run.id + "' is " + std::string(to_string(run.status))};
        }
        return run.result;
    }

    void get_report(const httplib::Request& req, httplib::Response& res) {
        const auto run = find_run(req.path_params.at("id"));
        const auto result = finished(*run);
        const auto top_chart = query_number<std::size_t>(req, "top_chart", default_top_chart);
        const auto top_heatmap = query_number<std::size_t>(req, "top_heatmap", default_top_heatmap);
        const auto top_relevance = query_number<std::size_t>(req, "top_relevance", default_top_relevance);
        const auto lambda = query_number<double>(req, "lambda", run->lambda);
        const auto& data = result->data;
        const auto& model = result->pipeline.model;
        const auto report = build_report(model, data.dataset, top_chart, top_heatmap);
        if (!(lambda >= 0.0 && lambda <= 1.0)) {
            throw HttpError{422, "parameter", "lambda must lie in [0, 1]"};
        }
        const auto table = relevance(model.params, lambda);
        auto payload = report_to_json(report, table, data.dataset, data.vocabulary, top_relevance);
        payload["run_id"] = run->id;
        send_json(res, 200, payload);
    }

    void post_subcluster(const httplib::Request& req, httplib::Response& res) {
        const auto parent = find_run(req.path_params.at("id"));
        const auto body = parse_body(req);
        const auto result = finished(*parent);
        if (!body.contains("cluster_index")) {
            throw HttpError{400, "parse", "missing cluster_index"};
        }
        const auto cluster = body_field<std::size_t>(body, "cluster_index", 0);
        const auto& model = result->pipeline.model;
        if (cluster >= model.params.components()) {
            throw HttpError{422, "parameter", "cluster_index " + std::to_string(cluster) + " >= parent k=" +
                                                  std::to_string(model.params.components())};
        }
        if (model.cluster_sizes[cluster] == 0) {
            throw HttpError{422, "empty_cluster", "cluster " + std::to_string(cluster) + " has no rows"};
        }
        std::vector<std::size_t> rows;
        for (std::size_t n = 0; n < model.assignments.size(); ++n) {
            if (model.assignments[n] == cluster) {
                rows.push_back(n);
            }
        }
        const auto members = result->data.dataset.subset(rows);
        auto run = std::make_shared<Run>();
        run->dataset_id = parent->dataset_id;
        run->parent = parent->id;
        run->parent_cluster = cluster;
        run->k = body_field<std::size_t>(body, "k", 0);
        run->lambda = body_field<double>(body, "lambda", parent->lambda);
        const auto em = em_from(body);
        auto input =
            apply_filter(members, result->data.vocabulary, filter_from(body), body_field<std::size_t>(body, "min_codes", 0));
        send_json(res, 202, launch(std::move(run), std::move(input), em));
    }

    void post_stability(const httplib::Request& req, httplib::Response& res) {
        const auto dataset = find_dataset(req.path_params.at("id"));
        const auto body = parse_body(req);
        const auto k = body_field<std::size_t>(body, "k", 0);
        const auto overlap = body_field<double>(body, "overlap", 0.5);
        const auto seed = body_field<std::uint64_t>(body, "seed", 0);
        PipelineOptions options;
        options.em = em_from(body);
        const auto& data = dataset->data.dataset;
        if (k < 1 || k > data.cols()) {
            throw HttpError{422, "rank_infeasible", "k must lie in [1, d]"};
        }
        const double ari = body_field<bool>(body, "duplicate_split", false)
                               ? stability_check(data, duplicate_split(data), k, options)
                               : stability_check(data, k, overlap, seed, options);
        send_json(res, 200, {{"dataset_id", dataset->id}, {"k", k}, {"overlap", overlap}, {"seed", seed},
                             {"ari", round_significant(ari)}});
    }

    Options options_;
    mutable std::mutex mutex_;
    std::condition_variable idle_;
    std::map<std::string, std::shared_ptr<const DatasetEntry>> datasets_;
    std::map<std::string, std::shared_ptr<Run>> runs_;
    std::vector<std::thread> workers_;
    std::size_t dataset_counter_ = 0;
    std::size_t run_counter_ = 0;
    std::size_t active_ = 0;
};

} // namespace nbclust
