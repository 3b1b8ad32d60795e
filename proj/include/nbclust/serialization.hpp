#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "nbclust/analysis.hpp"
#include "nbclust/dataset.hpp"
#include "nbclust/decomposition.hpp"
#include "nbclust/em.hpp"
#include "nbclust/error.hpp"

namespace nbclust {

using Json = nlohmann::ordered_json;

inline constexpr const char* dataset_format = "nbclust.dataset/1";
inline constexpr const char* model_format = "nbclust.model/1";
inline constexpr int report_digits = 12;

/// `value` rounded to `digits` significant decimal digits.
inline double round_significant(double value, int digits = report_digits) {
    if (!std::isfinite(value) || value == 0.0) {
        return value;
    }
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.*g", digits, value);
    return std::strtod(buffer, nullptr);
}

namespace detail {

inline Json parse_json(std::istream& in, const char* what) {
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, std::string(what) + ": " + e.what());
    }
}

template <typename T> T field(const Json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse, std::string("field '") + key + "': " + e.what());
    }
}

inline void expect_format(const Json& j, const char* format) {
    if (field<std::string>(j, "format") != format) {
        throw Error(ErrorKind::parse, std::string("expected format ") + format);
    }
}

inline Json matrix_rows(const Eigen::MatrixXd& m) {
    Json flat = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            flat.push_back(m(i, j));
        }
    }
    return flat;
}

inline Eigen::MatrixXd matrix_from_rows(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
    if (flat.size() != rows * cols) {
        throw Error(ErrorKind::parse, "matrix payload has " + std::to_string(flat.size()) + " entries, expected " +
                                          std::to_string(rows * cols));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * cols + j];
        }
    }
    return m;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Dataset snapshot

inline Json snapshot_to_json(const BinaryDataset& data, const Vocabulary& vocabulary) {
    Json j;
    j["format"] = dataset_format;
    j["rows"] = data.rows();
    j["cols"] = data.cols();
    j["vocabulary"] = vocabulary.codes();
    j["row_ids"] = data.row_ids();
    Json positions = Json::array();
    for (std::size_t n = 0; n < data.rows(); ++n) {
        const auto r = data.row(n);
        positions.push_back(std::vector<std::uint32_t>(r.begin(), r.end()));
    }
    j["positions"] = std::move(positions);
    return j;
}

inline IngestResult snapshot_from_json(const Json& j) {
    detail::expect_format(j, dataset_format);
    const auto rows = detail::field<std::size_t>(j, "rows");
    const auto cols = detail::field<std::size_t>(j, "cols");
    auto codes = detail::field<std::vector<std::string>>(j, "vocabulary");
    auto ids = detail::field<std::vector<std::string>>(j, "row_ids");
    const auto positions = detail::field<std::vector<std::vector<std::uint32_t>>>(j, "positions");
    if (positions.size() != rows || ids.size() != rows || codes.size() != cols) {
        throw Error(ErrorKind::parse, "snapshot dimensions are inconsistent");
    }
    Vocabulary vocabulary(codes);
    if (vocabulary.codes() != codes) {
        throw Error(ErrorKind::parse, "snapshot vocabulary must be sorted and unique");
    }
    try {
        return {BinaryDataset(cols, positions, std::move(ids)), std::move(vocabulary)};
    } catch (const Error& e) {
        throw Error(ErrorKind::parse, std::string("snapshot positions: ") + e.what());
    }
}

inline void save_snapshot(std::ostream& out, const BinaryDataset& data, const Vocabulary& vocabulary) {
    out << snapshot_to_json(data, vocabulary).dump() << '\n';
}

inline IngestResult load_snapshot(std::istream& in) {
    return snapshot_from_json(detail::parse_json(in, "dataset snapshot"));
}

// ---------------------------------------------------------------------------
// Model file

struct ModelFile {
    MixtureParams params;
    AnchorChoice anchor;
    std::vector<std::string> codes; ///< column labels, d entries
};

/// Doubles are written in shortest round-trip form, so a reload is bit-exact.
inline Json model_to_json(const ModelFile& model) {
    Json j;
    j["format"] = model_format;
    j["d"] = model.params.features();
    j["k"] = model.params.components();
    j["codes"] = model.codes;
    j["weights"] = std::vector<double>(model.params.weights.data(),
                                       model.params.weights.data() + model.params.weights.size());
    j["means"] = detail::matrix_rows(model.params.means);
    Json anchor;
    anchor["feature"] = model.anchor.feature;
    if (std::isfinite(model.anchor.gap)) {
        anchor["gap"] = model.anchor.gap;
    } else {
        anchor["gap"] = nullptr; // k = 1: no pairs, gap is +inf
    }
    anchor["rotation"] = detail::matrix_rows(model.anchor.rotation);
    j["anchor"] = std::move(anchor);
    return j;
}

inline ModelFile model_from_json(const Json& j) {
    detail::expect_format(j, model_format);
    const auto d = detail::field<std::size_t>(j, "d");
    const auto k = detail::field<std::size_t>(j, "k");
    ModelFile model;
    model.codes = detail::field<std::vector<std::string>>(j, "codes");
    if (model.codes.size() != d) {
        throw Error(ErrorKind::parse, "model codes do not match d");
    }
    const auto weights = detail::field<std::vector<double>>(j, "weights");
    if (weights.size() != k) {
        throw Error(ErrorKind::parse, "model weights do not match k");
    }
    model.params.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(k));
    model.params.means = detail::matrix_from_rows(detail::field<std::vector<double>>(j, "means"), d, k);
    const Json& anchor = j.at("anchor");
    model.anchor.feature = detail::field<std::size_t>(anchor, "feature");
    model.anchor.gap = anchor.at("gap").is_null() ? std::numeric_limits<double>::infinity()
                                                  : detail::field<double>(anchor, "gap");
    model.anchor.rotation = detail::matrix_from_rows(detail::field<std::vector<double>>(anchor, "rotation"), k, k);
    try {
        validate(model.params, 1e-6);
    } catch (const Error& e) {
        throw Error(ErrorKind::parse, std::string("model parameters: ") + e.what());
    }
    return model;
}

inline ModelFile load_model(std::istream& in) { return model_from_json(detail::parse_json(in, "model file")); }

// ---------------------------------------------------------------------------
// Report payload

inline constexpr std::size_t default_top_relevance = 10;

/**
 * JSON-shaped report shared by the CLI and the HTTP service:
 * `sizes`, `frequency_chart`, `heatmap` (one block per cluster) and
 * `relevance` (per-cluster ranked codes). Every double is rounded to 12
 * significant digits.
 */
inline Json report_to_json(const ClusterReport& report, const RelevanceTable& table, const BinaryDataset& data,
                           const Vocabulary& vocabulary, std::size_t top_relevance = default_top_relevance) {
    const auto r = [](double v) { return round_significant(v); };
    Json j;
    j["k"] = report.sizes.size();
    j["n"] = data.rows();
    j["d"] = data.cols();
    j["sizes"] = report.sizes;

    Json chart = Json::array();
    for (const auto& row : report.frequency_chart) {
        Json entry;
        entry["code"] = vocabulary.code(row.feature);
        entry["overall"] = r(row.overall);
        Json ratios = Json::array();
        for (const double v : row.per_cluster) {
            ratios.push_back(r(v));
        }
        entry["per_cluster"] = std::move(ratios);
        chart.push_back(std::move(entry));
    }
    j["frequency_chart"] = std::move(chart);

    Json heatmap;
    Json columns = Json::array();
    for (const auto c : report.heatmap_columns) {
        columns.push_back(vocabulary.code(c));
    }
    heatmap["columns"] = std::move(columns);
    Json blocks = Json::array();
    for (std::size_t cluster = 0; cluster < report.sizes.size(); ++cluster) {
        Json block;
        block["cluster"] = cluster;
        block["rows"] = Json::array();
        blocks.push_back(std::move(block));
    }
    for (const auto& row : report.heatmap) {
        Json entry;
        entry["row_id"] = data.row_id(row.row);
        entry["cells"] = row.cells;
        blocks[row.cluster]["rows"].push_back(std::move(entry));
    }
    heatmap["blocks"] = std::move(blocks);
    j["heatmap"] = std::move(heatmap);

    Json relevance;
    relevance["lambda"] = r(table.lambda);
    Json clusters = Json::array();
    for (std::size_t cluster = 0; cluster < table.top_lists.size(); ++cluster) {
        Json ranked = Json::array();
        const auto& order = table.top_lists[cluster];
        for (std::size_t i = 0; i < std::min(top_relevance, order.size()); ++i) {
            Json entry;
            entry["code"] = vocabulary.code(order[i]);
            entry["score"] =
                r(table.scores(static_cast<Eigen::Index>(order[i]), static_cast<Eigen::Index>(cluster)));
            ranked.push_back(std::move(entry));
        }
        clusters.push_back(std::move(ranked));
    }
    relevance["clusters"] = std::move(clusters);
    j["relevance"] = std::move(relevance);
    return j;
}

inline Json trace_to_json(const EmTrace& trace) {
    Json j;
    j["iterations"] = trace.iterations;
    j["converged"] = trace.converged;
    j["loglik"] = trace.loglik;
    j["omega_delta"] = trace.omega_delta;
    return j;
}

/// `row_id,cluster_index,max_posterior` lines, no header.
inline void write_assignments(std::ostream& out, const ClusterModel& model, const BinaryDataset& data) {
    char buffer[64];
    for (std::size_t n = 0; n < data.rows(); ++n) {
        const double top = model.posteriors.row(static_cast<Eigen::Index>(n)).maxCoeff();
        std::snprintf(buffer, sizeof buffer, "%.12g", top);
        out << data.row_id(n) << ',' << model.assignments[n] << ',' << buffer << '\n';
    }
}

} // namespace nbclust
