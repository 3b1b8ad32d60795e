#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "nbclust/error.hpp"
#include "nbclust/mixture.hpp"
#include "nbclust/random.hpp"

namespace nbclust {

/**
 * @brief Ordered set of normalized codes with a code -> column index.
 *
 * Codes are kept in lexicographic order, so column j always holds the j-th
 * smallest code. Ties anywhere in reporting therefore break by index, which is
 * the same as breaking by code.
 */
class Vocabulary {
  public:
    Vocabulary() = default;

    /// Builds from arbitrary codes; duplicates are merged and the result sorted.
    explicit Vocabulary(std::vector<std::string> codes) : codes_(std::move(codes)) {
        std::sort(codes_.begin(), codes_.end());
        codes_.erase(std::unique(codes_.begin(), codes_.end()), codes_.end());
        index_.reserve(codes_.size());
        for (std::size_t i = 0; i < codes_.size(); ++i) {
            index_.emplace(codes_[i], i);
        }
    }

    std::size_t size() const { return codes_.size(); }
    const std::vector<std::string>& codes() const { return codes_; }
    const std::string& code(std::size_t column) const { return codes_.at(column); }

    std::optional<std::size_t> find(std::string_view code) const {
        const auto it = index_.find(std::string(code));
        if (it == index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    bool operator==(const Vocabulary& other) const { return codes_ == other.codes_; }

  private:
    std::vector<std::string> codes_;
    std::unordered_map<std::string, std::size_t> index_;
};

/**
 * @brief N x d sparse 0/1 matrix stored as sorted per-row column lists.
 *
 * Immutable after construction. Row identifiers are carried verbatim so that
 * reports can refer back to the external records.
 */
class BinaryDataset {
  public:
    BinaryDataset() = default;

    /// `rows[n]` lists the columns holding a one in row n, in any order.
    /// Throws an input error on out-of-range or repeated columns.
    BinaryDataset(std::size_t cols, const std::vector<std::vector<std::uint32_t>>& rows,
                  std::vector<std::string> row_ids = {})
        : cols_(cols), row_ids_(std::move(row_ids)) {
        if (!row_ids_.empty() && row_ids_.size() != rows.size()) {
            throw Error(ErrorKind::input, "row id count does not match row count");
        }
        if (row_ids_.empty()) {
            row_ids_.reserve(rows.size());
            for (std::size_t n = 0; n < rows.size(); ++n) {
                row_ids_.push_back(std::to_string(n));
            }
        }
        offsets_.reserve(rows.size() + 1);
        for (const auto& row : rows) {
            std::vector<std::uint32_t> sorted(row);
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
                throw Error(ErrorKind::input, "duplicate position in row");
            }
            if (!sorted.empty() && sorted.back() >= cols_) {
                throw Error(ErrorKind::input, "column " + std::to_string(sorted.back()) +
                                                  " out of range for d=" + std::to_string(cols_));
            }
            indices_.insert(indices_.end(), sorted.begin(), sorted.end());
            offsets_.push_back(indices_.size());
        }
    }

    /// Convenience for small fixtures: any nonzero entry counts as a one.
    static BinaryDataset from_dense(const std::vector<std::vector<int>>& dense) {
        const std::size_t cols = dense.empty() ? 0 : dense.front().size();
        std::vector<std::vector<std::uint32_t>> rows;
        rows.reserve(dense.size());
        for (const auto& values : dense) {
            if (values.size() != cols) {
                throw Error(ErrorKind::input, "ragged dense fixture");
            }
            auto& row = rows.emplace_back();
            for (std::size_t j = 0; j < cols; ++j) {
                if (values[j] != 0) {
                    row.push_back(static_cast<std::uint32_t>(j));
                }
            }
        }
        return BinaryDataset(cols, rows);
    }

    std::size_t rows() const { return offsets_.size() - 1; }
    std::size_t cols() const { return cols_; }
    std::size_t nnz() const { return indices_.size(); }
    bool empty() const { return rows() == 0; }

    std::span<const std::uint32_t> row(std::size_t n) const {
        return {indices_.data() + offsets_[n], offsets_[n + 1] - offsets_[n]};
    }

    const std::string& row_id(std::size_t n) const { return row_ids_[n]; }
    const std::vector<std::string>& row_ids() const { return row_ids_; }

    bool contains(std::size_t n, std::size_t col) const {
        const auto r = row(n);
        return std::binary_search(r.begin(), r.end(), static_cast<std::uint32_t>(col));
    }

    /// Number of ones in each column.
    std::vector<std::size_t> column_counts() const {
        std::vector<std::size_t> counts(cols_, 0);
        for (const auto c : indices_) {
            ++counts[c];
        }
        return counts;
    }

    /// Rows `selected` (in the given order) as a new dataset over the same columns.
    BinaryDataset subset(std::span<const std::size_t> selected) const {
        std::vector<std::vector<std::uint32_t>> rows;
        std::vector<std::string> ids;
        rows.reserve(selected.size());
        ids.reserve(selected.size());
        for (const auto n : selected) {
            if (n >= this->rows()) {
                throw Error(ErrorKind::input, "subset row " + std::to_string(n) + " out of range");
            }
            const auto r = row(n);
            rows.emplace_back(r.begin(), r.end());
            ids.push_back(row_ids_[n]);
        }
        return BinaryDataset(cols_, rows, std::move(ids));
    }

    Eigen::MatrixXd to_dense() const {
        Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()),
                                                      static_cast<Eigen::Index>(cols_));
        for (std::size_t n = 0; n < rows(); ++n) {
            for (const auto c : row(n)) {
                dense(static_cast<Eigen::Index>(n), c) = 1.0;
            }
        }
        return dense;
    }

    bool operator==(const BinaryDataset& other) const {
        return cols_ == other.cols_ && offsets_ == other.offsets_ && indices_ == other.indices_ &&
               row_ids_ == other.row_ids_;
    }

  private:
    std::size_t cols_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> indices_;
    std::vector<std::string> row_ids_;
};

/// Rows of a dataset regrouped by column: `rows_of(i)` lists the rows where
/// feature i is one, ascending.
class ColumnIndex {
  public:
    explicit ColumnIndex(const BinaryDataset& data) : offsets_(data.cols() + 1, 0) {
        for (std::size_t n = 0; n < data.rows(); ++n) {
            for (const auto c : data.row(n)) {
                ++offsets_[c + 1];
            }
        }
        for (std::size_t c = 0; c < data.cols(); ++c) {
            offsets_[c + 1] += offsets_[c];
        }
        rows_.resize(data.nnz());
        std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
        for (std::size_t n = 0; n < data.rows(); ++n) {
            for (const auto c : data.row(n)) {
                rows_[cursor[c]++] = static_cast<std::uint32_t>(n);
            }
        }
    }

    std::size_t cols() const { return offsets_.size() - 1; }

    std::span<const std::uint32_t> rows_of(std::size_t col) const {
        return {rows_.data() + offsets_[col], offsets_[col + 1] - offsets_[col]};
    }

  private:
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> rows_;
};

// ---------------------------------------------------------------------------
// Ingestion

namespace detail {

inline void require_rows(const BinaryDataset& data) {
    if (data.empty()) {
        throw Error(ErrorKind::empty_dataset, "dataset has no rows");
    }
}

} // namespace detail

/// One input record: an external identifier and its raw codes.
struct Record {
    std::string row_id;
    std::vector<std::string> codes;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n\f\v";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char delim) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(delim, start);
        if (pos == std::string_view::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace detail

/// Reduces a hierarchical code such as "428.21" to its general part: the text
/// before the first '.', cut to at most three characters. Case is preserved.
inline std::string normalize_code(std::string_view raw) {
    const auto trimmed = detail::trim(raw);
    if (trimmed.empty()) {
        throw Error(ErrorKind::invalid_code, "empty code");
    }
    auto general = trimmed.substr(0, trimmed.find('.'));
    general = detail::trim(general.substr(0, std::min<std::size_t>(3, general.size())));
    if (general.empty()) {
        throw Error(ErrorKind::invalid_code, "code '" + std::string(trimmed) + "' has no general part");
    }
    return std::string(general);
}

struct IngestResult {
    BinaryDataset dataset;
    Vocabulary vocabulary;
};

/**
 * Builds the binary matrix from bag-of-codes records.
 *
 * Codes are normalized and deduplicated per record; records with fewer than
 * `min_codes` distinct normalized codes are dropped. Retained rows keep their
 * input order and the vocabulary covers exactly the codes they use.
 */
inline IngestResult ingest(const std::vector<Record>& records, std::size_t min_codes = 3) {
    std::vector<const Record*> kept;
    std::vector<std::set<std::string>> kept_codes;
    for (const auto& record : records) {
        std::set<std::string> codes;
        for (const auto& raw : record.codes) {
            codes.insert(normalize_code(raw));
        }
        if (codes.size() >= min_codes) {
            kept.push_back(&record);
            kept_codes.push_back(std::move(codes));
        }
    }
    if (kept.empty()) {
        throw Error(ErrorKind::empty_dataset, "no records retained (input " + std::to_string(records.size()) +
                                                  ", min_codes " + std::to_string(min_codes) + ")");
    }
    std::vector<std::string> all;
    for (const auto& codes : kept_codes) {
        all.insert(all.end(), codes.begin(), codes.end());
    }
    Vocabulary vocabulary(std::move(all));

    std::vector<std::vector<std::uint32_t>> rows;
    std::vector<std::string> ids;
    rows.reserve(kept.size());
    ids.reserve(kept.size());
    for (std::size_t n = 0; n < kept.size(); ++n) {
        auto& row = rows.emplace_back();
        for (const auto& code : kept_codes[n]) {
            row.push_back(static_cast<std::uint32_t>(*vocabulary.find(code)));
        }
        ids.push_back(kept[n]->row_id);
    }
    return {BinaryDataset(vocabulary.size(), rows, std::move(ids)), std::move(vocabulary)};
}

struct RecordFormat {
    char record_delim = ';';
    char code_delim = ',';
};

/// Parses `row_id;code,code,...` lines. Blank lines are skipped; a line
/// without the record delimiter or with an empty id is a parse error.
inline std::vector<Record> parse_records(std::istream& in, RecordFormat format = {}) {
    std::vector<Record> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = detail::trim(line);
        if (text.empty()) {
            continue;
        }
        const auto pos = text.find(format.record_delim);
        if (pos == std::string_view::npos) {
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": missing '" +
                                              std::string(1, format.record_delim) + "' after row id");
        }
        const auto id = detail::trim(text.substr(0, pos));
        if (id.empty()) {
            throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": empty row id");
        }
        Record record{std::string(id), {}};
        const auto body = detail::trim(text.substr(pos + 1));
        if (!body.empty()) {
            for (const auto part : detail::split(body, format.code_delim)) {
                const auto code = detail::trim(part);
                if (code.empty()) {
                    throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": empty code");
                }
                record.codes.emplace_back(code);
            }
        }
        records.push_back(std::move(record));
    }
    return records;
}

/// Inverse of ingest for a dataset's rows: one record per row using the
/// vocabulary codes.
inline std::vector<Record> to_records(const BinaryDataset& data, const Vocabulary& vocabulary) {
    std::vector<Record> records;
    records.reserve(data.rows());
    for (std::size_t n = 0; n < data.rows(); ++n) {
        Record record{data.row_id(n), {}};
        for (const auto c : data.row(n)) {
            record.codes.push_back(vocabulary.code(c));
        }
        records.push_back(std::move(record));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct GroundTruth {
    MixtureParams params;
    std::vector<std::size_t> labels;
};

struct SyntheticSample {
    BinaryDataset dataset;
    GroundTruth truth;
};

/// Draws `n` rows from the mixture: Y ~ weights, then x_i ~ Bernoulli(means(i, Y)).
inline SyntheticSample sample_mixture(const MixtureParams& params, std::size_t n, std::uint64_t seed) {
    validate(params);
    Rng rng(seed);
    const std::span<const double> weights(params.weights.data(), params.components());
    std::vector<std::vector<std::uint32_t>> rows(n);
    std::vector<std::size_t> labels(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto y = rng.categorical(weights);
        labels[r] = y;
        for (std::size_t i = 0; i < params.features(); ++i) {
            if (rng.bernoulli(params.means(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y)))) {
                rows[r].push_back(static_cast<std::uint32_t>(i));
            }
        }
    }
    return {BinaryDataset(params.features(), rows), {params, std::move(labels)}};
}

/// Random mixture with exponential(1) entries: each column of the means is
/// rescaled to [0, 1] by (x - min) / (max - min); the weights are normalized
/// to sum to one.
inline MixtureParams random_exponential_mixture(std::size_t d, std::size_t k, Rng& rng) {
    MixtureParams params{Eigen::MatrixXd(d, k), Eigen::VectorXd(k)};
    for (std::size_t j = 0; j < k; ++j) {
        auto column = params.means.col(static_cast<Eigen::Index>(j));
        for (std::size_t i = 0; i < d; ++i) {
            column(static_cast<Eigen::Index>(i)) = rng.exponential();
        }
        const double lo = column.minCoeff();
        const double span = column.maxCoeff() - lo;
        if (span > 0.0) {
            column = (column.array() - lo) / span;
        } else {
            column.setConstant(0.5);
        }
    }
    for (std::size_t j = 0; j < k; ++j) {
        params.weights(static_cast<Eigen::Index>(j)) = rng.exponential();
    }
    params.weights /= params.weights.sum();
    return params;
}

inline SyntheticSample generate_synthetic(std::size_t d, std::size_t k, std::size_t n, std::uint64_t seed) {
    if (k < 1 || n < 1) {
        throw Error(ErrorKind::parameter, "synthetic generation needs k >= 1 and n >= 1");
    }
    if (d < k) {
        throw Error(ErrorKind::rank_infeasible,
                    "d=" + std::to_string(d) + " < k=" + std::to_string(k) + ": decomposition needs d >= k");
    }
    Rng rng(seed);
    const auto params = random_exponential_mixture(d, k, rng);
    // Independent stream for the rows so the parameters do not depend on n.
    return sample_mixture(params, n, seed ^ 0x9e3779b97f4a7c15ULL);
}

// ---------------------------------------------------------------------------
// Splits for stability analysis

struct SplitPair {
    std::vector<std::size_t> subset_a;
    std::vector<std::size_t> subset_b;
    std::vector<std::size_t> intersection;
};

/**
 * Two non-disjoint subsets covering all rows: a shared block of
 * round(overlap_fraction * N) rows, with the remaining rows divided between
 * the subsets (A gets the smaller half). Index lists are ascending.
 */
inline SplitPair overlapping_split(const BinaryDataset& data, double overlap_fraction, std::uint64_t seed) {
    if (!(overlap_fraction > 0.0 && overlap_fraction < 1.0)) {
        throw Error(ErrorKind::parameter, "overlap fraction must lie in (0, 1)");
    }
    const std::size_t n = data.rows();
    if (n < 10) {
        throw Error(ErrorKind::parameter, "overlapping split needs at least 10 rows, got " + std::to_string(n));
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(order);

    auto shared = static_cast<std::size_t>(std::llround(overlap_fraction * static_cast<double>(n)));
    shared = std::clamp<std::size_t>(shared, 1, n);
    const std::size_t rest = n - shared;
    const std::size_t half_a = rest / 2;

    SplitPair split;
    split.intersection.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shared));
    split.subset_a = split.intersection;
    split.subset_b = split.intersection;
    const auto a_end = order.begin() + static_cast<std::ptrdiff_t>(shared + half_a);
    split.subset_a.insert(split.subset_a.end(), order.begin() + static_cast<std::ptrdiff_t>(shared), a_end);
    split.subset_b.insert(split.subset_b.end(), a_end, order.end());
    std::sort(split.intersection.begin(), split.intersection.end());
    std::sort(split.subset_a.begin(), split.subset_a.end());
    std::sort(split.subset_b.begin(), split.subset_b.end());
    return split;
}

} // namespace nbclust
