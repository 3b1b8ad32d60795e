#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nbclust {

/// Failure classes surfaced by the library. The CLI and the HTTP service map
/// these onto exit codes and status codes respectively.
enum class ErrorKind {
    invalid_code,
    empty_dataset,
    rank_infeasible,
    rank_deficient,
    anchor_not_found,
    parameter,
    input,
    parse,
    io,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::invalid_code: return "invalid_code";
    case ErrorKind::empty_dataset: return "empty_dataset";
    case ErrorKind::rank_infeasible: return "rank_infeasible";
    case ErrorKind::rank_deficient: return "rank_deficient";
    case ErrorKind::anchor_not_found: return "anchor_not_found";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::input: return "input";
    case ErrorKind::parse: return "parse";
    case ErrorKind::io: return "io";
    }
    return "unknown";
}

/// True for failures that come out of the numerics rather than from reading
/// or validating input.
constexpr bool is_numerical(ErrorKind kind) noexcept {
    return kind == ErrorKind::rank_infeasible || kind == ErrorKind::rank_deficient ||
           kind == ErrorKind::anchor_not_found;
}

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

} // namespace nbclust
