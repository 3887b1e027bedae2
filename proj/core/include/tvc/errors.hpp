#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace tvc {

enum class ErrorKind {
  io,
  schema,
  parse,
  insufficient_data,
  degenerate_scale,
  dimension,
  window_too_small,
  singular_design,
  degenerate_group,
  convergence,
  no_admissible_bandwidth,
  degenerate_distribution,
  domain,
  config,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::io: return "io";
    case ErrorKind::schema: return "schema";
    case ErrorKind::parse: return "parse";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::degenerate_scale: return "degenerate-scale";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::window_too_small: return "window-too-small";
    case ErrorKind::singular_design: return "singular-design";
    case ErrorKind::degenerate_group: return "degenerate-group";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::no_admissible_bandwidth: return "no-admissible-bandwidth";
    case ErrorKind::degenerate_distribution: return "degenerate-distribution";
    case ErrorKind::domain: return "domain";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

// Library-wide exception; `location` names the offending input (file:row:col,
// time index, column name) when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string location = "")
      : std::runtime_error(message), kind_(kind), location_(std::move(location)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& location() const noexcept { return location_; }

 private:
  ErrorKind kind_;
  std::string location_;
};

}  // namespace tvc
