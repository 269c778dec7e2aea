#pragma once

#include <stdexcept>
#include <string>

namespace gmce {

// Exception taxonomy. Each maps to a distinct failure class so the CLI can
// translate them into exit codes (usage/config -> 2, everything else -> 1).

/// Shape or width mismatch between tensors / feature vectors.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// NaN or Inf produced in a forward pass or loss.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// API precondition violated (non-scalar loss, missing gradient, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or degenerate input data (constant column, single-class set,
/// unseen category, bad IDX/CSV file).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Model archive problems: bad magic, unsupported version, truncation.
struct ArchiveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad run configuration: unknown key, unparseable value, missing file.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gmce
