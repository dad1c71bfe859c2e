#pragma once

#include <stdexcept>
#include <string>

namespace mlctr {

// Error taxonomy.  The CLI maps these onto process exit codes:
//   ConfigError / UsageError                      -> 2
//   IoError / ParseError / BoundsError / ...      -> 3
//   DivergenceError                               -> 4
// Anything else escaping main() is an internal bug (exit 1).

// Invalid configuration: bad hyperparameters, malformed flag values,
// inconsistent dimensions between coupled tensors, ...
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A precondition of an API call was violated (empty batch, tag for a
// tensor the model does not carry, ...).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested split leaves some part empty.
struct SplitError : ConfigError {
  using ConfigError::ConfigError;
};

// Requested sparsity keeps no entries.
struct MaskError : ConfigError {
  using ConfigError::ConfigError;
};

// File system problems: missing file, unreadable path, failed write.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file contents; message carries the 1-based line number.
struct ParseError : IoError {
  using IoError::IoError;
};

// Index outside the declared extent of a tensor or network.
struct BoundsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The same (i, j, k) triple appears twice in a COO file.
struct DuplicateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint file with an unknown or incompatible format tag.
struct FormatError : IoError {
  using IoError::IoError;
};

// A backward pass was asked to use activations recorded before the
// network's parameters changed.
struct TapeError : std::logic_error {
  using std::logic_error::logic_error;
};

// Training produced a non-finite prediction or loss.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mlctr
