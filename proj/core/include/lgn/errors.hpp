#pragma once

#include <stdexcept>
#include <string>

namespace lgn {

// Base class for everything the library throws on bad input or misuse.
// Internal bugs (out-of-range indexing etc.) surface as std::logic_error
// instead, so callers can tell the two apart at the process boundary.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape or width disagreement between tensors.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid configuration value (drop probability >= 1, t_min >= t_max, ...).
struct ConfigError : Error {
  using Error::Error;
};

// backward() misuse: detached loss, repeated backward on the same graph.
struct TapeError : Error {
  using Error::Error;
};

// grad_check detected a non-deterministic function under test.
struct DeterminismError : Error {
  using Error::Error;
};

// An optimizer step found a trainable parameter without a gradient.
struct OptimizerError : Error {
  using Error::Error;
};

// Query tokenized to nothing.
struct EmptyQueryError : Error {
  using Error::Error;
};

// (a, b) with a > b or out of range on the temporal map.
struct InvalidCellError : Error {
  using Error::Error;
};

// Degenerate time span (end <= start) or span outside the video.
struct InvalidSpanError : Error {
  using Error::Error;
};

// Score map with an all-false validity mask.
struct NoProposalError : Error {
  using Error::Error;
};

// Malformed file: bad magic, wrong version, truncated payload, bad arity.
struct FormatError : Error {
  using Error::Error;
};

// Well-formed file whose content violates a dataset invariant.
struct ValidationError : Error {
  using Error::Error;
};

// Annotation referencing a video id that the manifest cannot resolve.
struct ResolutionError : ValidationError {
  using ValidationError::ValidationError;
};

// Sample could not be ingested during training/evaluation.
struct IngestionError : ValidationError {
  using ValidationError::ValidationError;
};

}  // namespace lgn
