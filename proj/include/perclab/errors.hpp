#pragma once

#include <stdexcept>
#include <string>

namespace perclab {

// Error taxonomy mirrors the CLI exit codes: schema 1, model 2, numeric 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (bad field, missing file, bad shape).
struct SchemaError : Error {
  using Error::Error;
};

// The model rejected a well-formed request (no spanning cluster, empty cylinder, ...).
struct ModelError : Error {
  using Error::Error;
};

// Numerical failure (unstable step, singular matrix, solver divergence).
struct NumericError : Error {
  using Error::Error;
};

struct NoSpanningCluster : ModelError {
  NoSpanningCluster() : ModelError("no spanning cluster in window") {}
};
struct OriginNotCovered : ModelError {
  explicit OriginNotCovered(const std::string& what = "origin not covered by selected cluster")
      : ModelError(what) {}
};
struct InsufficientSamples : ModelError {
  explicit InsufficientSamples(const std::string& what) : ModelError(what) {}
};
struct PitchTooCoarse : ModelError {
  explicit PitchTooCoarse(const std::string& what) : ModelError(what) {}
};
struct SourceOutside : ModelError {
  SourceOutside() : ModelError("distance source cell is outside the mask") {}
};
struct MissingGridPoint : ModelError {
  explicit MissingGridPoint(const std::string& what) : ModelError(what) {}
};
struct EmptyCylinder : ModelError {
  explicit EmptyCylinder(const std::string& what) : ModelError(what) {}
};
struct NonPositiveField : ModelError {
  explicit NonPositiveField(const std::string& what) : ModelError(what) {}
};
struct DisconnectedBall : ModelError {
  DisconnectedBall() : ModelError("ball cells are not connected in the mask") {}
};
struct TooFewLevels : ModelError {
  explicit TooFewLevels(const std::string& what) : ModelError(what) {}
};
struct NonPositiveTime : SchemaError {
  NonPositiveTime() : SchemaError("kernel time must be positive") {}
};
struct UnstableStep : NumericError {
  explicit UnstableStep(const std::string& what) : NumericError(what) {}
};

}  // namespace perclab
