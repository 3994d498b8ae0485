#pragma once

#include <stdexcept>
#include <string>

namespace lfb {

// Base class for all library errors. Subclasses exist so callers and tests
// can catch a specific failure kind; the message carries the offending field
// or value.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- raw-tensor file format ---
struct RtfError : Error { using Error::Error; };
struct BadMagic : RtfError { using RtfError::RtfError; };
struct UnsupportedVersion : RtfError { using RtfError::RtfError; };
struct UnsupportedDtype : RtfError { using RtfError::RtfError; };
struct UnsupportedRank : RtfError { using RtfError::RtfError; };
struct BadDimension : RtfError { using RtfError::RtfError; };
struct TruncatedPayload : RtfError { using RtfError::RtfError; };

// --- shape / axis validation ---
struct ShapeMismatch : Error { using Error::Error; };
struct BadAxis : Error { using Error::Error; };
struct SpatialMismatch : ShapeMismatch { using ShapeMismatch::ShapeMismatch; };
struct VariantShapeMismatch : ShapeMismatch { using ShapeMismatch::ShapeMismatch; };

// --- configuration (maps to CLI exit code 2) ---
struct ConfigError : Error { using Error::Error; };
struct NonDivisible : ConfigError { using ConfigError::ConfigError; };
struct NotPositiveDefinite : ConfigError { using ConfigError::ConfigError; };
struct TooFewSamples : ConfigError { using ConfigError::ConfigError; };
struct LabelOutOfRange : ConfigError { using ConfigError::ConfigError; };

// --- runtime / numeric (maps to CLI exit code 1) ---
struct NumericError : Error { using Error::Error; };
struct ZeroBatch : NumericError { using NumericError::NumericError; };
struct DivergedLoss : NumericError { using NumericError::NumericError; };
struct UnrecordedForward : NumericError { using NumericError::NumericError; };
struct DegenerateError : NumericError { using NumericError::NumericError; };

}  // namespace lfb
