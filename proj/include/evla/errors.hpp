#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace evla {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// I/O and file-format errors (CLI maps these to exit code 3).
struct IoError : Error {
    using Error::Error;
};

// -- stream validation --------------------------------------------------

struct UnsortedTimestamps : Error {
    std::size_t index;  // first offending event index
    explicit UnsortedTimestamps(std::size_t idx)
        : Error("timestamps not non-decreasing at index " + std::to_string(idx)), index(idx) {}
};

struct OutOfBounds : Error {
    std::size_t index;
    std::uint16_t x, y;
    OutOfBounds(std::size_t idx, std::uint16_t ex, std::uint16_t ey)
        : Error("event " + std::to_string(idx) + " at (" + std::to_string(ex) + "," +
                std::to_string(ey) + ") outside sensor bounds"),
          index(idx), x(ex), y(ey) {}
};

struct InvalidGeometry : Error {
    using Error::Error;
};

struct EmptyInterval : Error {
    EmptyInterval() : Error("interval requires t1 > t0") {}
};

// -- representation ------------------------------------------------------

struct InvalidTau : Error {
    InvalidTau() : Error("time-surface decay constant must be positive") {}
};

// -- fusion / adapter ----------------------------------------------------

struct GeometryMismatch : Error {
    using Error::Error;
};

struct InvalidRate : Error {
    InvalidRate() : Error("dropout rate must lie in [0, 1]") {}
};

struct ShapeMismatch : Error {
    std::string tensor;
    explicit ShapeMismatch(std::string name)
        : Error("parameter tensor has unexpected shape: " + name), tensor(std::move(name)) {}
};

struct NonFiniteGradient : Error {
    NonFiniteGradient() : Error("analytic gradient contains a non-finite value") {}
};

struct InvalidConfig : Error {
    using Error::Error;
};

// -- simulator -------------------------------------------------------------

struct ObjectOutOfBounds : Error {
    using Error::Error;
};

struct NonPositiveThreshold : Error {
    NonPositiveThreshold() : Error("contrast threshold must be positive") {}
};

struct ExposureOutsideSequence : Error {
    using Error::Error;
};

// -- storage ----------------------------------------------------------------

struct SinkFailure : IoError {
    using IoError::IoError;
};

struct BadMagic : IoError {
    using IoError::IoError;
};

struct UnsupportedVersion : IoError {
    using IoError::IoError;
};

struct TruncatedFile : IoError {
    std::uint64_t offset;  // byte offset where data ran out
    explicit TruncatedFile(std::uint64_t off)
        : IoError("file truncated at byte offset " + std::to_string(off)), offset(off) {}
};

struct MalformedHeader : IoError {
    using IoError::IoError;
};

struct UnsupportedMaxval : IoError {
    using IoError::IoError;
};

struct MalformedRecord : IoError {
    std::size_t line;  // 1-based line number
    MalformedRecord(std::size_t ln, const std::string& what)
        : IoError("line " + std::to_string(ln) + ": " + what), line(ln) {}
};

struct NonMonotoneFrames : Error {
    using Error::Error;
};

struct MissingReferencedFile : IoError {
    using IoError::IoError;
};

}  // namespace evla
