#pragma once

#include <stdexcept>
#include <string>

namespace gorp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dimension mismatch between operands; message names both shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite values where finite input is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Invalid model specification (broken dimension chain, bad ranks).
class SpecError : public Error {
public:
    using Error::Error;
};

/// Bad data: labels out of range, empty datasets.
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed file content; message carries the offending line number.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Run-configuration problems: unknown keys, inconsistent fields.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// API misuse: stale caches, unsorted spectra, incomplete matrices.
class UsageError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace gorp
