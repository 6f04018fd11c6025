#pragma once

#include <stdexcept>
#include <string>

namespace lucidcam {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor extents do not line up (bad construction, layer mismatch, ...).
class ShapeError : public Error {
public:
    using Error::Error;
};

// A scalar argument is out of its documented domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Input data is unusable: missing files, bad labels, undecodable images.
class DataError : public Error {
public:
    using Error::Error;
};

// A computation produced NaN/Inf where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

// The OS said no: unwritable paths, failed renames, short writes.
class IoError : public Error {
public:
    using Error::Error;
};

// A serialized artifact (checkpoint) is malformed.
class FormatError : public Error {
public:
    using Error::Error;
};

// A serialized artifact has a format_version we do not understand.
class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

} // namespace lucidcam
