#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace radrep {

enum class ErrorCode {
    Io,
    Parse,
    UnsupportedFormat,
    Dimension,
    GridMismatch,
    EmptyInput,
    DegenerateCloud,
    SubsegmentationUnavailable,
    MissingMeasurement,
    UnknownOrgan,
    MissingSpleen,
    SpleenAttenuationNonpositive,
    Schema,
    Timeout,
    Http,
    MalformedResponse,
    MarkersMissing,
    Consistency,
    LengthMismatch,
    ShapeOutOfBounds,
    InvalidArgument,
};

const char* to_string(ErrorCode code) noexcept;

/// Base of every error raised by the library. The code is stable and is what
/// the CLI maps to exit statuses.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Malformed binary input; offset is the byte position where decoding failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(ErrorCode::Parse, what + " (at byte " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Report JSON that does not match the schema; pointer is an RFC 6901 path.
class SchemaError : public Error {
public:
    SchemaError(const std::string& pointer, const std::string& what)
        : Error(ErrorCode::Schema, pointer + ": " + what), pointer_(pointer) {}

    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

class HttpError : public Error {
public:
    HttpError(int status, const std::string& body)
        : Error(ErrorCode::Http, "HTTP " + std::to_string(status) + ": " + body),
          status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

}  // namespace radrep
