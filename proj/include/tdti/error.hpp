#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tdti {

// Error classes surface verbatim on the CLI, so the names are part of the
// machine-parsable contract.
enum class ErrorKind {
    Shape,
    Usage,
    Format,
    Config,
    Numeric,
    MissingColumn,
    Io,
    Data,
};

constexpr std::string_view error_class(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Shape: return "SHAPE_ERROR";
        case ErrorKind::Usage: return "USAGE_ERROR";
        case ErrorKind::Format: return "FORMAT_ERROR";
        case ErrorKind::Config: return "CONFIG_ERROR";
        case ErrorKind::Numeric: return "NUMERIC_ERROR";
        case ErrorKind::MissingColumn: return "MISSING_COLUMN";
        case ErrorKind::Io: return "IO_ERROR";
        case ErrorKind::Data: return "DATA_ERROR";
    }
    return "ERROR";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace tdti
