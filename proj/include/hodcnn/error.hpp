#ifndef HODCNN_ERROR_HPP
#define HODCNN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hodcnn {

/// Failure categories used across the library. Callers that need to
/// distinguish outcomes (file missing vs. bad header vs. short read)
/// switch on kind() instead of parsing messages.
enum class ErrorKind {
    file_not_found,
    malformed_header,
    truncated_data,
    io,
    shape_mismatch,
    invalid_argument,
    non_finite,
    empty_input,
};

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

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

inline const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::file_not_found:   return "file-not-found";
        case ErrorKind::malformed_header: return "malformed-header";
        case ErrorKind::truncated_data:   return "truncated-data";
        case ErrorKind::io:               return "io";
        case ErrorKind::shape_mismatch:   return "shape-mismatch";
        case ErrorKind::invalid_argument: return "invalid-argument";
        case ErrorKind::non_finite:       return "non-finite";
        case ErrorKind::empty_input:      return "empty-input";
    }
    return "unknown";
}

} // namespace hodcnn

#endif
