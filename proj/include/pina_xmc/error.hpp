#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pina_xmc {

enum class ErrorKind {
    invalid_argument,
    shape_mismatch,
    out_of_range,
    format,
    io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::shape_mismatch: return "shape_mismatch";
        case ErrorKind::out_of_range: return "out_of_range";
        case ErrorKind::format: return "format";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

// Every recoverable failure in the library surfaces as this type. The kind
// lets callers (and the CLI exit-code mapping) branch without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string shape_str(std::size_t rows, std::size_t cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace pina_xmc
