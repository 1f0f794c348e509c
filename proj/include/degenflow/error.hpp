#pragma once

#include <stdexcept>
#include <string>

namespace degenflow {

enum class ErrorKind {
    config,
    parameter,
    out_of_range,
    divergence,
    degenerate,
    convergence,
    step_failure,
    numerical,
    data,
    fit,
    shape,
    unsupported,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::parameter: return "parameter";
        case ErrorKind::out_of_range: return "out_of_range";
        case ErrorKind::divergence: return "divergence";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::convergence: return "convergence";
        case ErrorKind::step_failure: return "step_failure";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::data: return "data";
        case ErrorKind::fit: return "fit";
        case ErrorKind::shape: return "shape";
        case ErrorKind::unsupported: return "unsupported";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) throw Error(kind, message);
}

}  // namespace degenflow
