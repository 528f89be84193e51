#pragma once

#include <stdexcept>
#include <string>

namespace oncopipe {

// Maps to exit code 1 together with usage errors.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or missing input data; maps to exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Anything that went wrong talking to a model backend; maps to exit code 3.
struct BackendError : std::runtime_error {
    explicit BackendError(const std::string& what, bool retryable = false)
        : std::runtime_error(what), retryable(retryable) {}
    bool retryable;
};

struct RateLimitError : BackendError {
    explicit RateLimitError(const std::string& what) : BackendError(what, true) {}
};

struct TransientError : BackendError {
    explicit TransientError(const std::string& what) : BackendError(what, true) {}
};

// Malformed reply from a backend; retrying will not help.
struct ProtocolError : BackendError {
    explicit ProtocolError(const std::string& what) : BackendError(what, false) {}
};

struct NotFoundError : BackendError {
    explicit NotFoundError(const std::string& what) : BackendError(what, false) {}
};

}  // namespace oncopipe
