#pragma once

#include <stdexcept>
#include <string>

namespace appsess {

// Raised for malformed inputs, bad config values, and contract violations
// the caller can fix. The CLI maps this to exit code 1; any other exception
// maps to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace appsess
