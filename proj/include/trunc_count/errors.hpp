#pragma once

#include <stdexcept>
#include <string>

namespace trunc_count {

/// Bad input data or arguments (malformed files, out-of-support counts,
/// inconsistent designs). The CLI maps this to exit code 1.
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation could not be completed (singular matrix, failed
/// factorization). The CLI maps this to exit code 2.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace trunc_count
