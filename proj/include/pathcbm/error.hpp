#pragma once

#include <stdexcept>
#include <string>

namespace pathcbm {

// Raised for bad input data: malformed files, violated invariants, empty
// joins. The CLI maps this family to exit code 1; everything else is a
// runtime error (exit code 2).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an iterative solver fails to meet its convergence contract.
class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pathcbm
