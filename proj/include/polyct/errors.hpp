#pragma once

#include <stdexcept>
#include <string>

namespace polyct {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent configuration / input document.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An iterative method produced a non-finite or runaway iterate.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

// An inner iteration (power method, subgradient stall, root finder) failed.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace polyct
