#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ringsim {

// Invalid input parameters (bad site count, non-positive energy, even N, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Problem too large for the requested method (dense cap, memory budget).
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Iterative eigensolver ran out of iterations. Carries the best residuals.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> residuals)
        : std::runtime_error(what), residuals_(std::move(residuals)) {}

    const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
    std::vector<double> residuals_;
};

}  // namespace ringsim
