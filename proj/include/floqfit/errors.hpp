#ifndef FLOQFIT_ERRORS_HPP
#define FLOQFIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace floqfit {

/// Bad inputs: malformed files, violated preconditions, inconsistent configs.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown: Newton divergence, infeasible subproblems, failed traces.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace floqfit

#endif
