#pragma once

#include <stdexcept>
#include <string>

namespace routepref {

/// Malformed or inconsistent input data (files, datasets, matrices).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The routing problem provably has no feasible solution.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A solver ran out of budget before finding any feasible routing.
class BudgetExhaustedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace routepref
