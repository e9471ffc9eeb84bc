#pragma once

#include <stdexcept>
#include <string>

namespace gps {

// Error taxonomy mirroring the CLI exit codes: usage=2, data=3, numeric=4.
// ContractError and ResourceError surface as data errors at the CLI boundary.

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or out-of-range input files.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A documented precondition was violated by the caller.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Non-finite values or training divergence.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An operation refused to run because a configured budget was exceeded.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gps
