#ifndef EOFLOW_ERRORS_HPP
#define EOFLOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace eoflow {

// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape or rank mismatch; message names the primitive and shapes.
struct shape_error : error {
    using error::error;
};

// Invalid user-supplied configuration (bad key, bad value, bad argument).
struct config_error : error {
    using error::error;
};

// Malformed or truncated data files (IDX, checkpoints, caches).
struct data_error : error {
    using error::error;
};

// Numerical failure: non-finite intermediates, degenerate geometry.
struct numeric_error : error {
    using error::error;
};

}  // namespace eoflow

#endif
