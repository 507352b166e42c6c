#pragma once

#include <stdexcept>
#include <string>

namespace zsslr {

/// Base class for all errors raised by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or unreadable files: bad magic, truncated payload, overflow.
struct io_error : error {
    using error::error;
};

/// Invalid manifests, configs, datasets, or argument combinations.
struct config_error : error {
    using error::error;
};

/// Numerical failure: non-SPD pivot, singular system, divergence.
struct numeric_error : error {
    using error::error;
};

}  // namespace zsslr
