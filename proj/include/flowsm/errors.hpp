#pragma once

#include <stdexcept>

namespace flowsm {

/// Bad flags, bad config files, malformed scenario specs. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unreadable or inconsistent input data. CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace flowsm
