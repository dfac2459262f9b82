#pragma once

#include <stdexcept>
#include <string>

namespace calib {

/// Raised for contract violations and degenerate numerical inputs.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace calib
