#pragma once

#include <stdexcept>
#include <string>

namespace mvmc {

/// Non-finite state or value encountered during a simulation or solve.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mvmc
