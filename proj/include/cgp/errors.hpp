#pragma once

#include <stdexcept>
#include <string>

namespace cgp {

// Exit codes used by the command-line tool map one-to-one onto these.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

} // namespace cgp
