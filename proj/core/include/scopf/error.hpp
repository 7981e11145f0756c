#pragma once

#include <stdexcept>
#include <string>

namespace scopf {

// Malformed or inconsistent configuration, bad parameters.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Case files, datasets, or checkpoints that cannot be used.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Non-finite losses or other numeric breakdowns during training.
class DivergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace scopf
