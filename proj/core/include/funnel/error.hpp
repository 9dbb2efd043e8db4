#pragma once

#include <stdexcept>
#include <string>

namespace funnel {

// Malformed or inconsistent input data (files, corpora, models).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or command-line usage.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace funnel
