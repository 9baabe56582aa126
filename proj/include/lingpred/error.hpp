#pragma once

#include <stdexcept>
#include <string>

namespace lingpred {

// Base for every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent input data. The CLI maps these to exit code 1.
class DataError : public Error {
 public:
  using Error::Error;
};

// Fitting or prediction failed on otherwise valid data (exit code 2).
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace lingpred
