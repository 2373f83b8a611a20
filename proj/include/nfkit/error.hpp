#pragma once

#include <stdexcept>
#include <string>

namespace nfkit {

// Base for every error the toolkit raises. Row-level problems in input data
// are never thrown; they are counted in the stats of the stage that saw them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input that violates a stage precondition (empty corpus, bad ratios, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Endpoint rejected our credentials. Never retried.
class AuthError : public Error {
 public:
  using Error::Error;
};

}  // namespace nfkit
