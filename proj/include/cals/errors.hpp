#pragma once

#include <stdexcept>
#include <string>

namespace cals {

// Thrown when an iterative computation produces a non-finite value. The index
// identifies the failing step (inner iteration, batch, ...).
class numerical_error : public std::runtime_error {
 public:
  numerical_error(const std::string& what, long index)
      : std::runtime_error(what), index_(index) {}

  long index() const { return index_; }

 private:
  long index_;
};

// Bad experiment configuration: syntax error, unknown key, or out-of-domain
// value. The message names the offending key.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure: missing input, unwritable output.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cals
