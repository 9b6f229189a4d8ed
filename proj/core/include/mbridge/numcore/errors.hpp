#pragma once

#include <stdexcept>
#include <string>

namespace mbridge {

/// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller supplied an input that violates an operation's precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Token id or class index outside the valid range.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Non-finite value encountered while training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read, written, or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mbridge
