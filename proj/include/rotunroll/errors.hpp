// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rotunroll {

// Shape or geometry inconsistency between operands.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed on-disk data (IDX, CIFAR, checkpoint, dataset container).
// Carries the byte offset at which parsing failed, when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long long byte_offset = -1)
      : std::runtime_error(byte_offset >= 0
                               ? what + " (at byte offset " + std::to_string(byte_offset) + ")"
                               : what),
        offset_(byte_offset) {}
  long long byte_offset() const { return offset_; }

 private:
  long long offset_;
};

// API misuse: invalid argument values, double-consumed tape, label out of range.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// File could not be opened or read/written.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Training aborted (NaN loss); message includes batch index and parameter norms.
class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rotunroll
