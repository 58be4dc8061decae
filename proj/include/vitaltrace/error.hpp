#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vitaltrace {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on arguments was violated (bad sizes, out-of-range params).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Input data is inconsistent (dimension mismatch, malformed CSV, bad manifest).
class DataError : public Error {
 public:
  using Error::Error;
};

// A frame of a sequence could not be read.
class IngestError : public DataError {
 public:
  IngestError(std::size_t frame_index, const std::string& what)
      : DataError("frame " + std::to_string(frame_index) + ": " + what),
        frame_index_(frame_index) {}

  std::size_t frame_index() const noexcept { return frame_index_; }

 private:
  std::size_t frame_index_;
};

// PPM payload could not be decoded.
class DecodeError : public DataError {
 public:
  DecodeError(std::size_t byte_offset, const std::string& what)
      : DataError("decode error at byte " + std::to_string(byte_offset) + ": " +
                  what),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// A computation produced non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid synthetic scene description.
class SpecError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Malformed or inconsistent configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

}  // namespace detail

}  // namespace vitaltrace
