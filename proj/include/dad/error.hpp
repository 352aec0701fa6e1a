#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dad {

// Base of every error the library throws. The CLI maps subclasses onto exit
// codes: ConfigError/FormatError/ContractError -> 1, NumericalError -> 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class SequenceTooShortError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated binary/text input. `offset` is the byte position at
// which parsing failed (or the element index for non-binary inputs).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace dad
