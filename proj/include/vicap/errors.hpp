#pragma once

#include <stdexcept>
#include <string>

namespace vicap {

// Shapes of the operands do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A tensor a model needs is missing from its weight store or has the wrong shape.
class WeightStoreError : public std::runtime_error {
 public:
  WeightStoreError(std::string tensor, const std::string& what)
      : std::runtime_error(what), tensor_(std::move(tensor)) {}
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

enum class FormatErrorKind {
  io,
  bad_magic,
  unsupported_version,
  truncated,
  duplicate_name,
  wrong_length,
  missing_metadata,
  parse,
};

const char* to_string(FormatErrorKind kind) noexcept;

// A data file could not be read or does not follow its container format.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

// Lookup of an identifier (image id, label, ...) that the loaded data does not contain.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace vicap
