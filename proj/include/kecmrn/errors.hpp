#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kecmrn {

// Shape or extent disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller violated an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A softmax row with every position masked out.
class InvalidMaskError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Well-formed input whose content breaks a data invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

// Unreadable or malformed file content (bad magic, truncation, parse failure).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace kecmrn
