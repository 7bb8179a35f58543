#pragma once

#include <stdexcept>
#include <string>

namespace hrm {

// Bad user input: malformed files, out-of-range tokens, invalid configs.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

// Non-finite loss or gradients; the CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an API precondition (e.g. passed an unsevered carry).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Generators that exhaust their retry budget.
class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, std::size_t produced)
      : std::runtime_error(what), produced_(produced) {}
  std::size_t produced() const noexcept { return produced_; }

 private:
  std::size_t produced_;
};

}  // namespace hrm
