#pragma once

#include <stdexcept>
#include <string>

namespace tdcr {

// Every error carries a short category string so the CLI can print a single
// machine-parsable line: "error: <category>: <message>".

class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

// Precondition broken by the caller (bad shape, out-of-range argument, ...).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what) : Error("contract", what) {}
};

// NaN/Inf produced somewhere in a computation.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

// Malformed file contents (bad magic, truncated store, inconsistent manifest).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

// The command understood the request but declines to run it.
class Refusal : public Error {
 public:
  explicit Refusal(const std::string& what) : Error("refused", what) {}
};

#define TDCR_REQUIRE(cond, msg)                                   \
  do {                                                            \
    if (!(cond)) throw ::tdcr::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace tdcr
