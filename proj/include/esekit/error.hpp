#pragma once

#include <stdexcept>
#include <string>

namespace esekit {

// Mirrors the CLI exit-code contract: 1 domain, 2 usage, 3 environment.
enum class ErrorKind {
  Domain = 1,
  Usage = 2,
  Environment = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// A record or value that breaks a documented type invariant. The invariant
// tag is a short stable name such as "unique_problem_id".
class ValidationError : public Error {
 public:
  ValidationError(std::string invariant, std::string detail)
      : Error(ErrorKind::Domain,
              "invariant violated [" + invariant + "]: " + detail),
        invariant_(std::move(invariant)),
        detail_(std::move(detail)) {}

  const std::string& invariant() const noexcept { return invariant_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string invariant_;
  std::string detail_;
};

[[noreturn]] inline void fail_domain(const std::string& msg) {
  throw Error(ErrorKind::Domain, msg);
}
[[noreturn]] inline void fail_usage(const std::string& msg) {
  throw Error(ErrorKind::Usage, msg);
}
[[noreturn]] inline void fail_environment(const std::string& msg) {
  throw Error(ErrorKind::Environment, msg);
}

}  // namespace esekit
