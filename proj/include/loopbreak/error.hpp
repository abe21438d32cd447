#pragma once

#include <stdexcept>
#include <string>

namespace loopbreak {

/// Base for every error raised by the library. `kind()` is a short stable
/// identifier the CLI prints as a machine-parsable prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct InvalidModel : Error {
  explicit InvalidModel(const std::string& m) : Error("invalid-model", m) {}
};

struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& m) : Error("invalid-argument", m) {}
};

struct InvalidConfig : Error {
  explicit InvalidConfig(const std::string& m) : Error("invalid-config", m) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace loopbreak
