#pragma once

#include <stdexcept>
#include <string>

namespace distill {

// Every failure carries a stable machine-parsable category; the CLI prints
// "error: category=<cat> <message>" and maps usage errors to exit code 2.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error("usage", msg) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error("domain", msg) {}
};

struct StateError : Error {
  explicit StateError(const std::string& msg) : Error("state", msg) {}
};

struct IndexError : Error {
  explicit IndexError(const std::string& msg) : Error("index", msg) {}
};

struct TrainingError : Error {
  explicit TrainingError(const std::string& msg) : Error("training", msg) {}
};

struct SamplingError : Error {
  explicit SamplingError(const std::string& msg) : Error("sampling", msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

}  // namespace distill
