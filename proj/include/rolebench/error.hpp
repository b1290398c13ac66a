#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rolebench {

/// Base class for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be parsed. Carries the offending path and 1-based line (0 if unknown).
class ParseError : public Error {
 public:
  ParseError(std::string path, std::size_t line, const std::string& what)
      : Error(path + (line ? ":" + std::to_string(line) : std::string{}) + ": " + what),
        path_(std::move(path)),
        line_(line) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

/// One or more invariants were violated. Every violation is listed.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "validation failed";
    for (const auto& p : problems) out += "\n  - " + p;
    return out;
  }

  std::vector<std::string> problems_;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Domain errors of the statistics routines (length mismatch, undefined coefficient, ...).
class StatsError : public Error {
 public:
  using Error::Error;
};

// Provider-side errors. Retryable ones derive from RetryableError.

class RetryableError : public Error {
 public:
  using Error::Error;
};

/// Model output did not contain the structured payload we asked for.
class MalformedOutput : public RetryableError {
 public:
  using RetryableError::RetryableError;
};

class TransportError : public RetryableError {
 public:
  using RetryableError::RetryableError;
};

class TimeoutError : public RetryableError {
 public:
  using RetryableError::RetryableError;
};

/// Non-2xx response that is worth retrying (429, 408, 5xx).
class HttpStatusError : public RetryableError {
 public:
  HttpStatusError(int status, const std::string& body)
      : RetryableError("HTTP " + std::to_string(status) + (body.empty() ? "" : ": " + body)), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// Non-retryable request rejection (400, 401, 404, ...).
class RequestRejected : public Error {
 public:
  RequestRejected(int status, const std::string& body)
      : Error("HTTP " + std::to_string(status) + (body.empty() ? "" : ": " + body)), status_(status) {}

  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// The scripted provider ran out of queued responses for a key.
class ScriptExhausted : public Error {
 public:
  explicit ScriptExhausted(const std::string& key) : Error("scripted responses exhausted for " + key), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Terminal failure of one logical call after the retry policy gave up.
class ProviderFailure : public Error {
 public:
  ProviderFailure(std::string context, std::vector<std::string> attempts)
      : Error(describe(context, attempts)), context_(std::move(context)), attempts_(std::move(attempts)) {}

  const std::string& context() const noexcept { return context_; }
  const std::vector<std::string>& attempts() const noexcept { return attempts_; }

 private:
  static std::string describe(const std::string& context, const std::vector<std::string>& attempts) {
    std::string out = context + ": failed after " + std::to_string(attempts.size()) + " attempt(s)";
    if (!attempts.empty()) out += "; last error: " + attempts.back();
    return out;
  }

  std::string context_;
  std::vector<std::string> attempts_;
};

}  // namespace rolebench
