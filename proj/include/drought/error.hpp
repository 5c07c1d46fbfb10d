#pragma once

#include <stdexcept>
#include <string>

namespace drought {

// Base of every error raised by the library. The CLI maps the subclasses onto
// process exit codes (see exit_code()).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input text: bad CSV header, unparsable number, bad JSON shape.
class ParseError : public Error {
public:
  using Error::Error;
};

// Well-formed input whose values break a documented range or invariant.
class ValidationError : public Error {
public:
  using Error::Error;
};

// Input whose layout is wrong: no records, missing dekad rows, month gaps.
class StructuralError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class ClimatologyError : public Error {
public:
  using Error::Error;
};

// Caller combined arguments that cannot go together.
class UsageError : public Error {
public:
  using Error::Error;
};

class SingularityError : public Error {
public:
  using Error::Error;
};

class TrainingError : public Error {
public:
  TrainingError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

private:
  long step_;
};

class StageError : public Error {
public:
  using Error::Error;
};

// The GAM stage finished but no model reached the selection threshold.
class NoSurvivorsError : public StageError {
public:
  using StageError::StageError;
};

namespace exit_codes {
inline constexpr int ok = 0;
inline constexpr int validation = 2;
inline constexpr int stage_failure = 3;
inline constexpr int no_survivors = 4;
}  // namespace exit_codes

}  // namespace drought
