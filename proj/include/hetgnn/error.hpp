#pragma once

#include <stdexcept>
#include <string>

namespace hetgnn {

// Exit codes used by the command-line tool.
enum class ExitCode : int { Ok = 0, Config = 2, Data = 3, Numerical = 4 };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::Data)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what, ExitCode::Config) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what, ExitCode::Data) {}
  explicit ParseError(const std::string& what) : Error(what, ExitCode::Data) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape error: " + what, ExitCode::Data) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error("range error: " + what, ExitCode::Data) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what, ExitCode::Numerical) {}
};

}  // namespace hetgnn
