#pragma once

#include <stdexcept>
#include <string>

namespace bevbench {

// Base class for all workbench errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

class LabelError : public Error {
 public:
  explicit LabelError(const std::string& msg) : Error(msg) {}
};

class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& msg) : Error(msg) {}
};

class PoseError : public Error {
 public:
  explicit PoseError(const std::string& msg) : Error(msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Carries the byte offset at which a file stopped making sense.
class FormatError : public Error {
 public:
  FormatError(const std::string& msg, std::size_t byte_offset)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& msg, long step)
      : Error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace bevbench
