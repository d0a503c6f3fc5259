#pragma once

#include <stdexcept>
#include <string>

namespace glitch {

// Error families map one-to-one onto the CLI exit codes (2 usage, 3 I/O,
// 4 data, 5 model). Shape/argument mistakes inside the library are plain
// std::invalid_argument.

/// Malformed configuration or scene description supplied by the user.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be read, written or decoded.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Dataset content is unusable (e.g. a single-class training manifest).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint or architecture problems.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace glitch
