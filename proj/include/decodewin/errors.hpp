#pragma once

#include <stdexcept>
#include <string>

namespace decodewin {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A value violates a documented invariant (NaN features, overlapping phones, ...).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A file does not follow the expected on-disk layout.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Opening, reading or writing a file failed.
class IoError : public Error {
public:
  IoError(const std::string& path, const std::string& what)
      : Error(what + ": " + path), path_(path) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

/// Bad arguments at an API or command-line boundary.
class UsageError : public Error {
public:
  using Error::Error;
};

/// A computation could not produce a result (e.g. no decodable offsets).
class ComputeError : public Error {
public:
  using Error::Error;
};

} // namespace decodewin
