#pragma once

#include <stdexcept>
#include <string>

namespace attnvgg {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file content (PGM, weight file, labels CSV, manifest).
class FormatError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kUnsupportedMaxval,
    kTruncated,
    kShapeMismatch,
    kMissingTensor,
    kUnknownTensor,
    kBadLabel,
    kDuplicateEntry,
    kMalformed,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A file that cannot be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Misuse of stateful objects, e.g. replaying a consumed cache.
class StateError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value produced during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace attnvgg
