#ifndef GROUPEMO_ERROR_HPP
#define GROUPEMO_ERROR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace groupemo {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for problems with caller-supplied data (files, manifests, shapes).
/// The command line tool maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed.
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

/// A file was written by an incompatible format version.
class VersionError : public InputError {
 public:
  using InputError::InputError;
};

/// Tensor extents disagree with what a layer or a stored model declares.
class ShapeError : public InputError {
 public:
  ShapeError(std::string what, std::vector<std::size_t> expected,
             std::vector<std::size_t> actual,
             std::optional<std::size_t> layer_index = std::nullopt);

  const std::vector<std::size_t>& expected() const { return expected_; }
  const std::vector<std::size_t>& actual() const { return actual_; }
  std::optional<std::size_t> layer_index() const { return layer_index_; }

  // Same error, annotated with the index of the layer that raised it.
  ShapeError at_layer(std::size_t index) const;

 private:
  std::string detail_;
  std::vector<std::size_t> expected_;
  std::vector<std::size_t> actual_;
  std::optional<std::size_t> layer_index_;
};

/// A face box has no overlap with its image.
class InvalidBoxError : public InputError {
 public:
  InvalidBoxError(std::size_t index, const std::string& what)
      : InputError(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Every class received zero likelihood from the observed evidence.
class ZeroLikelihoodError : public InputError {
 public:
  using InputError::InputError;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace groupemo

#endif  // GROUPEMO_ERROR_HPP
