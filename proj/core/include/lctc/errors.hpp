#pragma once

#include <stdexcept>
#include <string>

namespace lctc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-conformable operands. The message names the op and both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument was violated (bad dims, lr <= 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// CTC labels cannot be aligned to the available frames.
class InfeasibleAlignment : public Error {
 public:
  InfeasibleAlignment(std::size_t frames, std::size_t required)
      : Error("infeasible CTC alignment: " + std::to_string(frames) +
              " frames available, " + std::to_string(required) + " required"),
        frames_(frames),
        required_(required) {}

  std::size_t frames() const noexcept { return frames_; }
  std::size_t required() const noexcept { return required_; }

 private:
  std::size_t frames_;
  std::size_t required_;
};

/// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace lctc
