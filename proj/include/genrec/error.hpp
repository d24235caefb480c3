#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace genrec {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Tensor or operator dimensions do not agree.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Non-finite input reached a numeric routine.
class NumericError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// A scalar argument is outside its documented domain.
class RangeError : public Error {
public:
  using Error::Error;
};

/// A call violated a documented precondition (stale tape, bad partition, ...).
class ContractError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// The solver produced a non-finite loss.
class DivergedError : public Error {
public:
  explicit DivergedError(std::size_t epoch)
    : Error("solver diverged at epoch " + std::to_string(epoch))
    , epoch_{epoch}
  {
  }

  std::size_t epoch() const noexcept { return epoch_; }

private:
  std::size_t epoch_;
};

} // namespace genrec
