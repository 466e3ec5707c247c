#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nllvm {

//! Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Invalid parameter value (out of range, wrong sign, bad shape request).
class ParameterError : public Error
{
public:
  using Error::Error;
};

//! Grid too coarse for the requested kernel bandwidth.
class ResolutionError : public Error
{
public:
  using Error::Error;
};

//! Two objects that must share a grid do not.
class ShapeError : public Error
{
public:
  using Error::Error;
};

//! A computed quantity is not finite.
class NumericError : public Error
{
public:
  NumericError(const std::string& what, std::ptrdiff_t index = -1)
    : Error(index >= 0 ? what + " (grid index " + std::to_string(index) + ")"
                       : what)
    , index_(index)
  {
  }

  //! Offending grid index, or -1 when not tied to a grid point.
  std::ptrdiff_t index() const noexcept { return index_; }

private:
  std::ptrdiff_t index_;
};

//! Output domain does not hold the mass of the density being tabulated.
class CoverageError : public Error
{
public:
  CoverageError(const std::string& what, double lost_mass)
    : Error(what + " (lost mass " + std::to_string(lost_mass) + ")")
    , lost_mass_(lost_mass)
  {
  }

  double lost_mass() const noexcept { return lost_mass_; }

private:
  double lost_mass_;
};

//! Cholesky factorisation failed even after jitter escalation.
class ConditioningError : public Error
{
public:
  using Error::Error;
};

//! The higher-order kernel construction went too negative for this sigma.
class SigmaTooLargeError : public Error
{
public:
  SigmaTooLargeError(const std::string& what, double negative_mass)
    : Error(what + " (negative mass " + std::to_string(negative_mass) + ")")
    , negative_mass_(negative_mass)
  {
  }

  double negative_mass() const noexcept { return negative_mass_; }

private:
  double negative_mass_;
};

//! Requested operation is not available for this model.
class UnsupportedError : public Error
{
public:
  using Error::Error;
};

//! Variational density puts mass where the prior has none.
class SupportError : public Error
{
public:
  using Error::Error;
};

//! Non-positive value passed to a log-scale computation.
class DomainError : public Error
{
public:
  using Error::Error;
};

class IoError : public Error
{
public:
  using Error::Error;
};

class ParseError : public Error
{
public:
  ParseError(const std::string& what, std::size_t line)
    : Error(what + " at line " + std::to_string(line))
    , line_(line)
  {
  }

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class EmptyDataError : public Error
{
public:
  using Error::Error;
};

} // namespace nllvm
