#pragma once

#include <stdexcept>
#include <string>

namespace dockeq {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad file, schema violation, invalid parameter.
class InputError : public Error
{
public:
  using Error::Error;
};

/// NaN/Inf or otherwise broken numerics during a computation.
class NumericalError : public Error
{
public:
  using Error::Error;
};

} // namespace dockeq
