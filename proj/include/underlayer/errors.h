#ifndef UNDERLAYER_ERRORS_H
#define UNDERLAYER_ERRORS_H

#include <stdexcept>

namespace underlayer {

/// Malformed input value (geometry, bandwidth...).
class ValidationError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class NotFoundError : public std::out_of_range
{
public:
  using std::out_of_range::out_of_range;
};

/// Inconsistent or out-of-range configuration.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace underlayer

#endif
