#pragma once

#include <stdexcept>
#include <string>

namespace stcert
{

/// Base of every error thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent taxonomy data, or a lookup that does not resolve.
class TaxonomyError : public Error
{
public:
    using Error::Error;
};

/// Invalid geometry or image arguments (dimension mismatch, empty mask, ...).
class ImageError : public Error
{
public:
    using Error::Error;
};

/// Invalid certification or evaluation configuration.
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// A classifier or segmenter failed to answer a request.
class BackendError : public Error
{
public:
    using Error::Error;
};

/// The child process violated the line protocol.
class ProtocolError : public BackendError
{
public:
    using BackendError::BackendError;
};

/// The child process did not answer within the request timeout.
class TimeoutError : public BackendError
{
public:
    using BackendError::BackendError;
};

} // namespace stcert
