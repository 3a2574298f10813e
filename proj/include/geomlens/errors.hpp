#pragma once

#include <stdexcept>
#include <string>

namespace geomlens {

// Base of every error thrown by the library. The CLI maps subclasses onto
// process exit codes (input errors → 2, numerical failures → 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class CorruptPayload : public Error {
public:
    using Error::Error;
};

class UnsupportedVersion : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

class NumericalFailure : public Error {
public:
    using Error::Error;
};

}  // namespace geomlens
