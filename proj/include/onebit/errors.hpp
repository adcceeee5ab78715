#pragma once

#include <stdexcept>
#include <string>

namespace onebit {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct UnstablePolynomial : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct NonFiniteInput : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct InsufficientHorizon : Error { using Error::Error; };
struct NotPositiveDefinite : Error { using Error::Error; };
struct ConfigMismatch : Error { using Error::Error; };

/// Config file could not be read or parsed (message carries line/key).
struct ParseError : Error { using Error::Error; };
/// Config parsed but violates a module precondition.
struct ValidationError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

}  // namespace onebit
