#pragma once

#include <stdexcept>
#include <string>

namespace fhed {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Vector/matrix dimension does not match the expected size.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Ciphertext scales differ where they must match.
class ScaleError : public Error {
public:
    using Error::Error;
};

/// Operands belong to different backends.
class BackendError : public Error {
public:
    using Error::Error;
};

/// Multiplication requested at level 0: the modulus budget (log q) is spent.
class DepthExceeded : public Error {
public:
    using Error::Error;
};

/// A required rotation or evaluation key is missing.
class KeyError : public Error {
public:
    using Error::Error;
};

/// Encoded coefficients do not fit the current ciphertext modulus.
class EncodingOverflow : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (parameters, activation tags, op descriptors).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed user input (symptom files, unknown keys).
class InputError : public Error {
public:
    using Error::Error;
};

/// Label list does not match the network dimensions.
class LabelCountError : public Error {
public:
    using Error::Error;
};

/// A documented caller obligation was violated (debug checks only).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Serialization or file format problem.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Wire protocol violation or remote ERROR frame.
class ProtocolError : public Error {
public:
    ProtocolError(uint16_t code, const std::string& msg)
        : Error(msg), code_(code) {}
    explicit ProtocolError(const std::string& msg) : Error(msg), code_(0) {}
    uint16_t code() const { return code_; }

private:
    uint16_t code_;
};

}  // namespace fhed
