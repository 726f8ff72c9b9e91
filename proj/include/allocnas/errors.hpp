#pragma once

#include <stdexcept>
#include <string>

namespace allocnas {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Tensor extents do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A NaN or Inf showed up where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Bad or missing configuration (maps to CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An evaluation callback failed; what() names the allocation.
class EvaluationError : public Error {
public:
    EvaluationError(std::string allocation, const std::string& cause)
        : Error("evaluation of " + allocation + " failed: " + cause), allocation_(std::move(allocation))
    {
    }
    const std::string& allocation() const noexcept { return allocation_; }

private:
    std::string allocation_;
};

// IDX parsing
class IdxMagicError : public Error {
public:
    using Error::Error;
};
class IdxTruncatedError : public Error {
public:
    using Error::Error;
};
class IdxCountMismatchError : public Error {
public:
    using Error::Error;
};

// checkpoints
class CheckpointMagicError : public Error {
public:
    using Error::Error;
};
class CheckpointVersionError : public Error {
public:
    using Error::Error;
};
class CheckpointCrcError : public Error {
public:
    using Error::Error;
};
class CheckpointFormatError : public Error {
public:
    using Error::Error;
};

} // namespace allocnas
