#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fluctlab {

/// Base of every error the library raises.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(const std::string& what, std::size_t bytes_written = 0)
        : Error(what), bytes_written_(bytes_written) {}

    /// Bytes successfully written before the failure, if applicable.
    std::size_t bytes_written() const noexcept { return bytes_written_; }

private:
    std::size_t bytes_written_;
};

/// Non-finite value surfaced during forward, backward, or the optimizer.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or unsupported run file (bad magic, manifest overflow).
class FormatError : public Error {
public:
    using Error::Error;
};

/// A run file whose frames end early. `last_valid` is -1 when no frame is intact.
class CorruptionError : public Error {
public:
    CorruptionError(const std::string& what, long long last_valid)
        : Error(what), last_valid_(last_valid) {}

    long long last_valid_snapshot() const noexcept { return last_valid_; }

private:
    long long last_valid_;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

}  // namespace fluctlab
