#pragma once

#include <stdexcept>
#include <string>

namespace chirpfuse {

// Base error carrying the process exit code the CLI maps it to.
class Error : public std::runtime_error {
public:
    Error(std::string msg, int exit_code)
        : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}

    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

// Bad configuration or command-line usage.
class ConfigError : public Error {
public:
    explicit ConfigError(std::string msg) : Error(std::move(msg), 1) {}
};

// Unreadable, malformed, or inconsistent input data.
class DataError : public Error {
public:
    explicit DataError(std::string msg) : Error(std::move(msg), 2) {}
};

// Violated internal invariant; a bug, not a user mistake.
class InternalError : public Error {
public:
    explicit InternalError(std::string msg) : Error(std::move(msg), 3) {}
};

// Tensor shape mismatch in a graph op.
class ShapeError : public InternalError {
public:
    explicit ShapeError(std::string msg) : InternalError(std::move(msg)) {}
};

} // namespace chirpfuse
