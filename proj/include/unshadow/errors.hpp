#ifndef UNSHADOW_ERRORS_HPP
#define UNSHADOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace unshadow {

// Spatial dimensions of two operands disagree.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string &msg) : std::runtime_error(msg) {}
};

// A documented precondition was violated by the caller.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string &msg) : std::runtime_error(msg) {}
};

// Invalid configuration value or file.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

// A dataset root does not match the expected on-disk layout.
struct LayoutError : std::runtime_error {
    explicit LayoutError(const std::string &msg) : std::runtime_error(msg) {}
};

// Rejection sampling ran out of attempts.
struct SamplingError : std::runtime_error {
    explicit SamplingError(const std::string &msg) : std::runtime_error(msg) {}
};

// NaN or Inf surfaced during training.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string &msg) : std::runtime_error(msg) {}
};

// I/O failure (unreadable image, unwritable report, ...).
struct IoError : std::runtime_error {
    explicit IoError(const std::string &msg) : std::runtime_error(msg) {}
};

} // namespace unshadow

#endif
