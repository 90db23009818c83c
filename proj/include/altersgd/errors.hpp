#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace altersgd {

/// A precondition of a library call was violated (dimension mismatch, bad range, ...).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidBatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite numbers appeared during training. Carries the iteration context when known.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string &what, std::optional<std::size_t> session = std::nullopt,
                          std::optional<std::size_t> iteration = std::nullopt, std::string phase = {})
        : std::runtime_error(what), session_(session), iteration_(iteration), phase_(std::move(phase)) {}

    [[nodiscard]] std::optional<std::size_t> session() const noexcept { return session_; }
    [[nodiscard]] std::optional<std::size_t> iteration() const noexcept { return iteration_; }
    [[nodiscard]] const std::string &phase() const noexcept { return phase_; }

private:
    std::optional<std::size_t> session_;
    std::optional<std::size_t> iteration_;
    std::string phase_;
};

/// Malformed dataset text; line numbers are 1-based.
class DatasetParseError : public std::runtime_error {
public:
    DatasetParseError(std::size_t line, const std::string &what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Experiment configuration rejected. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
public:
    enum class Kind { UnknownKey, TypeMismatch, InvalidValue, Syntax };

    ConfigError(Kind kind, std::string key, const std::string &what)
        : std::runtime_error(what), kind_(kind), key_(std::move(key)) {}

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::string &key() const noexcept { return key_; }

private:
    Kind kind_;
    std::string key_;
};

inline void require(bool condition, const std::string &message) {
    if (!condition) {
        throw ContractViolation(message);
    }
}

}  // namespace altersgd
