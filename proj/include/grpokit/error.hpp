#pragma once

#include <stdexcept>
#include <string>

namespace grpokit {

/// Caller passed a value outside an operation's domain.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed configuration, ground truth, or task definition.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// KL divergence is infinite: the reference assigns zero mass where the policy does not.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TemplateError : public std::runtime_error {
public:
    explicit TemplateError(std::string placeholder)
        : std::runtime_error("unfilled placeholder {" + placeholder + "}"),
          placeholder_(std::move(placeholder)) {}

    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

/// Transient failure talking to a text backend. Retryable.
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or gradient.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace grpokit
