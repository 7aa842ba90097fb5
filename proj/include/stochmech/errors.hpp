#pragma once

#include <stdexcept>
#include <string>

namespace stochmech {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- model catalog ---
class UnknownModelError : public Error {
public:
    explicit UnknownModelError(const std::string& name)
        : Error("unknown model: '" + name + "'") {}
};

class MissingParameterError : public Error {
public:
    MissingParameterError(const std::string& model, const std::string& param)
        : Error("model '" + model + "' requires parameter '" + param + "'") {}
};

class NonPositiveParameterError : public Error {
public:
    NonPositiveParameterError(const std::string& model, const std::string& param, double value)
        : Error("model '" + model + "' parameter '" + param + "' must be > 0, got " +
                std::to_string(value)) {}
};

class DimensionMismatchError : public Error {
public:
    DimensionMismatchError(std::size_t expected, std::size_t got)
        : Error("state dimension mismatch: model has " + std::to_string(expected) +
                " dof, state has " + std::to_string(got)) {}
};

class UnsupportedModelError : public Error {
public:
    explicit UnsupportedModelError(const std::string& msg) : Error(msg) {}
};

// --- stability / sde ---
class NonSeparableModelError : public Error {
public:
    explicit NonSeparableModelError(const std::string& msg) : Error(msg) {}
};

class NonLinearModelError : public Error {
public:
    explicit NonLinearModelError(const std::string& msg) : Error(msg) {}
};

// --- ensembles ---
class AllPathsExcludedError : public Error {
public:
    explicit AllPathsExcludedError(const std::string& msg) : Error(msg) {}
};

class InsufficientSamplesError : public Error {
public:
    explicit InsufficientSamplesError(const std::string& msg) : Error(msg) {}
};

class NonPositiveVarianceError : public Error {
public:
    explicit NonPositiveVarianceError(const std::string& msg) : Error(msg) {}
};

// --- phase-space grid ---
class MassOutsideDomainError : public Error {
public:
    explicit MassOutsideDomainError(const std::string& msg) : Error(msg) {}
};

class CFLViolationError : public Error {
public:
    explicit CFLViolationError(const std::string& msg) : Error(msg) {}
};

class StabilityViolationError : public Error {
public:
    explicit StabilityViolationError(const std::string& msg) : Error(msg) {}
};

class TooFewSamplesError : public Error {
public:
    explicit TooFewSamplesError(const std::string& msg) : Error(msg) {}
};

// --- scenario config ---
class ConfigSyntaxError : public Error {
public:
    ConfigSyntaxError(std::size_t line, std::size_t col, const std::string& msg)
        : Error("config syntax error at " + std::to_string(line) + ":" + std::to_string(col) +
                ": " + msg),
          line_(line), col_(col) {}
    std::size_t line() const { return line_; }
    std::size_t col() const { return col_; }
private:
    std::size_t line_, col_;
};

class UnknownKeyError : public Error {
public:
    explicit UnknownKeyError(const std::string& key)
        : Error("unknown config key: '" + key + "'"), key_(key) {}
    const std::string& key() const { return key_; }
private:
    std::string key_;
};

class InvalidValueError : public Error {
public:
    InvalidValueError(const std::string& key, const std::string& msg)
        : Error("invalid value for '" + key + "': " + msg) {}
};

} // namespace stochmech
