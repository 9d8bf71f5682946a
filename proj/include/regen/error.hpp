#pragma once

#include <stdexcept>
#include <string>

namespace regen {

// Base for every error the engine raises on bad input or failed stages.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed files: corpus records, binary headers, truncated payloads.
class FormatError : public Error {
public:
    using Error::Error;
};

// Violated preconditions on arguments or configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite or rising loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

// Pipeline failure wrapped with the stage that produced it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace regen
