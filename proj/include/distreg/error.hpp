#pragma once

#include <stdexcept>
#include <string>

namespace distreg {

/** Base class for every error raised by the library. */
class Error : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
        /// Short category tag used by the CLI when reporting failures.
        virtual const char* category() const noexcept { return "error"; }
};

class FormulaError : public Error {
    public:
        using Error::Error;
        const char* category() const noexcept override { return "formula"; }
};

class DataError : public Error {
    public:
        using Error::Error;
        const char* category() const noexcept override { return "data"; }
};

class NumericalError : public Error {
    public:
        using Error::Error;
        const char* category() const noexcept override { return "numerical"; }
};

class ConfigError : public Error {
    public:
        using Error::Error;
        const char* category() const noexcept override { return "config"; }
};

}
