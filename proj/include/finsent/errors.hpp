#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace finsent {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes, or a checkpoint tensor that does not fit the
// configured model.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed or out-of-range input data: files, lexicons, datasets, ids.
class DataError : public Error {
public:
    using Error::Error;
};

// Parse failure tied to a specific line of an input file.
class ParseError : public DataError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Invalid configuration values (model or training hyperparameters).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite values produced during training.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace finsent
