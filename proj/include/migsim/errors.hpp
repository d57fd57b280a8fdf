// Copyright 2026 the migsim authors. Licensed under the terms of the Apache 2.0 license.
#pragma once

#include <stdexcept>
#include <string>

namespace migsim {

// Invalid or inconsistent configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; the message carries "<source>:<line>:" when known.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
    ParseError(const std::string& source, size_t line, const std::string& msg)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + msg) {}
};

// Lookup of an identifier that does not exist; the message names the id.
class NotFoundError : public std::runtime_error {
public:
    explicit NotFoundError(const std::string& msg) : std::runtime_error(msg) {}
};

// Feature/parameter shape mismatch between a model and its input.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

} // namespace migsim
