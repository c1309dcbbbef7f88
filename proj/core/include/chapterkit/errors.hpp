#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chapterkit {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input: bad file syntax, bad response text. Carries origin and
// line number when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
    ParseError(const std::string& origin, std::size_t line, const std::string& msg)
        : Error(origin + ":" + std::to_string(line) + ": " + msg), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

// A domain invariant or precondition was violated.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Missing or inconsistent pipeline configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A remote backend responded but broke its wire contract.
class ContractError : public Error {
public:
    using Error::Error;
};

// Transport-level failure talking to a remote backend. Retryable.
class TransportError : public Error {
public:
    using Error::Error;
};

// No alias maps the given department onto the taxonomy.
class UnmappedDepartmentError : public Error {
public:
    explicit UnmappedDepartmentError(const std::string& department)
        : Error("unmapped department: \"" + department + "\""), department_(department) {}

    const std::string& department() const { return department_; }

private:
    std::string department_;
};

// A label has too few instances to stratify.
class StratificationError : public Error {
public:
    StratificationError(const std::string& label, std::size_t count)
        : Error("label \"" + label + "\" has " + std::to_string(count) +
                " instance(s); stratified split needs at least 2"),
          label_(label) {}

    const std::string& label() const { return label_; }

private:
    std::string label_;
};

}  // namespace chapterkit
