#pragma once

#include <stdexcept>
#include <string>

namespace mastoid {

// Exception hierarchy. The CLI maps each branch to a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid arguments, mismatched shapes, malformed configuration. Exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite values, degenerate statistics, failed searches. Exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

// File system and format problems. Exit code 4.
class IoError : public Error {
public:
    using Error::Error;
};

enum class VolumeFormatIssue { size_mismatch, bad_header, non_finite };

class VolumeFormatError : public IoError {
public:
    VolumeFormatError(VolumeFormatIssue issue, const std::string& what)
        : IoError(what), issue_(issue) {}
    VolumeFormatIssue issue() const noexcept { return issue_; }

private:
    VolumeFormatIssue issue_;
};

}  // namespace mastoid
