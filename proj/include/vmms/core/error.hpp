#pragma once

#include <stdexcept>
#include <string>

namespace vmms {

/// Failure categories; each maps onto a CLI exit code.
enum class ErrorKind { usage = 2, data = 3, divergence = 4, logic = 1 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

inline Error usage_error(const std::string& what) { return {ErrorKind::usage, what}; }
inline Error data_error(const std::string& what) { return {ErrorKind::data, what}; }
inline Error divergence_error(const std::string& what) { return {ErrorKind::divergence, what}; }
inline Error logic_error(const std::string& what) { return {ErrorKind::logic, what}; }

} // namespace vmms
