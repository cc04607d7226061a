#pragma once

#include <stdexcept>
#include <string>

namespace sigent {

// Error taxonomy shared by the core and the C API. The CLI maps kinds to
// process exit codes (config-like -> 2, divergence -> 3, io -> 4).
enum class ErrorKind {
    Structural,  // shape/architecture mismatch, misuse of an API contract
    Config,      // bad configuration key or value
    Validation,  // input data violates a documented range or dimension
    Numeric,     // non-finite values, divergence aborts
    Parse,       // malformed text input (config, demo, sweep files)
    Io,          // filesystem failures
    Format,      // binary format/version mismatch
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
    if (!cond) throw_error(kind, msg);
}

}  // namespace sigent
