#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ooc {

enum class ErrorKind {
    Dimension,   // tensor shapes disagree
    Contract,    // precondition violated by the caller
    Vocabulary,  // token id outside the vocabulary
    Input,       // empty or otherwise unusable input
    Parse,       // malformed file contents
    Schema,      // well-formed but violates the schema
    Data,        // non-finite or otherwise invalid values
    Training,    // optimisation diverged
    Io,          // file could not be opened or written
    Usage,       // bad command-line usage
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace ooc
