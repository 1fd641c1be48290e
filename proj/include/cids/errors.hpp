#pragma once

#include <stdexcept>
#include <string>

namespace cids {

enum class ErrorCategory {
    config,     // malformed scenario / parameters
    domain,     // value outside its admissible range
    contract,   // caller violated an operation precondition
    auth,       // unregistered or unauthorized caller
    not_found,  // unknown address / key
    duplicate,  // resubmission of known content or identity
    io,         // filesystem failures
    invariant,  // internal consistency check failed
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const { return category_; }

private:
    ErrorCategory category_;
};

// CLI exit codes: 0 ok, 2 config, 3 invariant violation, 4 I/O.
inline int exit_code_for(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::config: return 2;
        case ErrorCategory::io: return 4;
        default: return 3;
    }
}

}  // namespace cids
