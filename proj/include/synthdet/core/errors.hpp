#pragma once

#include <stdexcept>
#include <string>

namespace synthdet {

// Bad inputs: malformed manifests, invariant violations, unknown presets.
// CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage failed at runtime (I/O, non-finite loss, ...).
// CLI maps this to exit code 3.
struct StageError : std::runtime_error {
    explicit StageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace synthdet
