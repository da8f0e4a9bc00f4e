#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace orbsde {

// Malformed input: bad config text, structural spec defects, violated call
// preconditions. Maps to process exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An iterative procedure ran out of its sweep/iteration budget. Carries the
// last iterate so callers can report where the scheme stalled. Exit code 3.
class NonConvergenceError : public std::runtime_error {
public:
    NonConvergenceError(const std::string& what, std::vector<double> last_iterate)
        : std::runtime_error(what), last_iterate_(std::move(last_iterate)) {}

    explicit NonConvergenceError(const std::string& what) : std::runtime_error(what) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

private:
    std::vector<double> last_iterate_;
};

// Time step too coarse for the generator: dt * lipschitz >= 1 breaks the
// per-step fixed point. Exit code 3.
class ContractionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A solver output violated a property that holds by construction (e.g. the
// Picard iterates failed to be monotone). Indicates a bug, not bad input.
class InternalConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// The representation certificate failed: solver surfaces and the exhaustive
// enumeration disagree beyond tolerance. Exit code 4.
class RepresentationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace orbsde
