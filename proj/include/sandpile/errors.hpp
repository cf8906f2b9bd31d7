#pragma once

#include <stdexcept>
#include <string>

namespace sandpile {

// Base class for everything this library throws on its own behalf.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BadParameter : Error {
    using Error::Error;
};

struct BadIndex : Error {
    using Error::Error;
};

struct EmptyVertexSet : Error {
    using Error::Error;
};

struct DisconnectedGraph : Error {
    using Error::Error;
};

// Attempt to half-topple a stable site.
struct IllegalToppling : Error {
    using Error::Error;
};

// A stabilization or chain run exceeded its step budget.
struct StepCapExceeded : Error {
    using Error::Error;
};

// The sleeping/active view is only defined for threshold 2.
struct UnsupportedThreshold : Error {
    using Error::Error;
};

// (eta, h) pair that legal dynamics cannot produce, e.g. an empty site
// with odd odometer.
struct UnreachablePair : Error {
    using Error::Error;
};

// Microscopic chain state outside the admissible state space.
struct InvalidState : Error {
    using Error::Error;
};

// Exact-computation state enumeration grew past its cap.
struct StateCapExceeded : Error {
    using Error::Error;
};

// A linear system that should be regular turned out singular; indicates
// a bug in chain construction, not a user error.
struct SingularSystem : Error {
    using Error::Error;
};

struct NotIrreducible : Error {
    using Error::Error;
};

struct NumericalFailure : Error {
    using Error::Error;
};

} // namespace sandpile
