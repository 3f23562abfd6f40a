#pragma once

#include <stdexcept>
#include <string>

namespace ultra {

// Base class for everything thrown on purpose by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input could not be parsed or fails basic shape checks (non-symmetric
// matrix, negative entry, bad JSON, ...).  Distinct from a verdict that a
// well-formed matrix is not ultrametric.
struct MalformedInputError : Error {
    using Error::Error;
};

// An operation was called with arguments outside its contract
// (map is not distance-preserving, family not pairwise disjoint, ...).
struct PreconditionError : Error {
    using Error::Error;
};

// A configured budget (point count, enumeration size, stage count) was
// exceeded.  Never silently truncate: callers must see this.
struct ResourceBudgetError : Error {
    using Error::Error;
};

// A closure or construction step needs a point configuration the ambient
// space does not contain (fixed finite ambients only; description-backed
// ambients widen instead).
struct ClosureImpossibleError : Error {
    using Error::Error;
};

// A decision procedure ran out of the fragment it can decide; the message
// names the feature that was out of range.  This is a verdict, not a crash.
struct InconclusiveError : Error {
    using Error::Error;
};

} // namespace ultra
