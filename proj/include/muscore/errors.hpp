#pragma once

#include <stdexcept>
#include <string>

namespace muscore {

// Base for all engine errors. Subcommands map these to exit code 3
// (or 2 for validation problems).
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define MUSCORE_DEFINE_ERROR(Name)                                  \
    struct Name : Error {                                           \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

MUSCORE_DEFINE_ERROR(MagicMismatch);
MUSCORE_DEFINE_ERROR(ShapeOverflow);
MUSCORE_DEFINE_ERROR(ShapeMismatch);
MUSCORE_DEFINE_ERROR(NonFiniteValue);
MUSCORE_DEFINE_ERROR(CountExceedsCloud);
MUSCORE_DEFINE_ERROR(DegenerateNeighborhood);
MUSCORE_DEFINE_ERROR(EvenDegree);
MUSCORE_DEFINE_ERROR(DegreeExceedsGroups);
MUSCORE_DEFINE_ERROR(DimensionMismatch);
MUSCORE_DEFINE_ERROR(EmptyScoreSet);
MUSCORE_DEFINE_ERROR(NoAlignmentRoute);
MUSCORE_DEFINE_ERROR(LengthMismatch);
MUSCORE_DEFINE_ERROR(TooManySubsets);
MUSCORE_DEFINE_ERROR(SpaceMismatch);
MUSCORE_DEFINE_ERROR(EmptyMap);
MUSCORE_DEFINE_ERROR(StageCountTooSmall);
MUSCORE_DEFINE_ERROR(WindowTooLarge);
MUSCORE_DEFINE_ERROR(SingleClass);
MUSCORE_DEFINE_ERROR(NoPositives);
MUSCORE_DEFINE_ERROR(NoRegions);
MUSCORE_DEFINE_ERROR(InvalidConfig);
MUSCORE_DEFINE_ERROR(MissingArtifacts);

#undef MUSCORE_DEFINE_ERROR

}  // namespace muscore
