// errors.hpp — exception types thrown by the library

#pragma once

#include <stdexcept>
#include <string>

namespace qdyn {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define QDYN_DEFINE_ERROR(NAME)                    \
    struct NAME : Error {                          \
        using Error::Error;                        \
    };

// model-setup
QDYN_DEFINE_ERROR(BoundStateUnavailable)
QDYN_DEFINE_ERROR(GridUnconverged)
QDYN_DEFINE_ERROR(IndexError)
QDYN_DEFINE_ERROR(IoError)
QDYN_DEFINE_ERROR(FormatError)

// system-builder
QDYN_DEFINE_ERROR(DegenerateTransition)
QDYN_DEFINE_ERROR(TooLarge)

// propagation
QDYN_DEFINE_ERROR(StiffnessFailure)

// optimal-control
QDYN_DEFINE_ERROR(ShapeViolation)
QDYN_DEFINE_ERROR(NumericalFailure)

// model-reduction
QDYN_DEFINE_ERROR(SingularLyapunov)
QDYN_DEFINE_ERROR(NotConverged)
QDYN_DEFINE_ERROR(StillUnstable)
QDYN_DEFINE_ERROR(RankDeficient)
QDYN_DEFINE_ERROR(SingularA22)
QDYN_DEFINE_ERROR(ProjectorSingular)

// cli-io
QDYN_DEFINE_ERROR(ValidationError)

#undef QDYN_DEFINE_ERROR

}  // namespace qdyn
