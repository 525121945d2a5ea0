#pragma once

#include <stdexcept>
#include <string>

namespace limsim {

// Base of every error the library throws. Each subclass names one failure
// kind from the public contracts so callers can catch narrowly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LIMSIM_DEFINE_ERROR(Name)                         \
  class Name : public Error {                             \
   public:                                                \
    explicit Name(const std::string& what) : Error(what) {} \
  }

// road network
LIMSIM_DEFINE_ERROR(MalformedDocument);
LIMSIM_DEFINE_ERROR(UnsupportedGeometry);
LIMSIM_DEFINE_ERROR(DanglingLink);
LIMSIM_DEFINE_ERROR(NoRoute);
LIMSIM_DEFINE_ERROR(UnknownLane);

// frenet
LIMSIM_DEFINE_ERROR(ProjectionAmbiguous);
LIMSIM_DEFINE_ERROR(OutOfCorridor);
LIMSIM_DEFINE_ERROR(CurvatureSingularity);

// behavior / planning
LIMSIM_DEFINE_ERROR(NonPositiveGap);
LIMSIM_DEFINE_ERROR(NoLegalAction);
LIMSIM_DEFINE_ERROR(SingularBoundary);
LIMSIM_DEFINE_ERROR(AllInfeasible);

// agent protocol
LIMSIM_DEFINE_ERROR(NoEgo);
LIMSIM_DEFINE_ERROR(BadMessage);
LIMSIM_DEFINE_ERROR(BadTrajectory);
LIMSIM_DEFINE_ERROR(UnknownMetaAction);
LIMSIM_DEFINE_ERROR(ConnectionClosed);

// logs / config
LIMSIM_DEFINE_ERROR(BadLog);
LIMSIM_DEFINE_ERROR(ConfigError);

#undef LIMSIM_DEFINE_ERROR

}  // namespace limsim
