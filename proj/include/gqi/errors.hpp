#pragma once

#include <stdexcept>
#include <string>

namespace gqi {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define GQI_DEFINE_ERROR(Name)                  \
  struct Name : Error {                         \
    using Error::Error;                         \
    Name() : Error(#Name) {}                    \
  }

GQI_DEFINE_ERROR(NotPositiveDefinite);
GQI_DEFINE_ERROR(ConvergenceFailure);
GQI_DEFINE_ERROR(DimensionMismatch);
GQI_DEFINE_ERROR(NotPure);
GQI_DEFINE_ERROR(SymplecticDegeneracy);
GQI_DEFINE_ERROR(SingularCoupling);
GQI_DEFINE_ERROR(QuadratureFailure);
GQI_DEFINE_ERROR(MassTooSmall);
GQI_DEFINE_ERROR(GeometryError);
GQI_DEFINE_ERROR(RootFindingFailure);
GQI_DEFINE_ERROR(NotSymmetric);
GQI_DEFINE_ERROR(Unphysical);
GQI_DEFINE_ERROR(NotSymmetricAB);
GQI_DEFINE_ERROR(PhiPiCorrelated);
GQI_DEFINE_ERROR(FeasibilityViolation);
GQI_DEFINE_ERROR(InfeasibleProjection);
GQI_DEFINE_ERROR(SolViolation);
GQI_DEFINE_ERROR(ZeroProfile);
GQI_DEFINE_ERROR(ZeroNoise);
GQI_DEFINE_ERROR(UnphysicalResidual);
GQI_DEFINE_ERROR(NegativeSqrtArgument);
GQI_DEFINE_ERROR(SingularSubblock);
GQI_DEFINE_ERROR(PrefixUnphysical);
GQI_DEFINE_ERROR(IoError);

#undef GQI_DEFINE_ERROR

}  // namespace gqi
