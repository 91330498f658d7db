#pragma once

#include <stdexcept>
#include <string>

namespace ancm {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ANCM_DEFINE_ERROR(Name)              \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  }

ANCM_DEFINE_ERROR(InvalidArgument);
ANCM_DEFINE_ERROR(NonFiniteDynamics);
ANCM_DEFINE_ERROR(SingularMass);
ANCM_DEFINE_ERROR(Unmatched);
ANCM_DEFINE_ERROR(NotSymmetric);
ANCM_DEFINE_ERROR(MaxIterations);
ANCM_DEFINE_ERROR(Infeasible);
ANCM_DEFINE_ERROR(EmptyDataset);
ANCM_DEFINE_ERROR(DivergedLoss);
ANCM_DEFINE_ERROR(SingularHessian);
ANCM_DEFINE_ERROR(NonFiniteState);
ANCM_DEFINE_ERROR(LineSearchFailed);
ANCM_DEFINE_ERROR(IoError);
ANCM_DEFINE_ERROR(ConfigError);
ANCM_DEFINE_ERROR(GradientCheckFailed);

#undef ANCM_DEFINE_ERROR

}  // namespace ancm
