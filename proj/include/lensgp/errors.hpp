#pragma once

#include <stdexcept>
#include <string>

namespace lensgp {

/// Base class of every error raised by the library. `module()` names the
/// subsystem that raised it so the CLI can report provenance.
class Error : public std::runtime_error {
public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

private:
  std::string module_;
};

#define LENSGP_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                                  \
  public:                                                                      \
    using Error::Error;                                                        \
  };

// Malformed inputs: bad knot sequences, out-of-range axis indices, shapes.
LENSGP_DEFINE_ERROR(StructuralError)
// A requested value lies outside the domain on which it is defined.
LENSGP_DEFINE_ERROR(RangeError)
// beta == 0: the lens / metaplectic factorization degenerates.
LENSGP_DEFINE_ERROR(SingularLensError)
// An operation was asked to work outside its accuracy envelope.
LENSGP_DEFINE_ERROR(AccuracyError)
// Coefficient schedules that violate a_l >= c0 > 0.
LENSGP_DEFINE_ERROR(HypothesisError)
// Under-resolved fields or potentials.
LENSGP_DEFINE_ERROR(ResolutionError)
// Field mass reaching the edge of the periodic box.
LENSGP_DEFINE_ERROR(BoxEscapeError)
// Allocation estimate above the configured memory cap.
LENSGP_DEFINE_ERROR(CapacityError)
// Family members with vanishing right-hand side.
LENSGP_DEFINE_ERROR(DegenerateMemberError)
LENSGP_DEFINE_ERROR(GridMismatchError)
// Adaptive quadrature failed to meet its tolerance.
LENSGP_DEFINE_ERROR(RefinementError)
LENSGP_DEFINE_ERROR(ConfigError)
LENSGP_DEFINE_ERROR(IntegrityError)
LENSGP_DEFINE_ERROR(KindMismatchError)

#undef LENSGP_DEFINE_ERROR

}  // namespace lensgp
