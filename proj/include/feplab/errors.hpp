#pragma once

#include <stdexcept>
#include <string>

namespace feplab {

// Error taxonomy shared by the library and the CLI. Each code maps to a
// distinct process exit status (see experiments.hpp) so harness scripts can
// tell failure modes apart.
enum class ErrorCode : int {
    // core
    OverlappingSets = 10,
    IncompleteCover = 11,
    EmptyRole = 12,
    InvalidDensity = 13,
    // sde
    NumericalBlowup = 20,
    InsufficientSamples = 21,
    // stationary
    NotHurwitz = 30,
    IllConditioned = 31,
    GridTooCoarse = 32,
    DimensionTooHigh = 33,
    SingularCovariance = 34,
    // helmholtz
    AntisymmetryViolation = 40,
    BlanketViolated = 41,
    // blanket / inference
    SingularBlock = 50,
    SingularBlanketBlock = 51,
    NonInjective = 52,
    SupportMismatch = 53,
    ZeroMarginal = 54,
    // active
    NoDynamics = 60,
    // cli
    ConfigParse = 70,
    ConfigSchema = 71,
    ExperimentUnknown = 72,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    int exit_status() const noexcept { return static_cast<int>(code_); }

private:
    ErrorCode code_;
};

const char* error_code_name(ErrorCode code);

}  // namespace feplab
