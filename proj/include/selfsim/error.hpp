#pragma once

#include <stdexcept>
#include <string>

namespace selfsim {

enum class ErrorKind {
    EvalAtOrigin,
    NotElliptic,
    OscillationTooLarge,
    GridTooCoarse,
    NonZeroMean2D,
    NonZeroMean,
    SolverDiverged,
    ParameterOutOfRange,
    StepUnstable,
    NotConverged,
    NonPositiveField,
    PhiNotNormalized,
    WindowTooShort,
    NonPositiveValues,
    QuadratureNotConverged,
    IntegralDiverges,
    InadmissibleExponents,
    InvalidArgument,
    Unsupported,
    Io,
};

inline const char* error_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::EvalAtOrigin: return "EvalAtOrigin";
    case ErrorKind::NotElliptic: return "NotElliptic";
    case ErrorKind::OscillationTooLarge: return "OscillationTooLarge";
    case ErrorKind::GridTooCoarse: return "GridTooCoarse";
    case ErrorKind::NonZeroMean2D: return "NonZeroMean2D";
    case ErrorKind::NonZeroMean: return "NonZeroMean";
    case ErrorKind::SolverDiverged: return "SolverDiverged";
    case ErrorKind::ParameterOutOfRange: return "ParameterOutOfRange";
    case ErrorKind::StepUnstable: return "StepUnstable";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::NonPositiveField: return "NonPositiveField";
    case ErrorKind::PhiNotNormalized: return "PhiNotNormalized";
    case ErrorKind::WindowTooShort: return "WindowTooShort";
    case ErrorKind::NonPositiveValues: return "NonPositiveValues";
    case ErrorKind::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorKind::IntegralDiverges: return "IntegralDiverges";
    case ErrorKind::InadmissibleExponents: return "InadmissibleExponents";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

// Validation errors come from bad inputs; everything else is a numerical failure.
inline bool is_validation_error(ErrorKind k) {
    switch (k) {
    case ErrorKind::EvalAtOrigin:
    case ErrorKind::NonZeroMean2D:
    case ErrorKind::NonZeroMean:
    case ErrorKind::ParameterOutOfRange:
    case ErrorKind::PhiNotNormalized:
    case ErrorKind::WindowTooShort:
    case ErrorKind::InadmissibleExponents:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Unsupported:
    case ErrorKind::Io:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(std::string(error_name(kind)) + ": " + msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace selfsim
