#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace prlm {

enum class ErrorCode {
    DimensionMismatch,
    WeightNotSPD,
    NotDissipative,
    SingularResolvent,
    EmptyList,
    GridMismatch,
    SamplingMismatch,
    NegativeOmega,
    OmegaTooLarge,
    SingularStep,
    SingularCoupling,
    CouplingNotMonotone,
    OmegaZero,
    NotPSOP,
    SingularClosedLoop,
    BadParams,
    NonconformingInterface,
    InvalidArgument,
    ParseError,
    ValidationError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::WeightNotSPD: return "WeightNotSPD";
        case ErrorCode::NotDissipative: return "NotDissipative";
        case ErrorCode::SingularResolvent: return "SingularResolvent";
        case ErrorCode::EmptyList: return "EmptyList";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::SamplingMismatch: return "SamplingMismatch";
        case ErrorCode::NegativeOmega: return "NegativeOmega";
        case ErrorCode::OmegaTooLarge: return "OmegaTooLarge";
        case ErrorCode::SingularStep: return "SingularStep";
        case ErrorCode::SingularCoupling: return "SingularCoupling";
        case ErrorCode::CouplingNotMonotone: return "CouplingNotMonotone";
        case ErrorCode::OmegaZero: return "OmegaZero";
        case ErrorCode::NotPSOP: return "NotPSOP";
        case ErrorCode::SingularClosedLoop: return "SingularClosedLoop";
        case ErrorCode::BadParams: return "BadParams";
        case ErrorCode::NonconformingInterface: return "NonconformingInterface";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

/// Single exception type for the library; the code tells callers what went wrong.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Error(ErrorCode code, const std::string& what, std::size_t index)
        : std::runtime_error(std::string(to_string(code)) + ": " + what + " (index "
                             + std::to_string(index) + ")"),
          code_(code), index_(index) {}

    ErrorCode code() const noexcept { return code_; }

    /// Time step, line number or field position associated with the failure, if any.
    std::optional<std::size_t> index() const noexcept { return index_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> index_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

}  // namespace detail
}  // namespace prlm
