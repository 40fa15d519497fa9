#pragma once

#include <stdexcept>
#include <string>

namespace epinet {

/// Failure categories surfaced by the library. Each maps to one concrete
/// precondition or data problem so callers (and tests) can match on it.
enum class errc {
    duplicate_zone,
    non_positive_population,
    empty_zone_list,
    dimension_mismatch,
    negative_entry,
    non_finite,
    invalid_argument,
    exhausted_population,
    invalid_series,
    missing_centroid,
    degenerate_distance,
    degenerate_feature,
    negative_feature,
    numerical_blowup,
    diverged,
    no_signal,
    missing_features,
    zero_network,
    all_zero_actuals,
    insufficient_support,
    no_convergence,
    parse_error,
    io_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
    case errc::duplicate_zone: return "DuplicateZone";
    case errc::non_positive_population: return "NonPositivePopulation";
    case errc::empty_zone_list: return "EmptyZoneList";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::negative_entry: return "NegativeEntry";
    case errc::non_finite: return "NonFinite";
    case errc::invalid_argument: return "InvalidArgument";
    case errc::exhausted_population: return "ExhaustedPopulation";
    case errc::invalid_series: return "InvalidSeries";
    case errc::missing_centroid: return "MissingCentroid";
    case errc::degenerate_distance: return "DegenerateDistance";
    case errc::degenerate_feature: return "DegenerateFeature";
    case errc::negative_feature: return "NegativeFeature";
    case errc::numerical_blowup: return "NumericalBlowup";
    case errc::diverged: return "Diverged";
    case errc::no_signal: return "NoSignal";
    case errc::missing_features: return "MissingFeatures";
    case errc::zero_network: return "ZeroNetwork";
    case errc::all_zero_actuals: return "AllZeroActuals";
    case errc::insufficient_support: return "InsufficientSupport";
    case errc::no_convergence: return "NoConvergence";
    case errc::parse_error: return "ParseError";
    case errc::io_error: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace epinet
